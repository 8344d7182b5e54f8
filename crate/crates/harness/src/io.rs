//! Headerless comma-separated matrices and result files.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{io_err, HarnessError, Result};
use crate::results::ResultSet;

/// 17 significant digits, enough to recover every `f64` exactly.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Parses headerless CSV text, one matrix row per line.
pub fn parse_matrix_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let parse_err = |line: u64, message: String| HarnessError::Parse { path: path.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut data: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            parse_err(line, message)
        })?;
        let line = record.position().map_or(rows as u64 + 1, |p| p.line());
        if rows == 0 {
            cols = record.len();
        }
        for (k, token) in record.iter().enumerate() {
            let v: f64 = token
                .parse()
                .map_err(|_| parse_err(line, format!("field {} is not a number: {token:?}", k + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 || cols == 0 {
        return Err(parse_err(1, "no data".into()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_matrix_csv(&text, path)
}

/// A row or column of numbers.
pub fn load_vector_csv(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let m = load_matrix_csv(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected a single row or column, found {}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_real(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn save_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(m)).map_err(io_err(path))
}

pub fn results_to_json(results: &ResultSet) -> Result<String> {
    let mut s = serde_json::to_string_pretty(results)?;
    s.push('\n');
    Ok(s)
}

pub fn save_results_json(path: impl AsRef<Path>, results: &ResultSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, results_to_json(results)?).map_err(io_err(path))
}

/// Header line and rows; one column per name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn table_to_csv(table: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| HarnessError::Config(format!("csv output: {e}"));
    w.write_record(&table.columns).map_err(wrap)?;
    for row in &table.rows {
        if row.len() != table.columns.len() {
            return Err(HarnessError::Config(format!(
                "table row has {} values for {} columns",
                row.len(),
                table.columns.len()
            )));
        }
        w.write_record(row.iter().map(|v| format_real(*v))).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Config(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_table_csv(path: impl AsRef<Path>, table: &Table) -> Result<()> {
    let path = path.as_ref();
    let text = table_to_csv(table)?;
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_matrix() {
        let m = parse_matrix_csv("1,2\n3,4\n", Path::new("m.csv")).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let e = parse_matrix_csv("1,2\n3", Path::new("m.csv")).unwrap_err();
        assert!(matches!(e, HarnessError::Parse { line: 2, .. }), "{e}");
        let e = parse_matrix_csv("1,2\n3,4\n5,x\n", Path::new("m.csv")).unwrap_err();
        assert!(matches!(e, HarnessError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, f64::MIN_POSITIVE, 123456789.12345679] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }
}
