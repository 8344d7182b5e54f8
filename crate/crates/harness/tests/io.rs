use std::path::Path;

use nalgebra::{DMatrix, DVector};
use stein_core::rng::{iid_gaussian_matrix, RngStream};
use stein_harness::io::{matrix_to_csv, parse_matrix_csv, results_to_json};
use stein_harness::{
    load_matrix_csv, load_vector_csv, run_experiment, save_matrix_csv, ExperimentConfig, ExperimentKind,
    HarnessError, SCHEMA,
};

#[test]
fn random_matrix_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let m = iid_gaussian_matrix(&mut RngStream::new(1, 0).rng(), 5, 7) * 1e-3;
    save_matrix_csv(&path, &m).unwrap();
    assert_eq!(load_matrix_csv(&path).unwrap(), m);
}

#[test]
fn extreme_values_round_trip() {
    let m = DMatrix::from_row_slice(2, 3, &[f64::MIN_POSITIVE, -0.0, 1e308, 0.1, -1.0 / 3.0, 5e-324]);
    let back = parse_matrix_csv(&matrix_to_csv(&m), Path::new("x.csv")).unwrap();
    assert_eq!(back, m);
}

#[test]
fn ragged_row_names_its_line() {
    let err = parse_matrix_csv("1,2,3\n4,5\n", Path::new("bad.csv")).unwrap_err();
    match err {
        HarnessError::Parse { line, .. } => assert_eq!(line, 2),
        e => panic!("unexpected error {e}"),
    }
}

#[test]
fn vector_accepts_row_or_column() {
    let dir = tempfile::tempdir().unwrap();
    let row = dir.path().join("row.csv");
    let col = dir.path().join("col.csv");
    std::fs::write(&row, "1,2,3\n").unwrap();
    std::fs::write(&col, "1\n2\n3\n").unwrap();
    let want = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    assert_eq!(load_vector_csv(&row).unwrap(), want);
    assert_eq!(load_vector_csv(&col).unwrap(), want);
    std::fs::write(&row, "1,2\n3,4\n").unwrap();
    assert!(load_vector_csv(&row).is_err());
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_matrix_csv(Path::new("/nonexistent/x.csv")), Err(HarnessError::Io { .. })));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = ExperimentConfig::new(ExperimentKind::SureUnbiased, 40, 60, 3, 30, 9);
    let a = results_to_json(&run_experiment(&cfg).unwrap()).unwrap();
    let b = results_to_json(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.contains(SCHEMA));
    let other = ExperimentConfig { seed: 10, ..cfg };
    assert_ne!(a, results_to_json(&run_experiment(&other).unwrap()).unwrap());
}

#[test]
fn record_count_matches_replications() {
    let cfg = ExperimentConfig::new(ExperimentKind::ModelSize, 30, 50, 2, 17, 3);
    let rs = run_experiment(&cfg).unwrap();
    assert_eq!(rs.records.len(), 17);
    assert!(rs.records.iter().enumerate().all(|(i, r)| r.index == i));
    assert!(rs.wall_clock_secs.is_none());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        r#"{"kind":"coverage","n":10,"p":5,"s0":6,"replications":10}"#,
        r#"{"kind":"coverage","n":10,"p":5,"replications":0}"#,
        r#"{"kind":"coverage","n":10,"p":20,"replications":5,"design":"orthonormal"}"#,
        r#"{"kind":"coverage","n":10,"p":5,"replications":5,"typo":1}"#,
        r#"{"kind":"sos_verify","n":10,"replications":500}"#,
    ];
    for text in bad {
        let parsed = ExperimentConfig::from_json(text);
        let err = parsed.and_then(|c| c.validate().map(|_| c));
        assert!(err.is_err(), "accepted {text}");
    }
    let ok = ExperimentConfig::from_json(r#"{"kind":"coverage","n":10,"p":5,"s0":2,"replications":5}"#).unwrap();
    ok.validate().unwrap();
}
