//! `stein-sure`: command line front end of the harness.
//!
//! Penalties use the normalization `||X b - y||^2 / (2n) + lambda ||b||_1`,
//! plus `gamma_en ||b||^2 / 2` for the Elastic-Net.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};
use stein_core::divergence_mc::{mc_divergence, ElasticNetMap, LassoMap, McOptions, SvtMap, VectorMap};
use stein_core::problem::{Design, RegressionProblem};
use stein_core::rng::{iid_gaussian_matrix, RngStream};
use stein_core::selection::{argmin_first, lasso_candidates};
use stein_core::solvers::{check_kkt, elastic_net, lasso, svt, FitResult, SolverOptions};
use stein_core::stein::{loss_confidence_region, SureReport};
use stein_harness::io::{results_to_json, table_to_csv};
use stein_harness::{
    load_matrix_csv, load_vector_csv, run_experiment, BetaSpec, ExperimentConfig, ExperimentKind, FieldKind,
    HarnessError, Table,
};

const EXIT_INVARIANT: u8 = 2;
const EXIT_USAGE: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "stein-sure", version, about = "SURE, SURE for SURE and second order Stein experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Seed; overrides the seed of a configuration file. Defaults to 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Record wall-clock time in the result.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Data {
    /// Design matrix, headerless CSV.
    #[arg(long = "X", value_name = "CSV")]
    x: PathBuf,
    /// Response, one value per line or a single row.
    #[arg(long = "y", value_name = "CSV")]
    y: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Ridge weight; selects the Elastic-Net where optional.
    #[arg(long = "gamma-en")]
    gamma_en: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DesignArg {
    Orthonormal,
    IidGaussian,
    Equicorrelated,
    Rademacher,
}

#[derive(Args, Debug)]
struct Sim {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    s0: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Defaults to `sigma sqrt(2 log p / n)`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "gamma-en")]
    gamma_en: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, value_enum, default_value_t = DesignArg::IidGaussian)]
    design: DesignArg,
    /// Correlation of the equicorrelated design.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Amplitude of the nonzero coefficients.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo check of the second order Stein identity.
    SosVerify {
        #[arg(long, value_enum)]
        field: FieldArg,
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Columns of the design for the regression residual fields.
        #[arg(long, default_value_t = 40)]
        p: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        /// Threshold or penalty level.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long = "gamma-en", default_value_t = 0.5)]
        gamma_en: f64,
    },
    /// Lasso fit.
    Lasso {
        #[command(flatten)]
        data: Data,
    },
    /// Elastic-Net fit; requires `--gamma-en`.
    Enet {
        #[command(flatten)]
        data: Data,
    },
    /// Singular value thresholding: exact and Monte Carlo degrees of freedom.
    SvtDf {
        /// Observed matrix; a rank-10 101x100 signal plus noise when absent.
        #[arg(long = "Y", value_name = "CSV")]
        y: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        lambda: f64,
        #[arg(long, default_value_t = 225)]
        m: usize,
        #[arg(long, default_value_t = 1e-4)]
        a: f64,
    },
    /// Monte Carlo divergence of the Lasso or Elastic-Net map.
    McDiv {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long)]
        a: Option<f64>,
    },
    /// SURE of a Lasso or Elastic-Net fit.
    Sure {
        #[command(flatten)]
        data: Data,
    },
    /// SURE with its squared-error estimates and confidence regions.
    Sure4sure {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// SURE tuning over a list of Lasso penalties.
    Tune {
        #[arg(long = "X", value_name = "CSV")]
        x: PathBuf,
        #[arg(long = "y", value_name = "CSV")]
        y: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Coverage of the SURE confidence regions.
    Coverage {
        #[command(flatten)]
        sim: Sim,
    },
    /// Variance of the Lasso model size.
    ModelSize {
        #[command(flatten)]
        sim: Sim,
    },
    /// Pivot of the de-biased contrast `beta_1`.
    Debias {
        #[command(flatten)]
        sim: Sim,
        #[arg(long, default_value_t = 100)]
        m: usize,
    },
    /// Runs a JSON experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FieldArg {
    Identity,
    Constant,
    Linear,
    SoftThreshold,
    LassoResidual,
    ElasticNetResidual,
}

impl From<FieldArg> for FieldKind {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Identity => FieldKind::Identity,
            FieldArg::Constant => FieldKind::Constant,
            FieldArg::Linear => FieldKind::Linear,
            FieldArg::SoftThreshold => FieldKind::SoftThreshold,
            FieldArg::LassoResidual => FieldKind::LassoResidual,
            FieldArg::ElasticNetResidual => FieldKind::ElasticNetResidual,
        }
    }
}

/// Output document and whether its invariants hold.
struct Report {
    json: Value,
    table: Table,
    passed: bool,
}

fn vector_table(name: &str, v: &DVector<f64>) -> Table {
    Table { columns: vec!["index".into(), name.into()], rows: v.iter().enumerate().map(|(i, x)| vec![i as f64, *x]).collect() }
}

fn load_data(data: &Data) -> Result<RegressionProblem, HarnessError> {
    let x = load_matrix_csv(&data.x)?;
    let y = load_vector_csv(&data.y)?;
    Ok(RegressionProblem::new(x, y, None, data.sigma)?)
}

/// Solver-convention ridge weight.
fn ridge(gamma_en: f64, n: usize) -> f64 {
    gamma_en * n as f64
}

fn fit_data(problem: &RegressionProblem, data: &Data, force_enet: bool) -> Result<FitResult, HarnessError> {
    let opts = SolverOptions::default();
    match (data.gamma_en, force_enet) {
        (Some(g), _) => Ok(elastic_net(&problem.x, &problem.y, data.lambda, ridge(g, problem.n()), &opts)?),
        (None, true) => Err(HarnessError::Config("the Elastic-Net needs --gamma-en".into())),
        (None, false) => Ok(lasso(&problem.x, &problem.y, data.lambda, &opts)?),
    }
}

/// Convergence, plus the KKT conditions for the Lasso.
fn fit_valid(problem: &RegressionProblem, fit: &FitResult, is_lasso: bool) -> Result<bool, HarnessError> {
    if !fit.converged {
        return Ok(false);
    }
    if is_lasso && fit.lambda > 0.0 {
        let k = check_kkt(problem, fit.lambda, &fit.beta_hat, 0.0)?;
        return Ok(k.max_inactive_correlation <= 1.0 + 1e-6 && k.active_sign_error <= 1e-6);
    }
    Ok(true)
}

fn fit_json(fit: &FitResult) -> Value {
    json!({
        "beta_hat": fit.beta_hat.as_slice(),
        "support": fit.support,
        "df_hat": fit.df_hat,
        "trace_grad_sq": fit.trace_grad_sq,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "duality_gap": fit.duality_gap,
        "lambda": fit.lambda,
    })
}

fn fit_command(data: &Data, enet: bool) -> Result<Report, HarnessError> {
    let problem = load_data(data)?;
    let fit = fit_data(&problem, data, enet)?;
    let passed = fit_valid(&problem, &fit, data.gamma_en.is_none())?;
    Ok(Report { json: fit_json(&fit), table: vector_table("beta_hat", &fit.beta_hat), passed })
}

fn sure_command(data: &Data, alpha: Option<f64>) -> Result<Report, HarnessError> {
    let problem = load_data(data)?;
    let fit = fit_data(&problem, data, false)?;
    let passed = fit_valid(&problem, &fit, data.gamma_en.is_none())?;
    let r = SureReport::from_fit(&fit, &problem.y, data.sigma)?;
    let mut json = json!({ "sure": r.sure, "df_hat": fit.df_hat, "support_size": fit.support.len() });
    let mut columns = vec!["sure".to_string(), "df_hat".to_string()];
    let mut row = vec![r.sure, fit.df_hat];
    if let Some(alpha) = alpha {
        let regions = loss_confidence_region(r.sure, data.sigma, problem.n(), alpha, None)?;
        json["r_hat"] = json!(r.r_hat);
        json["r_prime"] = json!(r.r_prime);
        json["r_double_prime"] = json!(r.r_double_prime);
        json["two_sided"] = serde_json::to_value(regions.two_sided)?;
        json["upper"] = serde_json::to_value(regions.upper)?;
        columns.extend(["r_hat", "r_prime", "r_double_prime", "lower", "upper"].map(String::from));
        row.extend([r.r_hat, r.r_prime, r.r_double_prime, regions.two_sided.lower, regions.two_sided.upper]);
    }
    Ok(Report { json, table: Table { columns, rows: vec![row] }, passed })
}

fn svt_command(y: Option<&PathBuf>, lambda: f64, m: usize, a: f64, seed: u64) -> Result<Report, HarnessError> {
    let ymat = match y {
        Some(path) => load_matrix_csv(path)?,
        None => {
            let mut r = RngStream::new(seed, 0).rng();
            let a = iid_gaussian_matrix(&mut r, 101, 10);
            let b = iid_gaussian_matrix(&mut r, 100, 10);
            iid_gaussian_matrix(&mut r, 101, 100) + a * b.transpose()
        }
    };
    let exact = svt(&ymat, lambda)?;
    let map = SvtMap { rows: ymat.nrows(), cols: ymat.ncols(), lambda };
    let v = DVector::from_column_slice(ymat.as_slice());
    let est = mc_divergence(&map, &v, &McOptions::new(m).step(a), RngStream::new(seed, 1))?;
    let json = json!({
        "df_exact": exact.df_exact,
        "df_mc": est.value,
        "m": m,
        "a": a,
        "empirical_se": est.empirical_se,
        "degenerate_spectrum": exact.degenerate,
    });
    let table = Table {
        columns: ["df_exact", "df_mc", "empirical_se"].map(String::from).to_vec(),
        rows: vec![vec![exact.df_exact, est.value, est.empirical_se]],
    };
    Ok(Report { json, table, passed: !exact.degenerate })
}

fn mc_div_command(data: &Data, m: usize, a: Option<f64>, seed: u64) -> Result<Report, HarnessError> {
    let problem = load_data(data)?;
    let map: Box<dyn VectorMap> = match data.gamma_en {
        Some(g) => {
            Box::new(ElasticNetMap { x: problem.x.clone(), lambda: data.lambda, gamma: ridge(g, problem.n()) })
        }
        None => Box::new(LassoMap { x: problem.x.clone(), lambda: data.lambda }),
    };
    let mut opts = McOptions::new(m);
    opts.a = a;
    let est = mc_divergence(map.as_ref(), &problem.y, &opts, RngStream::new(seed, 0))?;
    let exact = map.divergence(&problem.y).transpose()?;
    let json = json!({
        "estimate": est.value,
        "exact": exact,
        "m": m,
        "a": est.a,
        "se_bound": est.se_bound,
        "empirical_se": est.empirical_se,
    });
    let table = Table {
        columns: ["estimate", "exact", "se_bound"].map(String::from).to_vec(),
        rows: vec![vec![est.value, exact.unwrap_or(f64::NAN), est.se_bound]],
    };
    Ok(Report { json, table, passed: true })
}

fn tune_command(x: &PathBuf, y: &PathBuf, lambdas: &[f64], sigma: f64) -> Result<Report, HarnessError> {
    let problem = RegressionProblem::new(load_matrix_csv(x)?, load_vector_csv(y)?, None, sigma)?;
    let set = lasso_candidates(&problem, lambdas)?;
    let chosen = argmin_first(&set.sure_values).expect("nonempty");
    let json = json!({
        "lambdas": lambdas,
        "sure": set.sure_values,
        "chosen": chosen,
        "lambda": lambdas[chosen],
        "beta_hat": set.fits[chosen].beta_hat.as_slice(),
    });
    let table = Table {
        columns: ["lambda", "sure", "df_hat"].map(String::from).to_vec(),
        rows: lambdas.iter().zip(&set.fits).zip(&set.sure_values).map(|((l, f), s)| vec![*l, *s, f.df_hat]).collect(),
    };
    Ok(Report { json, table, passed: true })
}

fn sim_config(kind: ExperimentKind, sim: &Sim, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, sim.n, sim.p, sim.s0, sim.reps, seed);
    cfg.sigma = sim.sigma;
    cfg.lambda = sim.lambda;
    cfg.gamma_en = sim.gamma_en;
    cfg.alpha = sim.alpha;
    cfg.design = match sim.design {
        DesignArg::Orthonormal => Design::Orthonormal,
        DesignArg::IidGaussian => Design::IidGaussian,
        DesignArg::Equicorrelated => Design::Equicorrelated { rho: sim.rho },
        DesignArg::Rademacher => Design::Rademacher,
    };
    cfg.beta_spec = if sim.s0 == 0 { BetaSpec::Zeros } else { BetaSpec::Spiked { amplitude: sim.amplitude } };
    cfg
}

fn experiment(cfg: &ExperimentConfig, timing: bool) -> Result<Report, HarnessError> {
    let start = Instant::now();
    let mut rs = run_experiment(cfg)?;
    if timing {
        rs.wall_clock_secs = Some(start.elapsed().as_secs_f64());
    }
    for v in &rs.verdicts {
        eprintln!("{}", v.line());
    }
    Ok(Report { json: serde_json::from_str(&results_to_json(&rs)?)?, table: rs.records_table(), passed: rs.passed() })
}

fn dispatch(cli: &Cli) -> Result<Report, HarnessError> {
    let seed = cli.common.seed.unwrap_or(0);
    let timing = cli.common.timing;
    match &cli.command {
        Command::SosVerify { field, n, p, sigma, reps, lambda, gamma_en } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::SosVerify, *n, *p, (*p).min(2), *reps, seed);
            cfg.sigma = *sigma;
            cfg.lambda = *lambda;
            cfg.gamma_en = Some(*gamma_en);
            cfg.field = Some((*field).into());
            experiment(&cfg, timing)
        }
        Command::Lasso { data } => fit_command(data, false),
        Command::Enet { data } => fit_command(data, true),
        Command::SvtDf { y, lambda, m, a } => svt_command(y.as_ref(), *lambda, *m, *a, seed),
        Command::McDiv { data, m, a } => mc_div_command(data, *m, *a, seed),
        Command::Sure { data } => sure_command(data, None),
        Command::Sure4sure { data, alpha } => sure_command(data, Some(*alpha)),
        Command::Tune { x, y, lambdas, sigma } => tune_command(x, y, lambdas, *sigma),
        Command::Coverage { sim } => experiment(&sim_config(ExperimentKind::Coverage, sim, seed), timing),
        Command::ModelSize { sim } => experiment(&sim_config(ExperimentKind::ModelSize, sim, seed), timing),
        Command::Debias { sim, m } => {
            let mut cfg = sim_config(ExperimentKind::DebiasPivot, sim, seed);
            cfg.m = Some(*m);
            experiment(&cfg, timing)
        }
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(s) = cli.common.seed {
                cfg.seed = s;
            }
            experiment(&cfg, timing)
        }
    }
}

fn write_output(cli: &Cli, report: &Report) -> Result<(), HarnessError> {
    let text = match cli.common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json)?;
            s.push('\n');
            s
        }
        Format::Csv => table_to_csv(&report.table)?,
    };
    match &cli.common.out {
        Some(path) => std::fs::write(path, text).map_err(|source| HarnessError::Io { path: path.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Some(k) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let report = match dispatch(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Err(e) = write_output(&cli, &report) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INVARIANT)
    }
}
