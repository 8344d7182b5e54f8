//! Experiment harness for `stein-core`: configuration, orchestration of the
//! Monte Carlo experiments, and matrix and result I/O.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod results;

pub use config::{BetaSpec, ExperimentConfig, ExperimentKind, FieldKind, McMapKind, TuneSpec};
pub use error::{HarnessError, Result};
pub use experiments::{run_experiment, DESIGN_STREAM};
pub use io::{emit_table_csv, load_matrix_csv, load_vector_csv, save_matrix_csv, save_results_json, Table};
pub use results::{Record, ResultSet, Verdict, SCHEMA};
