pub mod chi2;
pub mod debias;
pub mod divergence_mc;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod selection;
pub mod solvers;
pub mod stein;
pub mod stats;

pub use error::{Result, SteinError};
pub use problem::{Design, RegressionProblem, SequenceModel};
pub use rng::RngStream;
pub use solvers::{FitKind, FitResult, SolverOptions};
