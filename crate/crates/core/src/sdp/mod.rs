//! Semidefinite programming: a dense primal-dual interior-point solver and
//! a builder for programs over Hermitian matrix variables.

mod problem;
mod program;
mod solver;

pub use problem::{BlockMatrix, Constraint, SdpProblem, SparseSymmetric};
pub use program::{Affine, CertificateCheck, Field, Linear, Lmi, Program, ProgramSolution, Sense, VarMatrix};
pub use solver::{residuals, solve, Residuals, SdpSolution, SolveStatus, SolverSettings};

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error("objective is unbounded in variable {0}")]
    Unbounded(String),
    #[error("equality constraints are inconsistent (residual {0:.3e})")]
    InconsistentEqualities(f64),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}
