//! The capacity-related semidefinite programs: channel fidelity and
//! deviation under assisted codes, κ, Υ, Γ and the cb norm of the partially
//! transposed Choi matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::ChannelError;
use crate::linalg::{LinalgError, Matrix};
use crate::sdp::{Field, Program, ProgramSolution, SdpError, SolveStatus, SolverSettings};

mod cb_norm;
mod fidelity;
mod gamma;
mod kappa;
mod upsilon;

pub use cb_norm::{cb_norm_pt, CbNormResult};
pub use fidelity::{deviation, fidelity, lemma1_check, FidelityDual, FidelityResult, LemmaChain};
pub use gamma::{gamma, superactivation_bound, GammaResult};
pub use kappa::{deviation_scan, kappa, kappa_activated, KappaResult};
pub use upsilon::{upsilon, UpsilonResult};

/// Class of assisting codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeClass {
    #[serde(rename = "ns")]
    Ns,
    #[serde(rename = "pptp")]
    Pptp,
    #[serde(rename = "ns-pptp")]
    NsPptp,
}

impl CodeClass {
    pub const ALL: [CodeClass; 3] = [CodeClass::Ns, CodeClass::Pptp, CodeClass::NsPptp];

    pub fn has_ns(self) -> bool {
        matches!(self, CodeClass::Ns | CodeClass::NsPptp)
    }

    pub fn has_pptp(self) -> bool {
        matches!(self, CodeClass::Pptp | CodeClass::NsPptp)
    }
}

impl fmt::Display for CodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeClass::Ns => "ns",
            CodeClass::Pptp => "pptp",
            CodeClass::NsPptp => "ns-pptp",
        })
    }
}

impl FromStr for CodeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ns" => Ok(CodeClass::Ns),
            "pptp" | "ppt" => Ok(CodeClass::Pptp),
            "ns-pptp" | "nspptp" | "ns_pptp" | "ns&pptp" => Ok(CodeClass::NsPptp),
            other => Err(format!("unknown code class '{other}' (expected ns, pptp or ns-pptp)")),
        }
    }
}

/// Which side(s) of a primal/dual pair to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveSide {
    Primal,
    Dual,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub solver: SolverSettings,
    /// Threshold below which a deviation value counts as zero.
    pub eps_d: f64,
    /// Relative eigenvalue cutoff for support projectors.
    pub rank_tol: f64,
    /// Bisection width for κ.
    pub kappa_tol: f64,
    /// Largest residual at which a solve that stopped early is still used.
    pub accept_tol: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            eps_d: 1e-9,
            rank_tol: 1e-7,
            kappa_tol: 1e-4,
            accept_tol: 1e-6,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{label}: {source}")]
    Sdp {
        label: String,
        #[source]
        source: SdpError,
    },
    #[error("{label}: solver stopped with status {status:?} (worst residual {residual:.2e})")]
    Solver {
        label: String,
        status: SolveStatus,
        residual: f64,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero-deviation region is not an interval on [1, {k_max}] (scan {pattern}); use deviation_scan on a grid instead")]
    NonMonotone { k_max: f64, pattern: String },
    #[error("kappa_activated: dim_in * d_max = {0} exceeds 12")]
    ScaleGuard(usize),
    #[error("upsilon: support constraint violated by {0:.3e}")]
    SupportViolation(f64),
}

/// Iteration count and accuracy of the solve(s) behind a result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct SolveStats {
    pub solves: usize,
    pub iterations: usize,
    /// Worst relative duality gap over the solves.
    pub gap: f64,
    /// Worst primal or dual residual over the solves.
    pub residual: f64,
}

impl SolveStats {
    fn of(sol: &ProgramSolution) -> Self {
        Self {
            solves: 1,
            iterations: sol.iterations,
            gap: sol.residuals.gap,
            residual: sol.residuals.primal.max(sol.residuals.dual),
        }
    }

    pub fn merge(&mut self, other: SolveStats) {
        self.solves += other.solves;
        self.iterations += other.iterations;
        self.gap = self.gap.max(other.gap);
        self.residual = self.residual.max(other.residual);
    }
}

pub(crate) fn field_for(data: &[&Matrix]) -> Field {
    if data.iter().all(|m| m.max_imag() == 0.0) {
        Field::Real
    } else {
        Field::Complex
    }
}

pub(crate) fn run(prog: &Program, label: &str, s: &ModelSettings) -> Result<ProgramSolution, ModelError> {
    let sol = prog.solve(&s.solver).map_err(|source| ModelError::Sdp {
        label: label.to_string(),
        source,
    })?;
    if sol.status == SolveStatus::Optimal {
        return Ok(sol);
    }
    let r = &sol.residuals;
    let residual = r.primal.max(r.dual).max(r.gap);
    if residual <= s.accept_tol {
        log::warn!("{label}: solver status {:?}, using best iterate (residual {residual:.2e})", sol.status);
        Ok(sol)
    } else {
        Err(ModelError::Solver {
            label: label.to_string(),
            status: sol.status,
            residual,
        })
    }
}
