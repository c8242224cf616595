//! Per-channel bound reports, parameter sweeps and the verification suites.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channels::{nr_channel, ChannelError, QuantumChannel};
use crate::models::{cb_norm_pt, gamma, kappa, upsilon, CodeClass, KappaResult, ModelError, ModelSettings, SolveSide, SolveStats};

mod csv;
mod suites;

pub use csv::{format_value, read_csv, write_csv};
pub use suites::{verify_suite, verify_suite_with, Suite, SuiteReport, SuiteResult, VerifyConfig};

#[derive(Debug, thiserror::Error)]
pub enum BoundsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{id} failed at {param}: {message}")]
    Sweep { id: BoundId, param: f64, message: String },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identifier of a reported bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoundId {
    #[serde(rename = "qGamma")]
    QGamma,
    #[serde(rename = "qTheta")]
    QTheta,
    #[serde(rename = "kappaNS")]
    KappaNs,
    #[serde(rename = "kappaPPTp")]
    KappaPptp,
    #[serde(rename = "kappaNSPPTp")]
    KappaNsPptp,
    #[serde(rename = "upsilon")]
    Upsilon,
    #[serde(rename = "oneShotZeroErrorPPTp")]
    OneShotZeroErrorPptp,
}

impl BoundId {
    pub const ALL: [BoundId; 7] = [
        BoundId::QGamma,
        BoundId::QTheta,
        BoundId::KappaNs,
        BoundId::KappaPptp,
        BoundId::KappaNsPptp,
        BoundId::Upsilon,
        BoundId::OneShotZeroErrorPptp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::QGamma => "qGamma",
            BoundId::QTheta => "qTheta",
            BoundId::KappaNs => "kappaNS",
            BoundId::KappaPptp => "kappaPPTp",
            BoundId::KappaNsPptp => "kappaNSPPTp",
            BoundId::Upsilon => "upsilon",
            BoundId::OneShotZeroErrorPptp => "oneShotZeroErrorPPTp",
        }
    }

    /// Parses a comma-separated list, keeping the first occurrence of each id.
    pub fn parse_list(text: &str) -> Result<Vec<BoundId>, BoundsError> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let id: BoundId = part.parse().map_err(BoundsError::InvalidArgument)?;
            if !out.contains(&id) {
                out.push(id);
            }
        }
        if out.is_empty() {
            return Err(BoundsError::InvalidArgument("no bounds requested".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<&str> = BoundId::ALL.iter().map(|id| id.as_str()).collect();
                format!("unknown bound '{s}' (known: {})", known.join(", "))
            })
    }
}

/// Outcome of one numeric check: `observed ≤ limit` passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub limit: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            limit,
            passed: observed <= limit,
            error: None,
        }
    }

    pub fn failed(name: impl Into<String>, error: impl fmt::Display) -> Self {
        Self {
            name: name.into(),
            observed: f64::NAN,
            limit: f64::NAN,
            passed: false,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundReport {
    pub channel_name: String,
    pub dims: (usize, usize),
    pub requested: Vec<BoundId>,
    pub values: BTreeMap<BoundId, f64>,
    pub wall_times: BTreeMap<BoundId, f64>,
    pub solver_stats: BTreeMap<BoundId, SolveStats>,
    /// Bounds that could not be computed, with the reason.
    pub errors: BTreeMap<BoundId, String>,
    pub checks: Vec<Check>,
}

impl BoundReport {
    pub fn checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Computes each requested bound; a failing bound is recorded in `errors`
/// and does not stop the others.
pub fn report(ch: &QuantumChannel, requested: &[BoundId], s: &ModelSettings) -> BoundReport {
    let mut out = BoundReport {
        channel_name: ch.name().to_string(),
        dims: (ch.dim_in(), ch.dim_out()),
        requested: requested.to_vec(),
        values: BTreeMap::new(),
        wall_times: BTreeMap::new(),
        solver_stats: BTreeMap::new(),
        errors: BTreeMap::new(),
        checks: Vec::new(),
    };
    // oneShotZeroErrorPPTp reuses the κ^PPTp run.
    let mut pptp: Option<Result<KappaResult, String>> = None;
    let mut order: Vec<BoundId> = Vec::new();
    for &id in requested {
        if !order.contains(&id) {
            order.push(id);
        }
    }
    for id in order {
        let start = Instant::now();
        let result: Result<(f64, SolveStats), String> = match id {
            BoundId::QGamma => gamma(ch, SolveSide::Both, s)
                .map(|g| {
                    out.checks.push(Check::new(
                        "gamma primal/dual agreement",
                        (g.gamma - g.dual_mu).abs() / g.gamma.abs().max(1.0),
                        1e-6,
                    ));
                    (g.q_gamma, g.stats)
                })
                .map_err(|e| e.to_string()),
            BoundId::QTheta => cb_norm_pt(ch, s).map(|r| (r.q_theta, r.stats)).map_err(|e| e.to_string()),
            BoundId::KappaNs => kappa(ch, CodeClass::Ns, s).map(|r| (r.kappa, r.stats)).map_err(|e| e.to_string()),
            BoundId::KappaNsPptp => kappa(ch, CodeClass::NsPptp, s)
                .map(|r| (r.kappa, r.stats))
                .map_err(|e| e.to_string()),
            BoundId::KappaPptp | BoundId::OneShotZeroErrorPptp => {
                let cached = pptp.get_or_insert_with(|| kappa(ch, CodeClass::Pptp, s).map_err(|e| e.to_string()));
                cached.clone().map(|r| {
                    let v = if id == BoundId::KappaPptp {
                        r.kappa
                    } else {
                        r.one_shot_zero_error as f64
                    };
                    (v, r.stats)
                })
            }
            BoundId::Upsilon => ch
                .kraus_support(s.rank_tol)
                .map_err(ModelError::from)
                .and_then(|ks| upsilon(&ks, s))
                .map(|r| (r.upsilon, r.stats))
                .map_err(|e| e.to_string()),
        };
        out.wall_times.insert(id, start.elapsed().as_secs_f64());
        match result {
            Ok((v, stats)) => {
                out.values.insert(id, v);
                out.solver_stats.insert(id, stats);
            }
            Err(e) => {
                log::warn!("{}: {id} failed: {e}", ch.name());
                out.errors.insert(id, e);
            }
        }
    }
    cross_check(&mut out);
    out
}

fn cross_check(r: &mut BoundReport) {
    let v = &r.values;
    let mut notes = Vec::new();
    if let (Some(g), Some(t)) = (v.get(&BoundId::QGamma), v.get(&BoundId::QTheta)) {
        notes.push(Check::new("qGamma <= qTheta", g - t, 2e-5));
    }
    if let (Some(k), Some(g)) = (v.get(&BoundId::KappaPptp), v.get(&BoundId::QGamma)) {
        notes.push(Check::new("log2(kappaPPTp) <= qGamma", k.log2() - g, 1e-4));
    }
    if let (Some(k), Some(u)) = (v.get(&BoundId::KappaNs), v.get(&BoundId::Upsilon)) {
        notes.push(Check::new("kappaNS^2 = upsilon", (k * k - u).abs(), 1e-3));
    }
    if let (Some(both), Some(ns), Some(pptp)) = (
        v.get(&BoundId::KappaNsPptp),
        v.get(&BoundId::KappaNs),
        v.get(&BoundId::KappaPptp),
    ) {
        notes.push(Check::new("kappaNSPPTp <= min(kappaNS, kappaPPTp)", both - ns.min(*pptp), 2e-4));
    }
    r.checks.extend(notes);
}

/// Channel family swept by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// The qutrit-to-qubit family `N_r`, `0 ≤ r ≤ 0.5`.
    Nr,
}

impl Family {
    pub fn range(self) -> (f64, f64) {
        match self {
            Family::Nr => (0.0, 0.5),
        }
    }

    pub fn channel(self, param: f64) -> Result<QuantumChannel, ChannelError> {
        match self {
            Family::Nr => nr_channel(param),
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nr" => Ok(Family::Nr),
            other => Err(format!("unknown family '{other}' (known: nr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: f64,
    pub values: BTreeMap<BoundId, f64>,
}

/// `r ∈ {0, 0.05, ..., 0.5}`.
pub fn nr_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 20.0).collect()
}

/// `steps` evenly spaced points from `from` to `to` inclusive.
pub fn linear_grid(from: f64, to: f64, steps: usize) -> Result<Vec<f64>, BoundsError> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(BoundsError::InvalidArgument(format!("bad grid {from}..{to} with {steps} steps")));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let n = (steps - 1) as f64;
    Ok((0..steps).map(|i| from + (to - from) * i as f64 / n).collect())
}

/// One row per grid point, ordered by parameter.
pub fn sweep(family: Family, grid: &[f64], requested: &[BoundId], s: &ModelSettings) -> Result<Vec<SweepRow>, BoundsError> {
    let (lo, hi) = family.range();
    if let Some(&bad) = grid.iter().find(|&&p| !(lo..=hi).contains(&p)) {
        return Err(BoundsError::InvalidArgument(format!("parameter {bad} outside [{lo}, {hi}]")));
    }
    let mut params = grid.to_vec();
    params.sort_by(f64::total_cmp);
    params.dedup();
    let mut rows = Vec::with_capacity(params.len());
    for param in params {
        let ch = family.channel(param)?;
        let rep = report(&ch, requested, s);
        if let Some((&id, message)) = rep.errors.iter().next() {
            return Err(BoundsError::Sweep {
                id,
                param,
                message: message.clone(),
            });
        }
        rows.push(SweepRow {
            parameter: param,
            values: rep.values,
        });
    }
    Ok(rows)
}
