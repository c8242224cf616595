use serde::Serialize;

use crate::channels::{identity_channel, KrausSupport, QuantumChannel};

use super::fidelity::deviation_with_stats;
use super::gamma::gamma_value;
use super::{CodeClass, ModelError, ModelSettings, SolveStats};

#[derive(Debug, Clone, Serialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// `⌊κ⌋`, the one-shot zero-error capacity in message-number form.
    pub one_shot_zero_error: u64,
    /// `D ≥ −ε_D` at `lo`, `D < −ε_D` at `hi`. `kappa` can fall slightly
    /// below `lo` when the quadratic fit past the threshold is used.
    pub bracket: (f64, f64),
    pub code: CodeClass,
    pub k_max: f64,
    pub stats: SolveStats,
}

struct Predicate<'a> {
    ks: &'a KrausSupport,
    code: CodeClass,
    s: &'a ModelSettings,
    stats: SolveStats,
}

impl Predicate<'_> {
    /// Whether `D^Ω(K, k)` counts as zero: `k` is rejected only when the
    /// certified upper bound on the deviation is below `−ε_D`.
    fn zero_at(&mut self, k: f64) -> Result<bool, ModelError> {
        let d = deviation_with_stats(self.ks, k, self.code, self.s)?;
        self.stats.merge(d.stats);
        log::debug!("deviation({k:.6}, {}) in [{:.3e}, {:.3e}]", self.code, d.value, d.upper);
        Ok(d.upper >= -self.s.eps_d)
    }

    fn value_at(&mut self, k: f64) -> Result<f64, ModelError> {
        let d = deviation_with_stats(self.ks, k, self.code, self.s)?;
        self.stats.merge(d.stats);
        Ok(d.value)
    }

    /// Where the deviation leaves zero quadratically, `D ≈ −c (k − κ)²`, the
    /// threshold test only locates `κ` to within `√(ε_D / c)`. This fits
    /// `√(−D)` at three points past `hi`, where `D` is well resolved, and
    /// returns its root when the fit is linear and the root is consistent
    /// with the bracket.
    fn extrapolate(&mut self, lo: f64, hi: f64, cap: f64) -> Result<Option<f64>, ModelError> {
        let eps = self.s.eps_d;
        let mut delta = (4.0 * (hi - lo)).max(1e-3);
        let d_far = loop {
            if hi + delta > cap {
                return Ok(None);
            }
            let d = self.value_at(hi + delta)?;
            if -d >= 1e3 * eps {
                break d;
            }
            delta *= 2.0;
            if delta > 0.5 {
                return Ok(None);
            }
        };
        let (ka, km, kb) = (hi + 0.5 * delta, hi + 0.75 * delta, hi + delta);
        let (da, dm) = (self.value_at(ka)?, self.value_at(km)?);
        if -da < 50.0 * eps || -dm < -da {
            return Ok(None);
        }
        let (ra, rm, rb) = ((-da).sqrt(), (-dm).sqrt(), (-d_far).sqrt());
        let (s1, s2) = ((rm - ra) / (km - ka), (rb - rm) / (kb - km));
        if s1 <= 0.0 || (s1 - s2).abs() > 0.05 * s1.max(s2) {
            return Ok(None);
        }
        let slope = (rb - ra) / (kb - ka);
        let root = ka - ra / slope;
        let resolution = eps.sqrt() / slope;
        let accepted = root <= hi && root >= lo - 2.0 * resolution - self.s.kappa_tol;
        log::debug!("kappa extrapolation: root {root:.6} in [{lo:.6}, {hi:.6}], accepted {accepted}");
        Ok(accepted.then_some(root))
    }
}

/// `κ^Ω(N) = max {k : F^Ω(N, k) = 1}`, found by bisection on the sign of the
/// deviation `D^Ω(K, k)`, which depends only on the Kraus span `K`.
pub fn kappa(ch: &QuantumChannel, code: CodeClass, s: &ModelSettings) -> Result<KappaResult, ModelError> {
    let ks = ch.kraus_support(s.rank_tol)?;
    let mut stats = SolveStats::default();
    let k_max = if code.has_pptp() {
        // log κ^PPTp ≤ Q_Γ
        let (g, st) = gamma_value(ch, s)?;
        stats.merge(st);
        g + 1.0
    } else {
        ch.dim_in() as f64
    };
    let mut result = kappa_of_support(&ks, code, k_max, ch.dim_in() as f64, s)?;
    stats.merge(result.stats);
    result.stats = stats;
    Ok(result)
}

fn kappa_of_support(
    ks: &KrausSupport,
    code: CodeClass,
    k_max: f64,
    dim_in: f64,
    s: &ModelSettings,
) -> Result<KappaResult, ModelError> {
    if !(s.kappa_tol > 0.0) {
        return Err(ModelError::InvalidArgument(format!("kappa tolerance must be positive, got {}", s.kappa_tol)));
    }
    let mut pred = Predicate {
        ks,
        code,
        s,
        stats: SolveStats::default(),
    };
    let mut lo = 1.0;
    let mut hi = k_max.max(1.0 + s.kappa_tol);
    if pred.zero_at(hi)? {
        let cap = 2.0 * dim_in;
        if code.has_pptp() || hi >= cap || pred.zero_at(cap)? {
            return Err(ModelError::NonMonotone {
                k_max: hi,
                pattern: "deviation is zero at the upper cap".into(),
            });
        }
        lo = hi;
        hi = cap;
    }

    if code.has_ns() {
        // The interval structure is not guaranteed here; check it on a grid.
        let grid: Vec<f64> = (1..=8).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect();
        let mut flags = Vec::with_capacity(grid.len());
        for &k in &grid {
            flags.push(pred.zero_at(k)?);
        }
        let pattern: String = flags.iter().map(|&f| if f { 'T' } else { 'F' }).collect();
        let first_false = flags.iter().position(|&f| !f).unwrap_or(flags.len());
        if flags[first_false..].iter().any(|&f| f) || first_false == flags.len() {
            return Err(ModelError::NonMonotone { k_max: hi, pattern });
        }
        if first_false > 0 {
            lo = grid[first_false - 1];
        }
        hi = grid[first_false];
    }

    while hi - lo > s.kappa_tol {
        let mid = 0.5 * (lo + hi);
        if pred.zero_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The bracket may straddle an integer κ; decide it exactly.
    let n = hi.floor();
    if n > lo && n < hi && pred.zero_at(n)? {
        lo = n;
    }
    // A certified integer lower end is reported as is.
    let kappa = if lo.fract() == 0.0 {
        lo
    } else {
        let cap = if code.has_pptp() { k_max.max(hi) } else { 2.0 * dim_in };
        pred.extrapolate(lo, hi, cap)?.unwrap_or(0.5 * (lo + hi))
    };
    Ok(KappaResult {
        kappa,
        one_shot_zero_error: lo.floor() as u64,
        bracket: (lo, hi),
        code,
        k_max,
        stats: pred.stats,
    })
}

/// `D^Ω(K, k)` at each grid point, for graphs whose zero-deviation region
/// is not an interval.
pub fn deviation_scan(
    ks: &KrausSupport,
    code: CodeClass,
    grid: &[f64],
    s: &ModelSettings,
) -> Result<Vec<(f64, f64)>, ModelError> {
    grid.iter()
        .map(|&k| deviation_with_stats(ks, k, code, s).map(|d| (k, d.value)))
        .collect()
}

/// `max_{2 ≤ d ≤ d_max} ⌊κ^PPTp(N ⊗ I_d)⌋ / d`.
///
/// For each `d` the integer `n = ⌊κ^PPTp(N ⊗ I_d)⌋` is certified directly by
/// `D(n) = 0` and `D(n+1) < 0`, starting from the estimate `d·κ^PPTp(N)`.
pub fn kappa_activated(ch: &QuantumChannel, d_max: usize, s: &ModelSettings) -> Result<f64, ModelError> {
    if d_max < 2 {
        return Err(ModelError::InvalidArgument(format!("d_max must be at least 2, got {d_max}")));
    }
    let scale = ch.dim_in() * d_max;
    if scale > 12 {
        return Err(ModelError::ScaleGuard(scale));
    }
    let base = kappa(ch, CodeClass::Pptp, s)?;
    let mut best: f64 = 0.0;
    for d in 2..=d_max {
        let joint = ch.tensor(&identity_channel(d)?);
        let ks = joint.kraus_support(s.rank_tol)?;
        let mut pred = Predicate {
            ks: &ks,
            code: CodeClass::Pptp,
            s,
            stats: SolveStats::default(),
        };
        let mut n = ((d as f64) * base.bracket.1).floor().max(1.0);
        while n > 1.0 && !pred.zero_at(n)? {
            n -= 1.0;
        }
        while pred.zero_at(n + 1.0)? {
            n += 1.0;
        }
        log::debug!("kappa_activated: d = {d}, floor kappa = {n}");
        best = best.max(n / d as f64);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{mixed_unitary, nr_channel, random_channel, werner_holevo};
    use crate::linalg::Matrix;
    use crate::models::testutil::settings;
    use crate::models::upsilon;

    #[test]
    fn identity_is_its_dimension_for_all_codes() {
        let s = settings();
        for d in [2usize, 3] {
            let ch = identity_channel(d).unwrap();
            for code in CodeClass::ALL {
                let r = kappa(&ch, code, &s).unwrap();
                assert!((r.kappa - d as f64).abs() <= 1e-5 * d as f64, "d={d} {code}: {r:?}");
                assert_eq!(r.one_shot_zero_error, d as u64);
            }
        }
    }

    #[test]
    fn werner_pptp() {
        let s = settings();
        for d in [3usize, 4] {
            let r = kappa(&werner_holevo(d).unwrap(), CodeClass::Pptp, &s).unwrap();
            let expect = (d as f64 + 2.0) / d as f64;
            assert!((r.kappa - expect).abs() <= 2.0 * s.kappa_tol, "d={d}: {r:?}");
            assert!(r.bracket.1 - r.bracket.0 <= s.kappa_tol);
            assert_eq!(r.one_shot_zero_error, 1);
        }
    }

    #[test]
    fn bracket_brackets_the_threshold() {
        let s = settings();
        let ch = random_channel(2, 2, 2, 3).unwrap();
        let ks = ch.kraus_support(s.rank_tol).unwrap();
        let r = kappa(&ch, CodeClass::Pptp, &s).unwrap();
        let (lo, hi) = r.bracket;
        let d_lo = deviation_with_stats(&ks, lo, CodeClass::Pptp, &s).unwrap();
        let d_hi = deviation_with_stats(&ks, hi, CodeClass::Pptp, &s).unwrap();
        assert!(d_lo.upper >= -s.eps_d);
        assert!(d_hi.upper < -s.eps_d);
    }

    #[test]
    fn ns_kappa_squared_is_upsilon() {
        let s = settings();
        for seed in [0u64, 2] {
            let ch = random_channel(3, 2, 3, seed).unwrap();
            let k = kappa(&ch, CodeClass::Ns, &s).unwrap().kappa;
            let u = upsilon(&ch.kraus_support(s.rank_tol).unwrap(), &s).unwrap().upsilon;
            assert!((k * k - u).abs() <= 1e-3, "seed {seed}: {} vs {u}", k * k);
        }
    }

    #[test]
    fn depends_only_on_the_unitary_set() {
        let s = settings();
        let x = Matrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let us = [Matrix::identity(2), x];
        let a = kappa(&mixed_unitary(&us, &[0.5, 0.5]).unwrap(), CodeClass::Pptp, &s).unwrap();
        let b = kappa(&mixed_unitary(&us, &[0.8, 0.2]).unwrap(), CodeClass::Pptp, &s).unwrap();
        assert!((a.kappa - b.kappa).abs() <= 2.0 * s.kappa_tol, "{} vs {}", a.kappa, b.kappa);
    }

    #[test]
    fn scan_is_zero_then_negative() {
        let s = settings();
        let ks = werner_holevo(3).unwrap().kraus_support(s.rank_tol).unwrap();
        let scan = deviation_scan(&ks, CodeClass::Pptp, &[1.0, 1.5, 1.8, 2.5], &s).unwrap();
        assert!(scan[0].1 >= -1e-9 && scan[1].1 >= -1e-7);
        assert!(scan[2].1 < -1e-4 && scan[3].1 < scan[2].1);
    }

    #[test]
    fn activated_examples() {
        let s = settings();
        let i2 = identity_channel(2).unwrap();
        assert!((kappa_activated(&i2, 3, &s).unwrap() - 2.0).abs() <= 1e-9);
        assert!(matches!(kappa_activated(&werner_holevo(3).unwrap(), 5, &s), Err(ModelError::ScaleGuard(15))));
        assert!(kappa_activated(&i2, 1, &s).is_err());
    }

    #[test]
    fn tensoring_with_a_qubit_doubles_pptp_kappa() {
        let s = settings();
        let n = nr_channel(0.2).unwrap();
        let single = kappa(&n, CodeClass::Pptp, &s).unwrap().kappa;
        let joint = kappa(&n.tensor(&identity_channel(2).unwrap()), CodeClass::Pptp, &s).unwrap().kappa;
        assert!((joint - 2.0 * single).abs() <= 1e-3, "{joint} vs 2 x {single}");
    }

    #[test]
    fn rejects_bad_tolerance() {
        let mut s = settings();
        s.kappa_tol = 0.0;
        assert!(kappa(&identity_channel(2).unwrap(), CodeClass::Ns, &s).is_err());
    }
}
