use crate::channels::KrausSupport;
use crate::linalg::{kron, Matrix, Subsystem};
use crate::sdp::{Program, SdpError, Sense};

use super::{field_for, run, ModelError, ModelSettings, SolveStats};

#[derive(Debug, Clone)]
pub struct UpsilonResult {
    pub upsilon: f64,
    pub u: Matrix,
    pub s: Matrix,
    /// `√Υ`, the no-signalling κ of the graph.
    pub kappa_ns: f64,
    /// `tr P(S⊗1 − U)` at the returned point.
    pub support_violation: f64,
    pub stats: SolveStats,
}

/// `Υ(K) = max tr S  s.t.  0 ⪯ U ⪯ S⊗1, tr_A U = 1_B, tr P(S⊗1 − U) = 0`.
///
/// Since `S⊗1 − U ⪰ 0`, the trace condition says it lives on the complement
/// of the support of `P`, so it is written as `Q Z Q†` with `Z ⪰ 0` and `Q` an
/// orthonormal basis of that complement.
pub fn upsilon(ks: &KrausSupport, s: &ModelSettings) -> Result<UpsilonResult, ModelError> {
    let label = "upsilon";
    let wrap = |source: SdpError| ModelError::Sdp {
        label: label.to_string(),
        source,
    };
    let shape = ks.shape;
    let q = &ks.complement;
    let mut prog = Program::new(field_for(&[&ks.projector, q]));
    let sv = prog.hermitian("S", shape.da);
    let mut u = sv.expr().kron_identity(shape.db);
    if q.cols() > 0 {
        let z = prog.hermitian("Z", q.cols());
        prog.psd("Z", z.expr()).map_err(wrap)?;
        u = u.sub(&z.expr().congruence(q));
    }
    prog.psd("U", u.clone()).map_err(wrap)?;
    prog.equal_matrix("tr_A U = 1", &u.partial_trace(shape, Subsystem::A), &Matrix::identity(shape.db))
        .map_err(wrap)?;
    prog.set_objective(Sense::Maximize, sv.expr().trace());
    let sol = run(&prog, label, s)?;

    let s_val = sv.value(&sol);
    let u_val = sol.eval(&u);
    let slack = &kron(&s_val, &Matrix::identity(shape.db)) - &u_val;
    let violation = ks.projector.matmul(&slack).trace().re.abs();
    if violation > 10.0 * s.eps_d {
        return Err(ModelError::SupportViolation(violation));
    }
    Ok(UpsilonResult {
        upsilon: sol.value,
        u: u_val,
        s: s_val,
        kappa_ns: sol.value.max(0.0).sqrt(),
        support_violation: violation,
        stats: SolveStats::of(&sol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{identity_channel, random_channel};
    use crate::linalg::{max_entangled, partial_trace};
    use crate::models::testutil::{min_eig, settings};

    #[test]
    fn identity_graph_hand_witness() {
        let s = settings();
        for d in [2usize, 3] {
            let ks = identity_channel(d).unwrap().kraus_support(1e-7).unwrap();
            let df = d as f64;
            let u = max_entangled(d);
            let sa = Matrix::identity(d).scale(df);
            let slack = &kron(&sa, &Matrix::identity(d)) - &u;
            assert!(min_eig(&u) >= -1e-12 && min_eig(&slack) >= -1e-12);
            let marginal = partial_trace(&u, ks.shape, Subsystem::A).unwrap();
            assert!(marginal.max_abs_diff(&Matrix::identity(d)) <= 1e-12);
            assert!(ks.projector.matmul(&slack).trace().norm() <= 1e-12);
            assert!((sa.trace().re - df * df).abs() <= 1e-12);

            let r = upsilon(&ks, &s).unwrap();
            assert!((r.upsilon - df * df).abs() <= 1e-5 * df * df, "{}", r.upsilon);
            assert!((r.kappa_ns - df).abs() <= 1e-5 * df);
        }
    }

    #[test]
    fn at_least_one_and_consistent() {
        let s = settings();
        for seed in 0..3 {
            let ks = random_channel(2, 2, 2, seed).unwrap().kraus_support(1e-7).unwrap();
            let r = upsilon(&ks, &s).unwrap();
            assert!(r.upsilon >= 1.0 - 1e-6);
            assert!((r.kappa_ns * r.kappa_ns - r.upsilon).abs() <= 1e-12);
            assert!(r.support_violation <= 10.0 * s.eps_d);
            assert!((r.s.trace().re - r.upsilon).abs() <= 1e-7);
        }
    }
}
