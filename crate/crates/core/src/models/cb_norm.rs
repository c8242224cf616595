use crate::channels::QuantumChannel;
use crate::linalg::{partial_transpose, Matrix, Subsystem};
use crate::sdp::{Affine, Program, SdpError, Sense};

use super::{field_for, run, ModelError, ModelSettings, SolveStats};

#[derive(Debug, Clone)]
pub struct CbNormResult {
    pub value: f64,
    /// `log₂ ‖J^{T_B}‖_cb`
    pub q_theta: f64,
    pub x: Matrix,
    pub rho0: Matrix,
    pub rho1: Matrix,
    pub stats: SolveStats,
}

/// Completely bounded trace norm of the map whose Choi matrix is `J^{T_B}`:
/// `max Re tr(J^{T_B} X)  s.t.  [[ρ₀⊗1, X], [X†, ρ₁⊗1]] ⪰ 0`, with unit-trace
/// density operators `ρ₀, ρ₁` and a general complex `X`.
pub fn cb_norm_pt(ch: &QuantumChannel, s: &ModelSettings) -> Result<CbNormResult, ModelError> {
    let label = format!("cb norm ({})", ch.name());
    let wrap = |source: SdpError| ModelError::Sdp {
        label: label.clone(),
        source,
    };
    let choi = ch.choi();
    let shape = choi.shape;
    let jt = partial_transpose(&choi.matrix, shape, Subsystem::B)?;
    let mut prog = Program::new(field_for(&[&jt]));
    let n = shape.side();
    let x = prog.general("X", n, n);
    let rho0 = prog.hermitian("rho0", shape.da);
    let rho1 = prog.hermitian("rho1", shape.da);
    let block = Affine::block2(
        &rho0.expr().kron_identity(shape.db),
        &x.expr(),
        &x.expr().adjoint(),
        &rho1.expr().kron_identity(shape.db),
    );
    prog.psd("[[rho0 x 1, X], [X^*, rho1 x 1]]", block).map_err(wrap)?;
    prog.psd("rho0", rho0.expr()).map_err(wrap)?;
    prog.psd("rho1", rho1.expr()).map_err(wrap)?;
    prog.equal("tr rho0 = 1", &rho0.expr().trace(), 1.0);
    prog.equal("tr rho1 = 1", &rho1.expr().trace(), 1.0);
    prog.set_objective(Sense::Maximize, x.expr().trace_with(&jt));
    let sol = run(&prog, &label, s)?;
    Ok(CbNormResult {
        value: sol.value,
        q_theta: sol.value.log2(),
        x: x.value(&sol),
        rho0: rho0.value(&sol),
        rho1: rho1.value(&sol),
        stats: SolveStats::of(&sol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{identity_channel, nr_channel, random_channel};
    use crate::models::gamma::gamma_value;
    use crate::models::testutil::{min_eig, settings};

    #[test]
    fn identity_value_is_the_dimension() {
        let s = settings();
        for d in [2usize, 3] {
            let r = cb_norm_pt(&identity_channel(d).unwrap(), &s).unwrap();
            assert!((r.value - d as f64).abs() <= 1e-5 * d as f64, "{}", r.value);
            assert!((r.rho0.trace().re - 1.0).abs() <= 1e-8);
            assert!((r.rho1.trace().re - 1.0).abs() <= 1e-8);
            assert!(min_eig(&r.rho0) >= -1e-8 && min_eig(&r.rho1) >= -1e-8);
        }
    }

    #[test]
    fn dominates_gamma() {
        let s = settings();
        let channels = [nr_channel(0.3).unwrap(), random_channel(2, 2, 2, 6).unwrap()];
        for ch in &channels {
            let cb = cb_norm_pt(ch, &s).unwrap().value;
            let g = gamma_value(ch, &s).unwrap().0;
            assert!(cb >= g - 1e-6, "{}: {cb} < {g}", ch.name());
        }
    }

    #[test]
    fn value_is_attained_by_the_returned_point() {
        let ch = random_channel(2, 2, 2, 8).unwrap();
        let r = cb_norm_pt(&ch, &settings()).unwrap();
        let choi = ch.choi();
        let jt = partial_transpose(&choi.matrix, choi.shape, Subsystem::B).unwrap();
        assert!((jt.inner(&r.x.adjoint()).re - r.value).abs() <= 1e-6);
    }
}
