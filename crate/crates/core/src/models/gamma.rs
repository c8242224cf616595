use crate::channels::QuantumChannel;
use crate::linalg::{Matrix, Subsystem};
use crate::sdp::{Affine, Program, SdpError, Sense};

use super::{field_for, run, ModelError, ModelSettings, SolveSide, SolveStats};

#[derive(Debug, Clone)]
pub struct GammaResult {
    pub gamma: f64,
    /// `log₂ Γ`
    pub q_gamma: f64,
    pub r: Matrix,
    pub rho: Matrix,
    pub dual_mu: f64,
    pub dual_y: Matrix,
    pub dual_v: Matrix,
    pub stats: SolveStats,
}

fn wrap(label: &str) -> impl Fn(SdpError) -> ModelError + '_ {
    move |source| ModelError::Sdp {
        label: label.to_string(),
        source,
    }
}

/// `Γ(N) = max tr J R  s.t.  R ⪰ 0, tr ρ = 1, −ρ⊗1 ⪯ R^{T_B} ⪯ ρ⊗1`.
fn primal(ch: &QuantumChannel, s: &ModelSettings) -> Result<GammaResult, ModelError> {
    let label = format!("gamma primal ({})", ch.name());
    let choi = ch.choi();
    let shape = choi.shape;
    let mut prog = Program::new(field_for(&[&choi.matrix]));
    let r = prog.hermitian("R", shape.side());
    let rho = prog.hermitian("rho", shape.da);
    let rho_1 = rho.expr().kron_identity(shape.db);
    let rt = r.expr().partial_transpose(shape, Subsystem::B);
    prog.psd("R", r.expr()).map_err(wrap(&label))?;
    prog.psd("rho x 1 - R^TB", rho_1.sub(&rt)).map_err(wrap(&label))?;
    prog.psd("rho x 1 + R^TB", rho_1.add(&rt)).map_err(wrap(&label))?;
    prog.equal("tr rho = 1", &rho.expr().trace(), 1.0);
    prog.set_objective(Sense::Maximize, r.expr().trace_with(&choi.matrix));
    let sol = run(&prog, &label, s)?;
    Ok(GammaResult {
        gamma: sol.value,
        q_gamma: sol.value.log2(),
        r: r.value(&sol),
        rho: rho.value(&sol),
        dual_mu: sol.bound,
        dual_v: sol.multipliers[1].clone(),
        dual_y: sol.multipliers[2].clone(),
        stats: SolveStats::of(&sol),
    })
}

/// `Γ(N) = min μ  s.t.  Y, V ⪰ 0, (V − Y)^{T_B} ⪰ J, tr_B(V + Y) ⪯ μ1`.
fn dual(ch: &QuantumChannel, s: &ModelSettings) -> Result<GammaResult, ModelError> {
    let label = format!("gamma dual ({})", ch.name());
    let choi = ch.choi();
    let shape = choi.shape;
    let mut prog = Program::new(field_for(&[&choi.matrix]));
    let mu = prog.scalar("mu");
    let y = prog.hermitian("Y", shape.side());
    let v = prog.hermitian("V", shape.side());
    prog.psd("Y", y.expr()).map_err(wrap(&label))?;
    prog.psd("V", v.expr()).map_err(wrap(&label))?;
    let coupling = v.expr().sub(&y.expr()).partial_transpose(shape, Subsystem::B).sub(&Affine::constant(&choi.matrix));
    prog.psd("(V - Y)^TB - J", coupling).map_err(wrap(&label))?;
    let traced = v.expr().add(&y.expr()).partial_trace(shape, Subsystem::B);
    prog.psd("mu 1 - tr_B(V + Y)", Affine::identity_times(&mu, shape.da).sub(&traced))
        .map_err(wrap(&label))?;
    prog.set_objective(Sense::Minimize, mu.clone());
    let sol = run(&prog, &label, s)?;
    Ok(GammaResult {
        gamma: sol.value,
        q_gamma: sol.value.log2(),
        r: sol.multipliers[2].clone(),
        rho: sol.multipliers[3].clone(),
        dual_mu: sol.scalar(&mu),
        dual_y: y.value(&sol),
        dual_v: v.value(&sol),
        stats: SolveStats::of(&sol),
    })
}

pub fn gamma(ch: &QuantumChannel, side: SolveSide, s: &ModelSettings) -> Result<GammaResult, ModelError> {
    match side {
        SolveSide::Primal => primal(ch, s),
        SolveSide::Dual => dual(ch, s),
        SolveSide::Both => {
            let mut p = primal(ch, s)?;
            let d = dual(ch, s)?;
            p.dual_mu = d.dual_mu;
            p.dual_y = d.dual_y;
            p.dual_v = d.dual_v;
            p.stats.merge(d.stats);
            Ok(p)
        }
    }
}

pub(crate) fn gamma_value(ch: &QuantumChannel, s: &ModelSettings) -> Result<(f64, SolveStats), ModelError> {
    primal(ch, s).map(|r| (r.gamma, r.stats))
}

/// `Q_Γ(a) + Q_Γ(b)`, an upper bound on the quantum capacity of `a ⊗ b`
/// even with PPT-preserving assistance.
pub fn superactivation_bound(a: &QuantumChannel, b: &QuantumChannel, s: &ModelSettings) -> Result<f64, ModelError> {
    Ok(gamma_value(a, s)?.0.log2() + gamma_value(b, s)?.0.log2())
}
