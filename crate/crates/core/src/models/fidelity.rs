use crate::channels::{KrausSupport, QuantumChannel};
use crate::linalg::{BipartiteShape, Matrix, Subsystem};
use crate::sdp::{Affine, Field, Program, SdpError, Sense, VarMatrix};

use super::gamma::gamma_value;
use super::{field_for, run, CodeClass, ModelError, ModelSettings, SolveSide, SolveStats};

#[derive(Debug, Clone)]
pub struct FidelityDual {
    pub mu: f64,
    pub s_b: Option<Matrix>,
    pub x: Matrix,
    pub y: Option<Matrix>,
    pub v: Option<Matrix>,
}

#[derive(Debug, Clone)]
pub struct FidelityResult {
    pub value: f64,
    pub w: Matrix,
    pub rho: Matrix,
    pub dual_value: Option<f64>,
    pub dual_vars: Option<FidelityDual>,
    pub stats: SolveStats,
}

pub(crate) struct CodeSet {
    pub prog: Program,
    pub w: VarMatrix,
    pub rho: VarMatrix,
}

/// Feasible set shared by the fidelity and deviation programs:
/// `0 ⪯ W ⪯ ρ⊗1`, `tr ρ = 1`, plus the code-class constraints.
pub(crate) fn code_set(field: Field, shape: BipartiteShape, k: f64, code: CodeClass) -> Result<CodeSet, SdpError> {
    let mut prog = Program::new(field);
    let w = prog.hermitian("W", shape.side());
    let rho = prog.hermitian("rho", shape.da);
    let rho_1 = rho.expr().kron_identity(shape.db);
    prog.psd("W", w.expr())?;
    prog.psd("rho x 1 - W", rho_1.sub(&w.expr()))?;
    prog.equal("tr rho = 1", &rho.expr().trace(), 1.0);
    if code.has_pptp() {
        let wt = w.expr().partial_transpose(shape, Subsystem::B);
        let bound = rho_1.scale(1.0 / k);
        prog.psd("rho x 1 / k - W^TB", bound.sub(&wt))?;
        prog.psd("rho x 1 / k + W^TB", bound.add(&wt))?;
    }
    if code.has_ns() {
        let target = Matrix::identity(shape.db).scale(1.0 / (k * k));
        prog.equal_matrix("tr_A W = 1/k^2", &w.expr().partial_trace(shape, Subsystem::A), &target)?;
    }
    Ok(CodeSet { prog, w, rho })
}

fn check_k(k: f64) -> Result<(), ModelError> {
    if k.is_finite() && k >= 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidArgument(format!("code size k must be >= 1, got {k}")))
    }
}

fn sdp_err(label: &str) -> impl Fn(SdpError) -> ModelError + '_ {
    move |source| ModelError::Sdp {
        label: label.to_string(),
        source,
    }
}

/// At `k = 1` with the no-signalling constraint the feasible set is the
/// single face `W = ρ⊗1`, which has no interior; the value is exactly 1.
fn trivial_k1(ch: &QuantumChannel, code: CodeClass) -> FidelityResult {
    let shape = ch.shape();
    let rho = Matrix::identity(shape.da).scale(1.0 / shape.da as f64);
    let w = crate::linalg::kron(&rho, &Matrix::identity(shape.db));
    let dual = FidelityDual {
        mu: 1.0,
        s_b: code.has_ns().then(|| Matrix::zeros(shape.db, shape.db)),
        x: ch.choi().matrix,
        y: code.has_pptp().then(|| Matrix::zeros(shape.side(), shape.side())),
        v: code.has_pptp().then(|| Matrix::zeros(shape.side(), shape.side())),
    };
    FidelityResult {
        value: 1.0,
        w,
        rho,
        dual_value: Some(1.0),
        dual_vars: Some(dual),
        stats: SolveStats::default(),
    }
}

/// Optimal entanglement fidelity `F^Ω(N, k)` for sending a `k`-dimensional
/// system through `ch` with codes of class `code`.
pub fn fidelity(
    ch: &QuantumChannel,
    k: f64,
    code: CodeClass,
    side: SolveSide,
    s: &ModelSettings,
) -> Result<FidelityResult, ModelError> {
    check_k(k)?;
    if k == 1.0 && code.has_ns() {
        return Ok(trivial_k1(ch, code));
    }
    match side {
        SolveSide::Primal => fidelity_primal(ch, k, code, s),
        SolveSide::Dual => fidelity_dual(ch, k, code, s),
        SolveSide::Both => {
            let mut primal = fidelity_primal(ch, k, code, s)?;
            let dual = fidelity_dual(ch, k, code, s)?;
            primal.dual_value = dual.dual_value;
            primal.dual_vars = dual.dual_vars;
            primal.stats.merge(dual.stats);
            Ok(primal)
        }
    }
}

fn fidelity_primal(ch: &QuantumChannel, k: f64, code: CodeClass, s: &ModelSettings) -> Result<FidelityResult, ModelError> {
    let label = format!("fidelity primal ({}, k={k}, {code})", ch.name());
    let choi = ch.choi();
    let mut set = code_set(field_for(&[&choi.matrix]), choi.shape, k, code).map_err(sdp_err(&label))?;
    set.prog.set_objective(Sense::Maximize, set.w.expr().trace_with(&choi.matrix));
    let sol = run(&set.prog, &label, s)?;
    Ok(FidelityResult {
        value: sol.value,
        w: set.w.value(&sol),
        rho: set.rho.value(&sol),
        dual_value: None,
        dual_vars: None,
        stats: SolveStats::of(&sol),
    })
}

fn fidelity_dual(ch: &QuantumChannel, k: f64, code: CodeClass, s: &ModelSettings) -> Result<FidelityResult, ModelError> {
    let label = format!("fidelity dual ({}, k={k}, {code})", ch.name());
    let choi = ch.choi();
    let shape = choi.shape;
    let n = shape.side();
    let mut prog = Program::new(field_for(&[&choi.matrix]));
    let mu = prog.scalar("mu");
    let x = prog.hermitian("X", n);
    prog.psd("X", x.expr()).map_err(sdp_err(&label))?;
    let mut lhs = x.expr().sub(&Affine::constant(&choi.matrix));
    let mut traced = x.expr();
    let mut objective = mu.clone();
    let mut yv = None;
    if code.has_pptp() {
        let y = prog.hermitian("Y", n);
        let v = prog.hermitian("V", n);
        prog.psd("Y", y.expr()).map_err(sdp_err(&label))?;
        prog.psd("V", v.expr()).map_err(sdp_err(&label))?;
        lhs = lhs.sub(&y.expr().sub(&v.expr()).partial_transpose(shape, Subsystem::B));
        traced = traced.add(&y.expr().add(&v.expr()).scale(1.0 / k));
        yv = Some((y, v));
    }
    let mut s_b = None;
    if code.has_ns() {
        let sv = prog.hermitian("S_B", shape.db);
        lhs = lhs.add(&sv.expr().identity_kron(shape.da));
        objective = objective.add(&sv.expr().trace().scale(1.0 / (k * k)));
        s_b = Some(sv);
    }
    let coupling = prog.num_lmis();
    prog.psd("X + 1 x S_B - J - (Y - V)^TB", lhs).map_err(sdp_err(&label))?;
    let rho_lmi = prog.num_lmis();
    let rhs = Affine::identity_times(&mu, shape.da).sub(&traced.partial_trace(shape, Subsystem::B));
    prog.psd("mu 1 - tr_B(X + (Y + V)/k)", rhs).map_err(sdp_err(&label))?;
    prog.set_objective(Sense::Minimize, objective);
    let sol = run(&prog, &label, s)?;
    let dual = FidelityDual {
        mu: sol.scalar(&mu),
        s_b: s_b.map(|v| v.value(&sol)),
        x: x.value(&sol),
        y: yv.as_ref().map(|(y, _)| y.value(&sol)),
        v: yv.as_ref().map(|(_, v)| v.value(&sol)),
    };
    Ok(FidelityResult {
        value: sol.value,
        w: sol.multipliers[coupling].clone(),
        rho: sol.multipliers[rho_lmi].clone(),
        dual_value: Some(sol.value),
        dual_vars: Some(dual),
        stats: SolveStats::of(&sol),
    })
}

/// `D^Ω(K, k) = max tr P(W − ρ⊗1)` over the code feasible set, where `P`
/// projects onto the support of the Choi matrix. It is zero exactly when
/// `F^Ω(N, k) = 1` for every channel with Kraus span `K`.
pub fn deviation(ks: &KrausSupport, k: f64, code: CodeClass, s: &ModelSettings) -> Result<f64, ModelError> {
    deviation_with_stats(ks, k, code, s).map(|d| d.value)
}

/// Deviation value with the certified upper bound from the multipliers.
pub(crate) struct Deviation {
    pub value: f64,
    pub upper: f64,
    pub stats: SolveStats,
}

pub(crate) fn deviation_with_stats(
    ks: &KrausSupport,
    k: f64,
    code: CodeClass,
    s: &ModelSettings,
) -> Result<Deviation, ModelError> {
    check_k(k)?;
    if k == 1.0 {
        return Ok(Deviation {
            value: 0.0,
            upper: 0.0,
            stats: SolveStats::default(),
        });
    }
    let label = format!("deviation (k={k}, {code})");
    // The zero test needs the value resolved well below eps_d.
    let mut s = *s;
    s.solver.tol_gap = s.solver.tol_gap.min(0.1 * s.eps_d);
    s.solver.tol_feas = s.solver.tol_feas.min(0.1 * s.eps_d);
    let s = &s;
    let p = &ks.projector;
    let mut set = code_set(field_for(&[p]), ks.shape, k, code).map_err(sdp_err(&label))?;
    let objective = set
        .w
        .expr()
        .sub(&set.rho.expr().kron_identity(ks.shape.db))
        .trace_with(p);
    set.prog.set_objective(Sense::Maximize, objective);
    let sol = run(&set.prog, &label, s)?;
    Ok(Deviation {
        value: sol.value,
        upper: sol.bound.max(sol.value),
        stats: SolveStats::of(&sol),
    })
}

/// The three sides of `F(N₁,k)·F(N₂,Γ(N₂)) ≤ F(N₁⊗N₂, kΓ(N₂)) ≤ F(N₁,k)`
/// for PPT-preserving codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaChain {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    pub gamma2: f64,
}

impl LemmaChain {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.mid + tol && self.mid <= self.rhs + tol
    }
}

pub fn lemma1_check(n1: &QuantumChannel, n2: &QuantumChannel, k: f64, s: &ModelSettings) -> Result<LemmaChain, ModelError> {
    let side = n1.shape().side() * n2.shape().side();
    if side > 36 {
        return Err(ModelError::InvalidArgument(format!("joint Choi side {side} exceeds 36")));
    }
    let gamma2 = gamma_value(n2, s)?.0;
    let f = |ch: &QuantumChannel, k: f64| fidelity(ch, k, CodeClass::Pptp, SolveSide::Primal, s).map(|r| r.value);
    let rhs = f(n1, k)?;
    let f2 = f(n2, gamma2.max(1.0))?;
    let mid = f(&n1.tensor(n2), k * gamma2.max(1.0))?;
    Ok(LemmaChain {
        lhs: rhs * f2,
        mid,
        rhs,
        gamma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{identity_channel, random_channel, werner_holevo};
    use crate::linalg::{kron, max_entangled, partial_transpose};
    use crate::models::testutil::{min_eig, settings};

    #[test]
    fn k_one_is_perfect_for_every_code() {
        let s = settings();
        let ch = random_channel(2, 2, 2, 3).unwrap();
        for code in CodeClass::ALL {
            let r = fidelity(&ch, 1.0, code, SolveSide::Primal, &s).unwrap();
            assert!((r.value - 1.0).abs() <= 1e-7, "{code}: {}", r.value);
        }
    }

    #[test]
    fn werner_witness_is_feasible_and_optimal() {
        let d = 3;
        let k = 5.0 / 3.0;
        let shape = BipartiteShape::new(d, d);
        let rho = Matrix::identity(d).scale(1.0 / d as f64);
        let wt = &Matrix::identity(d * d).scale(1.0 / 5.0) - &max_entangled(d).scale(2.0 / 15.0);
        let w = partial_transpose(&wt, shape, Subsystem::B).unwrap();
        let rho_1 = kron(&rho, &Matrix::identity(d));
        assert!(min_eig(&w) >= -1e-9);
        assert!(min_eig(&(&rho_1 - &w)) >= -1e-9);
        assert!(min_eig(&(&rho_1.scale(1.0 / k) - &wt)) >= -1e-9);
        assert!(min_eig(&(&rho_1.scale(1.0 / k) + &wt)) >= -1e-9);
        let ch = werner_holevo(d).unwrap();
        let value = ch.choi().matrix.inner(&w).re;
        assert!((value - 1.0).abs() <= 1e-9, "{value}");

        let r = fidelity(&ch, k, CodeClass::Pptp, SolveSide::Both, &settings()).unwrap();
        assert!(r.value >= 1.0 - 1e-6, "{}", r.value);
        assert!((r.value - r.dual_value.unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn identity_cannot_carry_more_than_its_dimension() {
        let ch = identity_channel(2).unwrap();
        let r = fidelity(&ch, 3.0, CodeClass::Pptp, SolveSide::Primal, &settings()).unwrap();
        assert!(r.value < 1.0 - 1e-3, "{}", r.value);
    }

    #[test]
    fn primal_point_is_feasible() {
        let ch = random_channel(2, 2, 2, 5).unwrap();
        let k = 1.4;
        let r = fidelity(&ch, k, CodeClass::NsPptp, SolveSide::Primal, &settings()).unwrap();
        let shape = ch.shape();
        let rho_1 = kron(&r.rho, &Matrix::identity(shape.db));
        let wt = partial_transpose(&r.w, shape, Subsystem::B).unwrap();
        assert!((r.rho.trace().re - 1.0).abs() <= 1e-8);
        assert!(min_eig(&r.w) >= -1e-7);
        assert!(min_eig(&(&rho_1 - &r.w)) >= -1e-7);
        assert!(min_eig(&(&rho_1.scale(1.0 / k) - &wt)) >= -1e-7);
        assert!(min_eig(&(&rho_1.scale(1.0 / k) + &wt)) >= -1e-7);
        let marginal = crate::linalg::partial_trace(&r.w, shape, Subsystem::A).unwrap();
        assert!(marginal.max_abs_diff(&Matrix::identity(shape.db).scale(1.0 / (k * k))) <= 1e-7);
        assert!((ch.choi().matrix.inner(&r.w).re - r.value).abs() <= 1e-7);
    }

    #[test]
    fn joint_code_class_is_most_restrictive() {
        let s = settings();
        let ch = random_channel(2, 2, 2, 11).unwrap();
        let f = |code| fidelity(&ch, 1.5, code, SolveSide::Primal, &s).unwrap().value;
        let (ns, pptp, both) = (f(CodeClass::Ns), f(CodeClass::Pptp), f(CodeClass::NsPptp));
        assert!(both <= ns.min(pptp) + 1e-7, "{both} {ns} {pptp}");
        for v in [ns, pptp, both] {
            assert!((0.0..=1.0 + 1e-7).contains(&v));
        }
    }

    #[test]
    fn pptp_fidelity_decreases_in_k() {
        let s = settings();
        let ch = random_channel(2, 2, 3, 2).unwrap();
        let values: Vec<f64> = [1.0, 1.3, 1.6, 2.0]
            .iter()
            .map(|&k| fidelity(&ch, k, CodeClass::Pptp, SolveSide::Primal, &s).unwrap().value)
            .collect();
        for pair in values.windows(2) {
            assert!(pair[0] >= pair[1] - 1e-7, "{values:?}");
        }
    }

    #[test]
    fn pptp_strong_duality_on_random_channels() {
        let s = settings();
        for seed in 0..3 {
            let ch = random_channel(2, 2, 2, seed).unwrap();
            let r = fidelity(&ch, 1.7, CodeClass::Pptp, SolveSide::Both, &s).unwrap();
            assert!((r.value - r.dual_value.unwrap()).abs() <= 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn dual_side_recovers_a_primal_point() {
        let ch = random_channel(2, 2, 2, 4).unwrap();
        let primal = fidelity(&ch, 1.5, CodeClass::Pptp, SolveSide::Primal, &settings()).unwrap();
        let dual = fidelity(&ch, 1.5, CodeClass::Pptp, SolveSide::Dual, &settings()).unwrap();
        assert!((dual.rho.trace().re - 1.0).abs() <= 1e-6);
        assert!((ch.choi().matrix.inner(&dual.w).re - primal.value).abs() <= 1e-6);
    }

    #[test]
    fn deviation_examples() {
        let s = settings();
        let ks = identity_channel(2).unwrap().kraus_support(1e-7).unwrap();
        for code in CodeClass::ALL {
            assert!(deviation(&ks, 2.0, code, &s).unwrap() >= -1e-9, "{code}");
        }
        let ks = random_channel(2, 3, 2, 1).unwrap().kraus_support(1e-7).unwrap();
        assert_eq!(deviation(&ks, 1.0, CodeClass::Ns, &s).unwrap(), 0.0);
        let ks = werner_holevo(3).unwrap().kraus_support(1e-7).unwrap();
        let d = deviation(&ks, 1.8, CodeClass::Pptp, &s).unwrap();
        assert!(d < -1e-4 && d <= 1e-9, "{d}");
    }

    #[test]
    fn fidelity_one_iff_deviation_zero() {
        let s = settings();
        let ch = random_channel(3, 2, 3, 0).unwrap();
        let ks = ch.kraus_support(s.rank_tol).unwrap();
        for code in [CodeClass::Ns, CodeClass::Pptp] {
            for k in [1.2, 1.5] {
                let f = fidelity(&ch, k, code, SolveSide::Primal, &s).unwrap().value;
                let d = deviation(&ks, k, code, &s).unwrap();
                assert_eq!(f >= 1.0 - 1e-6, d >= -1e-6, "{code} k={k}: F={f} D={d}");
            }
        }
    }

    #[test]
    fn lemma_chain_examples() {
        let s = settings();
        let i2 = identity_channel(2).unwrap();
        let c = lemma1_check(&i2, &i2, 2.0, &s).unwrap();
        for v in [c.lhs, c.mid, c.rhs] {
            assert!((v - 1.0).abs() <= 1e-6, "{c:?}");
        }
        let n1 = random_channel(2, 2, 2, 7).unwrap();
        let c = lemma1_check(&n1, &i2, 1.5, &s).unwrap();
        assert!(c.holds(1e-6), "{c:?}");
        assert!((c.mid - c.rhs).abs() <= 1e-5, "{c:?}");
        assert!(lemma1_check(&werner_holevo(3).unwrap(), &werner_holevo(3).unwrap(), 1.5, &s).is_err());
    }

    #[test]
    fn rejects_small_k() {
        let ch = identity_channel(2).unwrap();
        assert!(fidelity(&ch, 0.5, CodeClass::Ns, SolveSide::Primal, &settings()).is_err());
        assert!(fidelity(&ch, f64::NAN, CodeClass::Ns, SolveSide::Primal, &settings()).is_err());
    }
}
