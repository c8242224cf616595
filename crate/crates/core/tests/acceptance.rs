//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stderr (uncaptured) and the test fails if any criterion fails.
//!
//! Set `QCAP_UPDATE_GOLDEN=1` to rewrite the golden sweep file.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcap::bounds::{nr_grid, read_csv, sweep, write_csv, BoundId, Family};
use qcap::channels::{
    erasure_channel, identity_channel, mixed_unitary, nr_channel, random_channel, werner_holevo, QuantumChannel,
};
use qcap::linalg::{
    hermitian_eig, max_entangled, partial_trace, partial_transpose, positive_negative_parts, swap,
    BipartiteShape, HermitianTol, Matrix, Subsystem,
};
use qcap::models::{
    cb_norm_pt, deviation, fidelity, gamma, kappa, kappa_activated, lemma1_check, upsilon, CodeClass, ModelSettings,
    SolveSide,
};
use qcap::sdp::{solve, BlockMatrix, SdpProblem, SolveStatus, SolverSettings, SparseSymmetric};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn settings() -> ModelSettings {
    ModelSettings::default()
}

fn min_eig(m: &Matrix) -> f64 {
    hermitian_eig(&m.hermitian_part(), HermitianTol(1e-6)).unwrap().values[0]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Seeded channel whose Choi side is at most 6, so that any pair has joint
/// side at most 36.
fn seeded_channel(rng: &mut ChaCha8Rng) -> QuantumChannel {
    const SHAPES: [(usize, usize, usize); 4] = [(2, 2, 2), (2, 2, 3), (2, 3, 2), (3, 2, 3)];
    let (din, dout, rank) = SHAPES[rng.random_range(0..SHAPES.len())];
    let seed: u64 = rng.random();
    random_channel(din, dout, rank, seed).unwrap()
}

fn werner_anchor() -> Outcome {
    let start = Instant::now();
    let s = settings();
    let mut found = Vec::new();
    for d in [3usize, 4, 5] {
        let k = kappa(&werner_holevo(d).unwrap(), CodeClass::Pptp, &s).map_err(|e| e.to_string())?;
        let expect = (d as f64 + 2.0) / d as f64;
        ensure((k.kappa - expect).abs() <= 1e-3, || format!("kappa(W_{d}) = {} vs {expect}", k.kappa))?;
        found.push(format!("W_{d} {:.6}", k.kappa));
    }
    // The explicit witness: ρ = 1/3, W^{T_B} = 1/5 − (2/15)Φ.
    let d = 3;
    let k = 5.0 / 3.0;
    let shape = BipartiteShape::new(d, d);
    let ch = werner_holevo(d).unwrap();
    let rho_1 = Matrix::identity(d * d).scale(1.0 / 3.0);
    let wt = &Matrix::identity(d * d).scale(0.2) - &max_entangled(d).scale(2.0 / 15.0);
    let w = partial_transpose(&wt, shape, Subsystem::B).unwrap();
    let worst = [
        min_eig(&w),
        min_eig(&(&rho_1 - &w)),
        min_eig(&(&rho_1.scale(1.0 / k) - &wt)),
        min_eig(&(&rho_1.scale(1.0 / k) + &wt)),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    ensure(worst >= -1e-9, || format!("witness violates a constraint by {worst:e}"))?;
    let witness_value = ch.choi().matrix.inner(&w).re;
    ensure((witness_value - 1.0).abs() <= 1e-9, || format!("witness value {witness_value}"))?;
    let f = fidelity(&ch, k, CodeClass::Pptp, SolveSide::Primal, &s).map_err(|e| e.to_string())?;
    ensure(f.value >= 1.0 - 1e-6, || format!("F(W_3, 5/3) = {}", f.value))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{}; witness feasible to {:.1e}; F(W_3,5/3) = {:.9}; {secs:.1}s", found.join(", "), -worst.min(0.0), f.value))
}

fn identity_anchors() -> Outcome {
    let s = settings();
    let mut worst: f64 = 0.0;
    for d in [2usize, 3] {
        let df = d as f64;
        let ch = identity_channel(d).unwrap();
        let shape = ch.shape();
        let j = ch.choi().matrix;
        // Matched primal/dual pair for Γ, both worth d.
        let rho_1 = Matrix::identity(d * d).scale(1.0 / df);
        let r = max_entangled(d).scale(1.0 / df);
        let rt = partial_transpose(&r, shape, Subsystem::B).unwrap();
        let (v, y) = positive_negative_parts(&swap(d)).unwrap();
        let coupling = &partial_transpose(&(&v - &y), shape, Subsystem::B).unwrap() - &j;
        let traced = partial_trace(&(&v + &y), shape, Subsystem::B).unwrap();
        let checks = [
            min_eig(&r),
            min_eig(&(&rho_1 - &rt)),
            min_eig(&(&rho_1 + &rt)),
            min_eig(&y),
            min_eig(&v),
            min_eig(&coupling),
            min_eig(&(&Matrix::identity(d).scale(df) - &traced)),
        ];
        ensure(checks.iter().all(|&e| e >= -1e-12), || format!("hand certificate infeasible for d={d}"))?;
        ensure((j.inner(&r).re - df).abs() <= 1e-12, || "primal witness value".into())?;

        let g = gamma(&ch, SolveSide::Both, &s).map_err(|e| e.to_string())?;
        let cb = cb_norm_pt(&ch, &s).map_err(|e| e.to_string())?;
        let ups = upsilon(&ch.kraus_support(s.rank_tol).unwrap(), &s).map_err(|e| e.to_string())?;
        let mut errs = vec![
            ("gamma", rel(g.gamma, df)),
            ("gamma dual", rel(g.dual_mu, df)),
            ("cb", rel(cb.value, df)),
            ("upsilon", rel(ups.upsilon, df * df)),
        ];
        for code in CodeClass::ALL {
            let k = kappa(&ch, code, &s).map_err(|e| e.to_string())?;
            errs.push(("kappa", rel(k.kappa, df)));
        }
        for (what, e) in errs {
            ensure(e <= 1e-5, || format!("{what}(I_{d}) relative error {e:e}"))?;
            worst = worst.max(e);
        }
    }
    Ok(format!("d = 2, 3: gamma, cb, kappa (3 codes), upsilon; worst relative error {worst:.1e}"))
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/nr_sweep.csv")
}

fn fig1_structure() -> Outcome {
    let start = Instant::now();
    let ids = [BoundId::QGamma, BoundId::QTheta];
    let rows = sweep(Family::Nr, &nr_grid(), &ids, &settings()).map_err(|e| e.to_string())?;
    ensure(rows.len() == 11, || format!("{} rows", rows.len()))?;
    let mut max_gap = f64::NEG_INFINITY;
    let mut at = 0.0;
    for row in &rows {
        let (g, t) = (row.values[&BoundId::QGamma], row.values[&BoundId::QTheta]);
        ensure(g <= t + 1e-6, || format!("qGamma {g} > qTheta {t} at r = {}", row.parameter))?;
        if t - g > max_gap {
            max_gap = t - g;
            at = row.parameter;
        }
    }
    ensure(max_gap > 0.01, || format!("largest gap {max_gap}"))?;

    let mut csv = Vec::new();
    write_csv(&rows, &ids, &mut csv).unwrap();
    let path = golden_path();
    let golden_note = if std::env::var_os("QCAP_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &csv).unwrap();
        "golden rewritten".to_string()
    } else {
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let (gids, golden) = read_csv(&text).map_err(|e| e.to_string())?;
        ensure(gids == ids, || "golden header differs".into())?;
        ensure(golden.len() == rows.len(), || "golden row count differs".into())?;
        let mut dev: f64 = 0.0;
        for (a, b) in rows.iter().zip(&golden) {
            ensure(a.parameter == b.parameter, || "golden grid differs".into())?;
            for id in ids {
                dev = dev.max((a.values[&id] - b.values[&id]).abs());
            }
        }
        ensure(dev <= 1e-6, || format!("golden deviation {dev:e}"))?;
        format!("golden max deviation {dev:.1e}")
    };
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    Ok(format!("11 points, qGamma <= qTheta everywhere, largest gap {max_gap:.4} at r = {at}; {golden_note}; {secs:.1}s"))
}

fn erasure_remark() -> Outcome {
    let s = settings();
    let mut values = Vec::new();
    for d in [2usize, 3, 4] {
        let ch = erasure_channel(d, 0.5).unwrap();
        let q = gamma(&ch, SolveSide::Both, &s).map_err(|e| e.to_string())?.q_gamma;
        // Closed form Γ = (1−p)d + p, certified by a matched primal/dual pair.
        let oracle = ((d as f64 + 1.0) / 2.0).log2();
        ensure((q - oracle).abs() <= 1e-6, || format!("d={d}: {q} vs closed form {oracle}"))?;
        values.push((d, q));
    }
    let listing: Vec<String> = values.iter().map(|(d, q)| format!("d={d}: {q:.4}")).collect();
    match values.iter().find(|(_, q)| (q - 1.123).abs() <= 0.01) {
        Some((d, _)) => Ok(format!("{}; 1.123 reproduced at d = {d}", listing.join(", "))),
        None => Ok(format!(
            "{}; no d in {{2,3,4}} gives 1.123 within 0.01 (values equal log2((d+1)/2)); discrepancy reported",
            listing.join(", ")
        )),
    }
}

fn additivity() -> Outcome {
    let s = settings();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs: Vec<(QuantumChannel, QuantumChannel)> =
        (0..20).map(|_| (seeded_channel(&mut rng), seeded_channel(&mut rng))).collect();
    pairs.push((werner_holevo(3).unwrap(), identity_channel(2).unwrap()));
    pairs.push((nr_channel(0.1).unwrap(), nr_channel(0.35).unwrap()));
    pairs.push((nr_channel(0.5).unwrap(), nr_channel(0.0).unwrap()));
    let mut worst: f64 = 0.0;
    for (a, b) in &pairs {
        let side = a.shape().side() * b.shape().side();
        ensure(side <= 36, || format!("joint side {side}"))?;
        let g = |c: &QuantumChannel| gamma(c, SolveSide::Primal, &s).map(|r| r.gamma).map_err(|e| e.to_string());
        let (ga, gb, gab) = (g(a)?, g(b)?, g(&a.tensor(b))?);
        let e = (gab - ga * gb).abs() / (ga * gb);
        ensure(e <= 1e-5, || format!("{} x {}: relative error {e:e}", a.name(), b.name()))?;
        worst = worst.max(e);
    }
    Ok(format!("{} pairs, worst relative error {worst:.1e}", pairs.len()))
}

fn propositions() -> Outcome {
    let s = settings();
    let i2 = identity_channel(2).unwrap();
    let channels = [nr_channel(0.1).unwrap(), nr_channel(0.3).unwrap(), random_channel(2, 2, 2, 17).unwrap()];
    let mut worst: f64 = 0.0;
    for ch in &channels {
        let joint = ch.tensor(&i2);
        for k in [1.0, 1.2, 1.5] {
            let f1 = fidelity(ch, k, CodeClass::Pptp, SolveSide::Primal, &s).map_err(|e| e.to_string())?.value;
            let f2 = fidelity(&joint, 2.0 * k, CodeClass::Pptp, SolveSide::Primal, &s)
                .map_err(|e| e.to_string())?
                .value;
            ensure((f1 - f2).abs() <= 1e-5, || format!("{} at k={k}: {f1} vs {f2}", ch.name()))?;
            worst = worst.max((f1 - f2).abs());
        }
    }
    let w3 = werner_holevo(3).unwrap();
    let ka = kappa_activated(&w3, 3, &s).map_err(|e| e.to_string())?;
    let k = kappa(&w3, CodeClass::Pptp, &s).map_err(|e| e.to_string())?.kappa;
    ensure((ka - k).abs() <= 1e-3, || format!("kappa_activated {ka} vs kappa {k}"))?;
    Ok(format!("fidelity identity worst {worst:.1e}; kappa_a(W_3) = {ka:.6}, kappa(W_3) = {k:.6}"))
}

fn theorems_1_and_2() -> Outcome {
    let s = settings();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let channels: Vec<QuantumChannel> = (0..10).map(|_| seeded_channel(&mut rng)).collect();
    let mut agree = 0;
    let mut ones = 0;
    let mut worst2: f64 = 0.0;
    for ch in &channels {
        let ks = ch.kraus_support(s.rank_tol).unwrap();
        let k_ns = kappa(ch, CodeClass::Ns, &s).map_err(|e| e.to_string())?.kappa;
        let ups = upsilon(&ks, &s).map_err(|e| e.to_string())?.upsilon;
        let e = (k_ns * k_ns - ups).abs();
        ensure(e <= 1e-3, || format!("{}: kappaNS^2 = {} vs upsilon {ups}", ch.name(), k_ns * k_ns))?;
        worst2 = worst2.max(e);
        // Code sizes on both sides of the NS threshold and above.
        let ks_grid = [1.0 + 0.5 * (k_ns - 1.0), k_ns + 0.05, 0.5 * (1.0 + ch.dim_in() as f64)];
        for code in CodeClass::ALL {
            for &k in &ks_grid {
                let f = fidelity(ch, k, code, SolveSide::Primal, &s).map_err(|e| e.to_string())?.value;
                let d = deviation(&ks, k, code, &s).map_err(|e| e.to_string())?;
                ensure((f >= 1.0 - 1e-6) == (d >= -1e-6), || {
                    format!("{} {code} k={k}: F = {f}, D = {d}", ch.name())
                })?;
                agree += 1;
                ones += usize::from(f >= 1.0 - 1e-6);
            }
        }
    }
    let x = Matrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
    let z = Matrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
    let u3 = random_channel(3, 3, 1, 4).unwrap().kraus()[0].clone();
    let u3b = random_channel(3, 3, 1, 9).unwrap().kraus()[0].clone();
    let sets: Vec<(Vec<Matrix>, Vec<Vec<f64>>)> = vec![
        (vec![Matrix::identity(2), x.clone()], vec![vec![0.5, 0.5], vec![0.9, 0.1], vec![0.2, 0.8]]),
        (
            vec![Matrix::identity(2), x, z],
            vec![vec![1.0 / 3.0; 3], vec![0.6, 0.3, 0.1], vec![0.1, 0.1, 0.8]],
        ),
        (vec![Matrix::identity(3), u3, u3b], vec![vec![1.0 / 3.0; 3], vec![0.7, 0.2, 0.1]]),
    ];
    let mut spread: f64 = 0.0;
    for (us, probs) in &sets {
        for code in CodeClass::ALL {
            let mut vals = Vec::new();
            for p in probs {
                let ch = mixed_unitary(us, p).unwrap();
                vals.push(kappa(&ch, code, &s).map_err(|e| e.to_string())?.kappa);
            }
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            ensure(hi - lo <= 2e-4, || format!("kappa {code} varies by {} over probabilities", hi - lo))?;
            spread = spread.max(hi - lo);
        }
    }
    Ok(format!(
        "{agree} fidelity/deviation comparisons agree ({ones} with F = 1); kappaNS^2 vs upsilon worst {worst2:.1e}; mixed-unitary spread {spread:.1e}"
    ))
}

fn ordering() -> Outcome {
    let s = settings();
    let mut channels = vec![
        identity_channel(2).unwrap(),
        identity_channel(3).unwrap(),
        werner_holevo(3).unwrap(),
        werner_holevo(4).unwrap(),
        erasure_channel(2, 0.5).unwrap(),
        erasure_channel(3, 0.3).unwrap(),
    ];
    channels.extend(nr_grid().into_iter().step_by(2).map(|r| nr_channel(r).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    channels.extend((0..10).map(|_| seeded_channel(&mut rng)));
    let mut slack1 = f64::INFINITY;
    let mut slack2 = f64::INFINITY;
    for ch in &channels {
        let k = kappa(ch, CodeClass::Pptp, &s).map_err(|e| e.to_string())?.kappa.log2();
        let g = gamma(ch, SolveSide::Primal, &s).map_err(|e| e.to_string())?.q_gamma;
        let t = cb_norm_pt(ch, &s).map_err(|e| e.to_string())?.q_theta;
        ensure(k <= g + 1e-4 && g + 1e-4 <= t + 2e-4, || format!("{}: {k} / {g} / {t}", ch.name()))?;
        slack1 = slack1.min(g + 1e-4 - k);
        slack2 = slack2.min(t + 2e-4 - g - 1e-4);
    }
    Ok(format!("{} channels; smallest slacks {slack1:.1e}, {slack2:.1e}", channels.len()))
}

fn lemma1() -> Outcome {
    let s = settings();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10 {
        let n1 = seeded_channel(&mut rng);
        // Every third triple uses a noiseless second channel.
        let n2 = if i % 3 == 0 { identity_channel(2).unwrap() } else { seeded_channel(&mut rng) };
        let k = 1.0 + rng.random::<f64>();
        let side = n1.shape().side() * n2.shape().side();
        ensure(side <= 36, || format!("joint side {side}"))?;
        let c = lemma1_check(&n1, &n2, k, &s).map_err(|e| e.to_string())?;
        ensure(c.holds(1e-6), || format!("{} / {} k={k}: {c:?}", n1.name(), n2.name()))?;
        worst = worst.max((c.lhs - c.mid).max(c.mid - c.rhs));
    }
    Ok(format!("10 triples, worst violation {worst:.1e}"))
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Residuals recomputed from scratch.
fn independent_residuals(p: &SdpProblem, x: &BlockMatrix, y: &[f64], s: &BlockMatrix) -> (f64, f64, f64) {
    let primal = p
        .constraints
        .iter()
        .map(|c| (c.matrix.dot(x) - c.rhs).abs())
        .fold(0.0, f64::max);
    let mut dual: f64 = 0.0;
    for (b, &size) in p.block_sizes.iter().enumerate() {
        for r in 0..size {
            for c in 0..size {
                let mut v = entry(&p.objective, b, r, c) - s.blocks[b][(r, c)];
                for (con, &yi) in p.constraints.iter().zip(y) {
                    v -= yi * entry(&con.matrix, b, r, c);
                }
                dual = dual.max(v.abs());
            }
        }
    }
    let cx = p.objective.dot(x);
    let by: f64 = p.constraints.iter().zip(y).map(|(c, yi)| c.rhs * yi).sum();
    (primal, dual, (cx - by).abs() / (1.0 + cx.abs()))
}

fn entry(m: &SparseSymmetric, block: usize, r: usize, c: usize) -> f64 {
    let (lo, hi) = (r.min(c), r.max(c));
    m.entries()
        .find(|&(b, i, j, _)| b == block && i == lo && j == hi)
        .map_or(0.0, |e| e.3)
}

fn solver_gates(total: Instant) -> Outcome {
    let settings = SolverSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_eig: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut optimal = 0;
    let mut check = |p: &SdpProblem| -> Result<(), String> {
        let sol = solve(p, &settings).map_err(|e| e.to_string())?;
        if sol.status == SolveStatus::Optimal {
            optimal += 1;
            let (pr, du, gap) = independent_residuals(p, &sol.x, &sol.y, &sol.s);
            let eig = sol.x.min_eigenvalue().min(sol.s.min_eigenvalue());
            ensure(pr <= 1e-8 && du <= 1e-8 && gap <= 1e-8 && eig >= -1e-8, || {
                format!("Optimal solve with residuals {pr:e} {du:e} {gap:e}, min eig {eig:e}")
            })?;
            worst_res = worst_res.max(pr).max(du).max(gap);
        }
        Ok(())
    };
    for _ in 0..50 {
        let c = random_symmetric(&mut rng, 4);
        let mut p = SdpProblem::new(vec![4]);
        for (i, row) in c.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().skip(i) {
                p.objective.add(0, i, j, v);
            }
        }
        let mut trace = SparseSymmetric::new();
        for i in 0..4 {
            trace.add(0, i, i, 1.0);
        }
        p.add_constraint(trace, 1.0, Some("tr X = 1".into()));
        let sol = solve(&p, &settings).map_err(|e| e.to_string())?;
        let m = Matrix::from_real(4, 4, &c.concat()).unwrap();
        let lambda = hermitian_eig(&m, HermitianTol::default()).unwrap().values[0];
        ensure(sol.status == SolveStatus::Optimal, || format!("status {:?}", sol.status))?;
        let e = (sol.primal_value - lambda).abs();
        ensure(e <= 1e-8, || format!("eigenvalue oracle off by {e:e}"))?;
        worst_eig = worst_eig.max(e);
        check(&p)?;
    }
    // Multi-block problems with several constraints and a planted interior
    // point, so that both sides are strictly feasible.
    for _ in 0..20 {
        let sizes = vec![3, 2, 1];
        let mut p = SdpProblem::new(sizes.clone());
        let x0 = BlockMatrix::identity(&sizes, 1.0);
        for (b, &n) in sizes.iter().enumerate() {
            let c = random_symmetric(&mut rng, n);
            for i in 0..n {
                for j in i..n {
                    let shift = if i == j { n as f64 } else { 0.0 };
                    p.objective.add(b, i, j, c[i][j] + shift);
                }
            }
        }
        for _ in 0..4 {
            let mut a = SparseSymmetric::new();
            for (b, &n) in sizes.iter().enumerate() {
                let m = random_symmetric(&mut rng, n);
                for i in 0..n {
                    for j in i..n {
                        a.add(b, i, j, m[i][j]);
                    }
                }
            }
            let rhs = a.dot(&x0);
            p.add_constraint(a, rhs, None);
        }
        check(&p)?;
    }
    let secs = total.elapsed().as_secs_f64();
    ensure(secs < 600.0, || format!("acceptance run took {secs:.0}s"))?;
    Ok(format!(
        "{optimal} Optimal solves within 1e-8 (worst {worst_res:.1e}); eigenvalue oracle worst {worst_eig:.1e} on 50 instances; whole run {secs:.0}s"
    ))
}

fn run_criterion(id: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    let secs = start.elapsed().as_secs_f64();
    let (mark, detail) = match &outcome {
        Ok(d) => ("PASS", d.as_str()),
        Err(d) => ("FAIL", d.as_str()),
    };
    let line = format!("criterion {id:>2} {mark} [{secs:6.1}s] {title}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    outcome.is_ok()
}

#[test]
fn acceptance() {
    let total = Instant::now();
    let results = [
        run_criterion(1, "Werner-Holevo anchor", werner_anchor),
        run_criterion(2, "identity-channel anchors", identity_anchors),
        run_criterion(3, "nr sweep structure", fig1_structure),
        run_criterion(4, "erasure channel qGamma", erasure_remark),
        run_criterion(5, "additivity of gamma", additivity),
        run_criterion(6, "qudit tensoring and activation", propositions),
        run_criterion(7, "fidelity/deviation equivalence, kappaNS and graph dependence", theorems_1_and_2),
        run_criterion(8, "ordering chain", ordering),
        run_criterion(9, "fidelity sandwich", lemma1),
        run_criterion(10, "solver quality gates", || solver_gates(total)),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    let _ = std::io::stderr().write_all(format!("acceptance: {passed}/10 criteria passed\n").as_bytes());
    assert_eq!(passed, 10, "some acceptance criteria failed");
}
