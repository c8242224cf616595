//! Primal-dual interior-point method with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector step.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::Serialize;

use super::problem::{BlockMatrix, SdpProblem};
use super::SdpError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative duality gap `|⟨C,X⟩ − b·y| / (1 + |⟨C,X⟩|)`.
    pub tol_gap: f64,
    /// Max-entry primal and dual residuals.
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iter: 100,
            step_fraction: 0.98,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SdpError> {
        let ok = self.tol_gap > 0.0
            && self.tol_feas > 0.0
            && self.max_iter > 0
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SdpError::Settings(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    NumericalFailure,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    fn worst(&self, s: &SolverSettings) -> f64 {
        (self.primal / s.tol_feas).max(self.dual / s.tol_feas).max(self.gap / s.tol_gap)
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// `⟨C, X⟩`
    pub primal_value: f64,
    /// `b·y`
    pub dual_value: f64,
    pub x: BlockMatrix,
    pub y: Vec<f64>,
    pub s: BlockMatrix,
    pub iterations: usize,
    pub residuals: Residuals,
    /// Constraints removed as linearly dependent before solving.
    pub dropped: Vec<usize>,
}

/// Residuals of `sol` against `p`: max-entry primal and dual infeasibility
/// and the relative duality gap.
pub fn residuals(p: &SdpProblem, sol: &SdpSolution) -> Residuals {
    let primal = p
        .constraints
        .iter()
        .map(|c| (c.matrix.dot(&sol.x) - c.rhs).abs())
        .fold(0.0, f64::max);
    let mut dual_mat = p.objective.to_dense(&p.block_sizes);
    for (con, &yi) in p.constraints.iter().zip(&sol.y) {
        for (b, r, c, v) in con.matrix.entries() {
            dual_mat.blocks[b][(r, c)] -= yi * v;
            if r != c {
                dual_mat.blocks[b][(c, r)] -= yi * v;
            }
        }
    }
    for (d, s) in dual_mat.blocks.iter_mut().zip(&sol.s.blocks) {
        *d -= s;
    }
    let pobj = p.objective.dot(&sol.x);
    let dobj: f64 = p.constraints.iter().zip(&sol.y).map(|(c, y)| c.rhs * y).sum();
    Residuals {
        primal,
        dual: dual_mat.max_abs(),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
    }
}

/// Constraint data grouped by block, with symmetric entries expanded.
struct Operator {
    sizes: Vec<usize>,
    m: usize,
    blocks: Vec<BlockTerms>,
}

#[derive(Default)]
struct BlockTerms {
    cons: Vec<usize>,
    ranges: Vec<(usize, usize)>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Operator {
    fn new(p: &SdpProblem, active: &[usize]) -> Self {
        let mut blocks: Vec<BlockTerms> = p.block_sizes.iter().map(|_| BlockTerms::default()).collect();
        for (i, &orig) in active.iter().enumerate() {
            let mut per_block: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); p.block_sizes.len()];
            for (b, r, c, v) in p.constraints[orig].matrix.entries() {
                per_block[b].push((r, c, v));
                if r != c {
                    per_block[b].push((c, r, v));
                }
            }
            for (b, entries) in per_block.into_iter().enumerate() {
                if entries.is_empty() {
                    continue;
                }
                let t = &mut blocks[b];
                let start = t.rows.len();
                for (r, c, v) in entries {
                    t.rows.push(r);
                    t.cols.push(c);
                    t.vals.push(v);
                }
                t.cons.push(i);
                t.ranges.push((start, t.rows.len()));
            }
        }
        Self {
            sizes: p.block_sizes.clone(),
            m: active.len(),
            blocks,
        }
    }

    /// `(⟨A_i, Z⟩)_i`
    fn apply(&self, z: &BlockMatrix) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (t, zb) in self.blocks.iter().zip(&z.blocks) {
            for (&i, &(s, e)) in t.cons.iter().zip(&t.ranges) {
                let mut acc = 0.0;
                for k in s..e {
                    acc += t.vals[k] * zb[(t.rows[k], t.cols[k])];
                }
                out[i] += acc;
            }
        }
        out
    }

    /// `Σ_i y_i A_i`
    fn adjoint(&self, y: &[f64]) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(&self.sizes);
        for (t, ob) in self.blocks.iter().zip(out.blocks.iter_mut()) {
            for (&i, &(s, e)) in t.cons.iter().zip(&t.ranges) {
                let yi = y[i];
                if yi == 0.0 {
                    continue;
                }
                for k in s..e {
                    ob[(t.rows[k], t.cols[k])] += yi * t.vals[k];
                }
            }
        }
        out
    }

    /// Schur complement `M_ij = ⟨A_i, W A_j W⟩`.
    fn schur(&self, w: &[Mat<f64>]) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.m, self.m);
        for (t, wb) in self.blocks.iter().zip(w) {
            let n = wb.nrows();
            let wv: Vec<f64> = (0..n * n).map(|idx| wb[(idx / n, idx % n)]).collect();
            for a in 0..t.cons.len() {
                let i = t.cons[a];
                let (sa, ea) = t.ranges[a];
                for b in a..t.cons.len() {
                    let j = t.cons[b];
                    let (sb, eb) = t.ranges[b];
                    let mut acc = 0.0;
                    for ka in sa..ea {
                        let (p, q, va) = (t.rows[ka], t.cols[ka], t.vals[ka]);
                        let wp = &wv[p * n..(p + 1) * n];
                        let wq = &wv[q * n..(q + 1) * n];
                        let mut inner = 0.0;
                        for kb in sb..eb {
                            inner += t.vals[kb] * wp[t.rows[kb]] * wq[t.cols[kb]];
                        }
                        acc += va * inner;
                    }
                    m[(i, j)] += acc;
                }
            }
        }
        for j in 0..self.m {
            for i in 0..j {
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    }
}

fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

fn max_abs_vec(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn lower_inverse(l: &Mat<f64>) -> Mat<f64> {
    let n = l.nrows();
    let mut inv = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut acc = 0.0;
            for k in j..i {
                acc += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -acc / l[(i, i)];
        }
    }
    inv
}

fn cholesky_lower(a: &Mat<f64>) -> Option<Mat<f64>> {
    a.llt(Side::Lower).ok().map(|f| f.L().to_owned())
}

/// Nesterov-Todd scaling of one block: `W = G Gᵀ` with `W S W = X` and
/// `G⁻¹ X G⁻ᵀ = Gᵀ S G = diag(d)`.
struct BlockScaling {
    x_chol_inv: Mat<f64>,
    s_chol_inv: Mat<f64>,
    g: Mat<f64>,
    w: Mat<f64>,
    d: Vec<f64>,
}

impl BlockScaling {
    fn new(x: &Mat<f64>, s: &Mat<f64>) -> Option<Self> {
        let l = cholesky_lower(x)?;
        let r = cholesky_lower(s)?;
        // Rᵀ L = U Σ Vᵀ gives G = L V Σ^{-1/2} and d = Σ.
        let rtl = r.transpose() * l.as_ref();
        let svd = rtl.svd().ok()?;
        let n = x.nrows();
        let sigma: Vec<f64> = (0..n).map(|i| svd.S()[i]).collect();
        if sigma.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return None;
        }
        let lv = l.as_ref() * svd.V();
        let g = Mat::from_fn(n, n, |i, j| lv[(i, j)] / sigma[j].sqrt());
        let w = symmetrize(&(g.as_ref() * g.transpose()));
        Some(Self {
            x_chol_inv: lower_inverse(&l),
            s_chol_inv: lower_inverse(&r),
            g,
            w,
            d: sigma,
        })
    }

    /// `W Z W`
    fn sandwich(&self, z: &Mat<f64>) -> Mat<f64> {
        let wz = self.w.as_ref() * z.as_ref();
        symmetrize(&(wz.as_ref() * self.w.as_ref()))
    }

    fn max_step(inv: &Mat<f64>, dz: &Mat<f64>) -> f64 {
        let t = inv.as_ref() * dz.as_ref();
        let t = symmetrize(&(t.as_ref() * inv.transpose()));
        let lo = t
            .self_adjoint_eigenvalues(Side::Lower)
            .ok()
            .and_then(|v| v.first().copied())
            .unwrap_or(f64::NEG_INFINITY);
        if lo >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / lo
        }
    }

    /// `G R̃ Gᵀ` for the combined centering-corrector right-hand side.
    fn corrector_rhs(&self, ds_aff: &Mat<f64>, sigma_mu: f64) -> Mat<f64> {
        let n = self.d.len();
        let gt_ds = self.g.transpose() * ds_aff.as_ref();
        let s_t = symmetrize(&(gt_ds.as_ref() * self.g.as_ref()));
        let x_t = Mat::from_fn(n, n, |i, j| if i == j { -self.d[i] - s_t[(i, i)] } else { -s_t[(i, j)] });
        let corr = x_t.as_ref() * s_t.as_ref();
        let r = Mat::from_fn(n, n, |i, j| {
            let c = corr[(i, j)] + corr[(j, i)];
            let diag = if i == j { 2.0 * sigma_mu - 2.0 * self.d[i] * self.d[i] } else { 0.0 };
            (diag - c) / (self.d[i] + self.d[j])
        });
        let gr = self.g.as_ref() * r.as_ref();
        symmetrize(&(gr.as_ref() * self.g.transpose()))
    }
}

struct Factored {
    matrix: Mat<f64>,
    llt: faer::linalg::solvers::Llt<f64>,
}

impl Factored {
    /// Cholesky of `m`, adding `δ·max(diag)` to the diagonal with `δ` from
    /// 1e-12 up to 1e-6 if the plain factorization fails.
    fn new(m: Mat<f64>) -> Option<Self> {
        if let Ok(llt) = m.llt(Side::Lower) {
            return Some(Self { matrix: m, llt });
        }
        let n = m.nrows();
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(1e-300f64, f64::max);
        let mut delta = 1e-12;
        while delta <= 1e-6 * (1.0 + 1e-9) {
            let mut reg = m.clone();
            for i in 0..n {
                reg[(i, i)] += delta * scale;
            }
            if let Ok(llt) = reg.llt(Side::Lower) {
                log::debug!("Schur complement regularized with {delta:e}");
                return Some(Self { matrix: m, llt });
            }
            delta *= 10.0;
        }
        None
    }

    /// Solves `M x = rhs` with two steps of iterative refinement.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let mut x = self.llt.solve(&b);
        for _ in 0..2 {
            let r = &b - &self.matrix * &x;
            x += self.llt.solve(&r);
        }
        (0..n).map(|i| x[(i, 0)]).collect()
    }
}

/// Indices of a maximal linearly independent subset of the constraints,
/// found by pivoted Cholesky of their Gram matrix.
fn independent_constraints(p: &SdpProblem) -> Vec<usize> {
    let all: Vec<usize> = (0..p.constraints.len()).collect();
    let op = Operator::new(p, &all);
    let eye: Vec<Mat<f64>> = p.block_sizes.iter().map(|&s| Mat::identity(s, s)).collect();
    let gram = op.schur(&eye);
    if let Ok(llt) = gram.llt(Side::Lower) {
        let n = gram.nrows();
        let l = llt.L();
        let max_diag = (0..n).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
        let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-10 * max_diag {
            return all;
        }
    }
    let n = gram.nrows();
    let mut a = gram;
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let tol = 1e-10 * max_diag.max(1e-300);
    let mut rank = 0;
    for k in 0..n {
        let (piv, best) = (k..n)
            .map(|i| (i, a[(i, i)]))
            .fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            break;
        }
        if piv != k {
            perm.swap(k, piv);
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            for i in 0..n {
                let t = a[(i, k)];
                a[(i, k)] = a[(i, piv)];
                a[(i, piv)] = t;
            }
        }
        let lkk = a[(k, k)].sqrt();
        a[(k, k)] = lkk;
        for i in k + 1..n {
            a[(i, k)] /= lkk;
            a[(k, i)] = a[(i, k)];
        }
        for j in k + 1..n {
            let ljk = a[(j, k)];
            for i in k + 1..n {
                a[(i, j)] -= a[(i, k)] * ljk;
            }
        }
        rank += 1;
    }
    let mut keep: Vec<usize> = perm[..rank].to_vec();
    keep.sort_unstable();
    keep
}

struct Iterate {
    x: BlockMatrix,
    y: Vec<f64>,
    s: BlockMatrix,
}

/// Solves `p` from the infeasible starting point `X = S = τI`, `y = 0`,
/// `τ = 1 + max(|b|, ‖C‖_max)`.
pub fn solve(p: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution, SdpError> {
    p.validate()?;
    settings.validate()?;
    let active = independent_constraints(p);
    let dropped: Vec<usize> = (0..p.constraints.len()).filter(|i| !active.contains(i)).collect();
    if !dropped.is_empty() {
        log::warn!("dropping {} linearly dependent constraint(s): {:?}", dropped.len(), dropped);
    }
    let op = Operator::new(p, &active);
    let b: Vec<f64> = active.iter().map(|&i| p.constraints[i].rhs).collect();
    let c = p.objective.to_dense(&p.block_sizes);
    let n_total = p.block_sizes.iter().sum::<usize>() as f64;

    let tau = 1.0 + max_abs_vec(&b).max(c.max_abs());
    let mut it = Iterate {
        x: BlockMatrix::identity(&p.block_sizes, tau),
        y: vec![0.0; op.m],
        s: BlockMatrix::identity(&p.block_sizes, tau),
    };

    let mut best: Option<(f64, Iterate, Residuals, usize)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut converged_for = 0;
    let gamma = settings.step_fraction;

    for iter in 0..=settings.max_iter {
        iterations = iter;
        let ax = op.apply(&it.x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let aty = op.adjoint(&it.y);
        let mut rd = c.clone();
        for ((r, a), s) in rd.blocks.iter_mut().zip(&aty.blocks).zip(&it.s.blocks) {
            *r -= a;
            *r -= s;
        }
        let pobj = c.dot(&it.x);
        let dobj: f64 = b.iter().zip(&it.y).map(|(b, y)| b * y).sum();
        let res = Residuals {
            primal: max_abs_vec(&rp),
            dual: rd.max_abs(),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
        };
        let score = res.worst(settings);
        log::trace!(
            "iter {iter}: pobj {pobj:.10e} dobj {dobj:.10e} pinf {:.2e} dinf {:.2e} gap {:.2e}",
            res.primal,
            res.dual,
            res.gap
        );
        if best.as_ref().map_or(true, |(s, ..)| score < *s) {
            best = Some((
                score,
                Iterate {
                    x: it.x.clone(),
                    y: it.y.clone(),
                    s: it.s.clone(),
                },
                res,
                iter,
            ));
        }
        // Once within tolerance, keep iterating while the residuals still
        // improve markedly; the best iterate is returned.
        if score <= 1.0 {
            converged_for += 1;
            if score <= 1e-3 || converged_for > 3 {
                break;
            }
        }
        if iter == settings.max_iter {
            break;
        }
        if max_abs_vec(&it.y) > 1e12 || it.x.max_abs() > 1e12 {
            status = SolveStatus::Infeasible;
            break;
        }

        let mu = it.x.dot(&it.s) / n_total;
        let scalings: Option<Vec<BlockScaling>> = it
            .x
            .blocks
            .iter()
            .zip(&it.s.blocks)
            .map(|(x, s)| BlockScaling::new(x, s))
            .collect();
        let Some(scalings) = scalings else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let w: Vec<Mat<f64>> = scalings.iter().map(|sc| sc.w.clone()).collect();
        let Some(schur) = Factored::new(op.schur(&w)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let w_rd_w: Vec<Mat<f64>> = scalings.iter().zip(&rd.blocks).map(|(sc, r)| sc.sandwich(r)).collect();

        let direction = |rc: &BlockMatrix| -> (BlockMatrix, Vec<f64>, BlockMatrix) {
            let mut t = rc.clone();
            for (tb, wrw) in t.blocks.iter_mut().zip(&w_rd_w) {
                *tb -= wrw;
            }
            let at = op.apply(&t);
            let rhs: Vec<f64> = rp.iter().zip(&at).map(|(r, a)| r - a).collect();
            let dy = schur.solve(&rhs);
            let atdy = op.adjoint(&dy);
            let mut ds = rd.clone();
            for (d, a) in ds.blocks.iter_mut().zip(&atdy.blocks) {
                *d -= a;
            }
            let mut dx = rc.clone();
            for ((d, sc), dsb) in dx.blocks.iter_mut().zip(&scalings).zip(&ds.blocks) {
                *d -= sc.sandwich(dsb);
                *d = symmetrize(d);
            }
            (dx, dy, ds)
        };
        let steps = |dx: &BlockMatrix, ds: &BlockMatrix| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for ((sc, dxb), dsb) in scalings.iter().zip(&dx.blocks).zip(&ds.blocks) {
                ap = ap.min(BlockScaling::max_step(&sc.x_chol_inv, dxb));
                ad = ad.min(BlockScaling::max_step(&sc.s_chol_inv, dsb));
            }
            ((gamma * ap).min(1.0), (gamma * ad).min(1.0))
        };

        // predictor
        let mut rc_aff = it.x.clone();
        for blk in rc_aff.blocks.iter_mut() {
            *blk *= faer::Scale(-1.0);
        }
        let (dx_aff, _, ds_aff) = direction(&rc_aff);
        let (ap, ad) = steps(&dx_aff, &ds_aff);
        let mut x_try = it.x.clone();
        let mut s_try = it.s.clone();
        for (xb, d) in x_try.blocks.iter_mut().zip(&dx_aff.blocks) {
            *xb += faer::Scale(ap) * d;
        }
        for (sb, d) in s_try.blocks.iter_mut().zip(&ds_aff.blocks) {
            *sb += faer::Scale(ad) * d;
        }
        let mu_aff = x_try.dot(&s_try) / n_total;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // corrector
        let rc = BlockMatrix {
            blocks: scalings
                .iter()
                .zip(&ds_aff.blocks)
                .map(|(sc, d)| sc.corrector_rhs(d, sigma * mu))
                .collect(),
        };
        let (dx, dy, ds) = direction(&rc);
        let (ap, ad) = steps(&dx, &ds);
        for (xb, d) in it.x.blocks.iter_mut().zip(&dx.blocks) {
            *xb += faer::Scale(ap) * d;
        }
        for (yi, d) in it.y.iter_mut().zip(&dy) {
            *yi += ad * d;
        }
        for (sb, d) in it.s.blocks.iter_mut().zip(&ds.blocks) {
            *sb += faer::Scale(ad) * d;
        }
        if !(ap.is_finite() && ad.is_finite()) || it.x.max_abs().is_nan() {
            status = SolveStatus::NumericalFailure;
            break;
        }
    }

    let (final_it, final_iter) = match best {
        Some((score, b, _, i)) => {
            if score <= 1.0 {
                status = SolveStatus::Optimal;
            }
            (b, i)
        }
        None => (it, iterations),
    };
    let mut y_full = vec![0.0; p.constraints.len()];
    for (k, &i) in active.iter().enumerate() {
        y_full[i] = final_it.y[k];
    }
    let mut sol = SdpSolution {
        status,
        primal_value: p.objective.dot(&final_it.x),
        dual_value: p.constraints.iter().zip(&y_full).map(|(c, y)| c.rhs * y).sum(),
        x: final_it.x,
        y: y_full,
        s: final_it.s,
        iterations: final_iter,
        residuals: Residuals {
            primal: 0.0,
            dual: 0.0,
            gap: 0.0,
        },
        dropped,
    };
    sol.residuals = residuals(p, &sol);
    Ok(sol)
}
