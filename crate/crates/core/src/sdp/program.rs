//! Programs over real scalar, Hermitian and general complex matrix
//! variables with linear matrix inequalities and linear equalities.
//!
//! A program `max/min f(v)  s.t.  M_ℓ(v) ⪰ 0,  E v = e` is solved as the
//! dual side of a standard-form SDP: equalities are eliminated by
//! substitution, each remaining free variable becomes one dual multiplier
//! `y_i`, and each LMI becomes one PSD block (real symmetric when its data is
//! real, otherwise the `[[Re, −Im], [Im, Re]]` embedding).

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::problem::{BlockMatrix, SdpProblem, SparseSymmetric};
use super::solver::{residuals, solve, Residuals, SdpSolution, SolveStatus, SolverSettings};
use super::SdpError;
use crate::linalg::{BipartiteShape, Matrix, Subsystem};

const CONSTANT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// Hermitian variables are real symmetric; general variables are real.
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Real affine function of the program variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Linear {
    coeffs: BTreeMap<usize, f64>,
    constant: f64,
}

impl Linear {
    pub fn constant(c: f64) -> Self {
        Self {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    fn var(i: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(i, 1.0);
        Self { coeffs, constant: 0.0 }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(&k, &v)| (k, v * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn add(&self, other: &Linear) -> Self {
        let mut out = self.clone();
        for (&k, &v) in &other.coeffs {
            *out.coeffs.entry(k).or_insert(0.0) += v;
        }
        out.constant += other.constant;
        out
    }

    pub fn sub(&self, other: &Linear) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|(&k, &v)| v * values[k]).sum::<f64>()
    }
}

/// Affine matrix expression: a constant plus a sparse coefficient matrix per
/// variable.
#[derive(Debug, Clone)]
pub struct Affine {
    rows: usize,
    cols: usize,
    terms: BTreeMap<usize, Vec<(usize, usize, Complex64)>>,
}

impl Affine {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(m: &Matrix) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let v = m[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                }
            }
        }
        let mut out = Self::zeros(m.rows(), m.cols());
        if !entries.is_empty() {
            out.terms.insert(CONSTANT, entries);
        }
        out
    }

    /// `f · 1_n`
    pub fn identity_times(f: &Linear, n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        let diag = |s: f64| (0..n).map(|i| (i, i, Complex64::new(s, 0.0))).collect::<Vec<_>>();
        for (&k, &v) in &f.coeffs {
            if v != 0.0 {
                out.terms.insert(k, diag(v));
            }
        }
        if f.constant != 0.0 {
            out.terms.insert(CONSTANT, diag(f.constant));
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn map_entries(&self, rows: usize, cols: usize, f: impl Fn(usize, usize, Complex64, &mut Vec<(usize, usize, Complex64)>)) -> Self {
        let mut out = Self::zeros(rows, cols);
        for (&k, entries) in &self.terms {
            let mut mapped = Vec::with_capacity(entries.len());
            for &(r, c, v) in entries {
                f(r, c, v, &mut mapped);
            }
            if !mapped.is_empty() {
                out.terms.insert(k, mapped);
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_entries(self.rows, self.cols, |r, c, v, out| out.push((r, c, v * s)))
    }

    pub fn add(&self, other: &Affine) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "affine add shape mismatch");
        let mut out = self.clone();
        for (&k, entries) in &other.terms {
            out.terms.entry(k).or_default().extend_from_slice(entries);
        }
        out
    }

    pub fn sub(&self, other: &Affine) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn adjoint(&self) -> Self {
        self.map_entries(self.cols, self.rows, |r, c, v, out| out.push((c, r, v.conj())))
    }

    /// `self ⊗ 1_d`
    pub fn kron_identity(&self, d: usize) -> Self {
        self.map_entries(self.rows * d, self.cols * d, |r, c, v, out| {
            for k in 0..d {
                out.push((r * d + k, c * d + k, v));
            }
        })
    }

    /// `1_d ⊗ self`
    pub fn identity_kron(&self, d: usize) -> Self {
        let (rows, cols) = (self.rows, self.cols);
        self.map_entries(rows * d, cols * d, |r, c, v, out| {
            for k in 0..d {
                out.push((k * rows + r, k * cols + c, v));
            }
        })
    }

    pub fn partial_transpose(&self, shape: BipartiteShape, sys: Subsystem) -> Self {
        assert_eq!(self.rows, shape.side(), "partial transpose shape mismatch");
        assert_eq!(self.cols, shape.side(), "partial transpose shape mismatch");
        let db = shape.db;
        self.map_entries(self.rows, self.cols, |r, c, v, out| {
            let (i, j) = (r / db, r % db);
            let (k, l) = (c / db, c % db);
            match sys {
                Subsystem::A => out.push((k * db + j, i * db + l, v)),
                Subsystem::B => out.push((i * db + l, k * db + j, v)),
            }
        })
    }

    pub fn partial_trace(&self, shape: BipartiteShape, sys: Subsystem) -> Self {
        assert_eq!(self.rows, shape.side(), "partial trace shape mismatch");
        assert_eq!(self.cols, shape.side(), "partial trace shape mismatch");
        let db = shape.db;
        let keep = match sys {
            Subsystem::A => shape.db,
            Subsystem::B => shape.da,
        };
        self.map_entries(keep, keep, |r, c, v, out| {
            let (i, j) = (r / db, r % db);
            let (k, l) = (c / db, c % db);
            match sys {
                Subsystem::A if i == k => out.push((j, l, v)),
                Subsystem::B if j == l => out.push((i, k, v)),
                _ => {}
            }
        })
    }

    /// `Q · self · Q†`
    pub fn congruence(&self, q: &Matrix) -> Self {
        assert_eq!(q.cols(), self.rows, "congruence shape mismatch");
        assert_eq!(self.rows, self.cols, "congruence needs a square expression");
        let n = q.rows();
        let mut out = Self::zeros(n, n);
        for (&k, entries) in &self.terms {
            let mut dense = Matrix::zeros(n, n);
            for &(r, c, v) in entries {
                for i in 0..n {
                    let qi = q[(i, r)] * v;
                    if qi == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..n {
                        dense[(i, j)] += qi * q[(j, c)].conj();
                    }
                }
            }
            let mapped: Vec<_> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, dense[(i, j)]))
                .filter(|&(_, _, v)| v.norm() > 1e-15)
                .collect();
            if !mapped.is_empty() {
                out.terms.insert(k, mapped);
            }
        }
        out
    }

    /// `[[a, b], [c, d]]`
    pub fn block2(a: &Affine, b: &Affine, c: &Affine, d: &Affine) -> Self {
        assert_eq!(a.rows, b.rows, "block row mismatch");
        assert_eq!(c.rows, d.rows, "block row mismatch");
        assert_eq!(a.cols, c.cols, "block column mismatch");
        assert_eq!(b.cols, d.cols, "block column mismatch");
        let (r0, c0) = (a.rows, a.cols);
        let mut out = Self::zeros(a.rows + c.rows, a.cols + b.cols);
        let parts = [(a, 0, 0), (b, 0, c0), (c, r0, 0), (d, r0, c0)];
        for (part, dr, dc) in parts {
            for (&k, entries) in &part.terms {
                out.terms
                    .entry(k)
                    .or_default()
                    .extend(entries.iter().map(|&(r, c, v)| (r + dr, c + dc, v)));
            }
        }
        out
    }

    /// `Re tr(M · self)`
    pub fn trace_with(&self, m: &Matrix) -> Linear {
        assert_eq!((m.rows(), m.cols()), (self.cols, self.rows), "trace_with shape mismatch");
        let mut out = Linear::default();
        for (&k, entries) in &self.terms {
            let s: f64 = entries.iter().map(|&(r, c, v)| (m[(c, r)] * v).re).sum();
            if k == CONSTANT {
                out.constant += s;
            } else if s != 0.0 {
                *out.coeffs.entry(k).or_insert(0.0) += s;
            }
        }
        out
    }

    /// `Re tr(self)`
    pub fn trace(&self) -> Linear {
        let mut out = Linear::default();
        for (&k, entries) in &self.terms {
            let s: f64 = entries.iter().filter(|e| e.0 == e.1).map(|e| e.2.re).sum();
            if k == CONSTANT {
                out.constant += s;
            } else if s != 0.0 {
                *out.coeffs.entry(k).or_insert(0.0) += s;
            }
        }
        out
    }

    /// Evaluates the expression at the given variable values.
    pub fn eval(&self, values: &[f64]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (&k, entries) in &self.terms {
            let x = if k == CONSTANT { 1.0 } else { values[k] };
            if x == 0.0 {
                continue;
            }
            for &(r, c, v) in entries {
                out[(r, c)] += v * x;
            }
        }
        out
    }

    /// Merged per-variable entries, keyed by `(row, col)`.
    fn merged(&self) -> BTreeMap<usize, BTreeMap<(usize, usize), Complex64>> {
        let mut out: BTreeMap<usize, BTreeMap<(usize, usize), Complex64>> = BTreeMap::new();
        for (&k, entries) in &self.terms {
            let m = out.entry(k).or_default();
            for &(r, c, v) in entries {
                *m.entry((r, c)).or_insert(Complex64::new(0.0, 0.0)) += v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Hermitian,
    General,
}

/// Handle to a matrix variable of a [`Program`].
#[derive(Debug, Clone)]
pub struct VarMatrix {
    rows: usize,
    cols: usize,
    kind: VarKind,
    field: Field,
    first: usize,
}

impl VarMatrix {
    fn count(&self) -> usize {
        let (n, m) = (self.rows, self.cols);
        match (self.kind, self.field) {
            (VarKind::Hermitian, Field::Real) => n * (n + 1) / 2,
            (VarKind::Hermitian, Field::Complex) => n * n,
            (VarKind::General, Field::Real) => n * m,
            (VarKind::General, Field::Complex) => 2 * n * m,
        }
    }

    pub fn expr(&self) -> Affine {
        let mut out = Affine::zeros(self.rows, self.cols);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut k = self.first;
        match self.kind {
            VarKind::Hermitian => {
                let n = self.rows;
                for r in 0..n {
                    out.terms.insert(k, vec![(r, r, one)]);
                    k += 1;
                    for c in r + 1..n {
                        out.terms.insert(k, vec![(r, c, one), (c, r, one)]);
                        k += 1;
                        if self.field == Field::Complex {
                            out.terms.insert(k, vec![(r, c, i), (c, r, -i)]);
                            k += 1;
                        }
                    }
                }
            }
            VarKind::General => {
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        out.terms.insert(k, vec![(r, c, one)]);
                        k += 1;
                        if self.field == Field::Complex {
                            out.terms.insert(k, vec![(r, c, i)]);
                            k += 1;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn value(&self, sol: &ProgramSolution) -> Matrix {
        self.expr().eval(&sol.values)
    }
}

/// A named linear matrix inequality `expr ⪰ 0`.
#[derive(Debug, Clone)]
pub struct Lmi {
    pub name: String,
    pub expr: Affine,
}

#[derive(Debug, Clone)]
pub struct Program {
    field: Field,
    names: Vec<String>,
    lmis: Vec<Lmi>,
    equalities: Vec<(String, Linear)>,
    objective: Option<(Sense, Linear)>,
}

#[derive(Debug, Clone)]
pub struct ProgramSolution {
    pub status: SolveStatus,
    /// Objective at the returned variables.
    pub value: f64,
    /// Objective bound certified by the multipliers (upper for maximization,
    /// lower for minimization).
    pub bound: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    pub values: Vec<f64>,
    /// One Hermitian multiplier per LMI, with `Σ_ℓ Re tr(Z_ℓ M_ℓ(v))` equal
    /// to `bound − value` at optimality.
    pub multipliers: Vec<Matrix>,
}

impl ProgramSolution {
    pub fn eval(&self, e: &Affine) -> Matrix {
        e.eval(&self.values)
    }

    pub fn scalar(&self, f: &Linear) -> f64 {
        f.eval(&self.values)
    }
}

/// Standard-form residuals of a certificate, with the smallest eigenvalue
/// over the multipliers and over the LMI values.
#[derive(Debug, Clone, Copy)]
pub struct CertificateCheck {
    pub residuals: Residuals,
    pub min_eig_multipliers: f64,
    pub min_eig_lmis: f64,
}

/// Affine substitution of one original variable in terms of the free ones.
#[derive(Debug, Clone)]
struct Substitution {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

struct Canonical {
    problem: SdpProblem,
    subs: Vec<Substitution>,
    free_to_row: Vec<Option<usize>>,
    sign: f64,
    objective_constant: f64,
    complex_blocks: Vec<bool>,
}

impl Program {
    pub fn new(field: Field) -> Self {
        Self {
            field,
            names: Vec::new(),
            lmis: Vec::new(),
            equalities: Vec::new(),
            objective: None,
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_lmis(&self) -> usize {
        self.lmis.len()
    }

    fn alloc(&mut self, name: &str, count: usize) -> usize {
        let first = self.names.len();
        for i in 0..count {
            self.names.push(format!("{name}[{i}]"));
        }
        first
    }

    pub fn scalar(&mut self, name: &str) -> Linear {
        let k = self.alloc(name, 1);
        self.names[k] = name.to_string();
        Linear::var(k)
    }

    pub fn hermitian(&mut self, name: &str, n: usize) -> VarMatrix {
        self.matrix(name, n, n, VarKind::Hermitian)
    }

    pub fn general(&mut self, name: &str, rows: usize, cols: usize) -> VarMatrix {
        self.matrix(name, rows, cols, VarKind::General)
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize, kind: VarKind) -> VarMatrix {
        let mut v = VarMatrix {
            rows,
            cols,
            kind,
            field: self.field,
            first: 0,
        };
        v.first = self.alloc(name, v.count());
        v
    }

    /// Adds `expr ⪰ 0`.
    pub fn psd(&mut self, name: &str, expr: Affine) -> Result<(), SdpError> {
        if expr.rows != expr.cols {
            return Err(SdpError::Malformed(format!("{name}: LMI is {}x{}", expr.rows, expr.cols)));
        }
        for (k, entries) in expr.merged() {
            for (&(r, c), &v) in &entries {
                let mirror = entries.get(&(c, r)).copied().unwrap_or_default();
                if (v - mirror.conj()).norm() > 1e-10 * (1.0 + v.norm()) {
                    let what = if k == CONSTANT { "constant".to_string() } else { self.names[k].clone() };
                    return Err(SdpError::Malformed(format!("{name}: {what} term is not Hermitian at ({r},{c})")));
                }
            }
        }
        self.lmis.push(Lmi {
            name: name.to_string(),
            expr,
        });
        Ok(())
    }

    /// Adds `f = rhs`.
    pub fn equal(&mut self, name: &str, f: &Linear, rhs: f64) {
        self.equalities.push((name.to_string(), f.sub(&Linear::constant(rhs))));
    }

    /// Adds `expr = rhs` entrywise (real and imaginary parts).
    pub fn equal_matrix(&mut self, name: &str, expr: &Affine, rhs: &Matrix) -> Result<(), SdpError> {
        if (expr.rows, expr.cols) != (rhs.rows(), rhs.cols()) {
            return Err(SdpError::Malformed(format!("{name}: shape mismatch")));
        }
        let mut per_entry: BTreeMap<(usize, usize), (Linear, Linear)> = BTreeMap::new();
        for (k, entries) in expr.merged() {
            for ((r, c), v) in entries {
                let (re, im) = per_entry.entry((r, c)).or_default();
                if k == CONSTANT {
                    re.constant += v.re;
                    im.constant += v.im;
                } else {
                    *re.coeffs.entry(k).or_insert(0.0) += v.re;
                    *im.coeffs.entry(k).or_insert(0.0) += v.im;
                }
            }
        }
        for r in 0..rhs.rows() {
            for c in 0..rhs.cols() {
                let (re, im) = per_entry.remove(&(r, c)).unwrap_or_default();
                let t = rhs[(r, c)];
                self.equal(&format!("{name}[{r},{c}].re"), &re, t.re);
                self.equal(&format!("{name}[{r},{c}].im"), &im, t.im);
            }
        }
        Ok(())
    }

    pub fn set_objective(&mut self, sense: Sense, f: Linear) {
        self.objective = Some((sense, f));
    }

    /// Solves the equalities by row reduction, expressing every variable as
    /// an affine function of the free (non-pivot) variables.
    fn eliminate(&self) -> Result<(Vec<Substitution>, usize), SdpError> {
        let n = self.names.len();
        let mut involved: Vec<usize> = self
            .equalities
            .iter()
            .flat_map(|(_, f)| f.coeffs.iter().filter(|(_, &v)| v != 0.0).map(|(&k, _)| k))
            .collect();
        involved.sort_unstable();
        involved.dedup();
        let col_of: BTreeMap<usize, usize> = involved.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let w = involved.len();
        let mut rows: Vec<(Vec<f64>, f64, &str)> = self
            .equalities
            .iter()
            .map(|(name, f)| {
                let mut row = vec![0.0; w];
                for (k, v) in &f.coeffs {
                    if *v != 0.0 {
                        row[col_of[k]] = *v;
                    }
                }
                (row, -f.constant, name.as_str())
            })
            .collect();

        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut next = 0;
        for col in 0..w {
            let Some(p) = (next..rows.len())
                .filter(|&i| rows[i].0[col].abs() > 1e-12)
                .max_by(|&a, &b| rows[a].0[col].abs().total_cmp(&rows[b].0[col].abs()))
            else {
                continue;
            };
            rows.swap(next, p);
            let piv = rows[next].0[col];
            for v in rows[next].0.iter_mut() {
                *v /= piv;
            }
            rows[next].1 /= piv;
            let (pivot_row, pivot_rhs) = (rows[next].0.clone(), rows[next].1);
            for (i, row) in rows.iter_mut().enumerate() {
                if i == next {
                    continue;
                }
                let f = row.0[col];
                if f != 0.0 {
                    for (a, b) in row.0.iter_mut().zip(&pivot_row) {
                        *a -= f * b;
                    }
                    row.1 -= f * pivot_rhs;
                }
            }
            pivots.push((next, col));
            next += 1;
        }
        for (row, rhs, name) in &rows[next..] {
            let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rhs.abs() > 1e-9 * (1.0 + scale) {
                return Err(SdpError::InconsistentEqualities(rhs.abs()));
            }
            if self.equalities.iter().any(|(n, f)| n == name && f.coeffs.values().any(|&v| v != 0.0)) {
                log::debug!("dropping dependent equality {name}");
            }
        }

        let pivot_cols: BTreeMap<usize, usize> = pivots.iter().map(|&(r, c)| (c, r)).collect();
        let mut free_index = vec![usize::MAX; n];
        let mut num_free = 0;
        for (k, slot) in free_index.iter_mut().enumerate() {
            let is_pivot = col_of.get(&k).is_some_and(|c| pivot_cols.contains_key(c));
            if !is_pivot {
                *slot = num_free;
                num_free += 1;
            }
        }
        let subs = (0..n)
            .map(|k| {
                if free_index[k] != usize::MAX {
                    return Substitution {
                        constant: 0.0,
                        terms: vec![(free_index[k], 1.0)],
                    };
                }
                let r = pivot_cols[&col_of[&k]];
                let (row, rhs, _) = &rows[r];
                let terms = row
                    .iter()
                    .enumerate()
                    .filter(|&(c, &v)| v.abs() > 1e-15 && !pivot_cols.contains_key(&c))
                    .map(|(c, &v)| (free_index[involved[c]], -v))
                    .collect();
                Substitution { constant: *rhs, terms }
            })
            .collect();
        Ok((subs, num_free))
    }

    fn canonicalize(&self) -> Result<Canonical, SdpError> {
        let (sense, objective) = self
            .objective
            .clone()
            .ok_or_else(|| SdpError::Malformed("program has no objective".into()))?;
        if self.lmis.is_empty() {
            return Err(SdpError::Malformed("program has no LMI".into()));
        }
        let (subs, num_free) = self.eliminate()?;

        let mut a = vec![SparseSymmetric::new(); num_free];
        let mut used = vec![false; num_free];
        let mut c = SparseSymmetric::new();
        let mut sizes = Vec::with_capacity(self.lmis.len());
        let mut complex_blocks = Vec::with_capacity(self.lmis.len());

        for (block, lmi) in self.lmis.iter().enumerate() {
            let n = lmi.expr.rows;
            let mut constant: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
            let mut per_free: BTreeMap<usize, BTreeMap<(usize, usize), Complex64>> = BTreeMap::new();
            for (k, entries) in lmi.expr.merged() {
                if k == CONSTANT {
                    for (rc, v) in entries {
                        *constant.entry(rc).or_default() += v;
                    }
                    continue;
                }
                let sub = &subs[k];
                if sub.constant != 0.0 {
                    for (&rc, &v) in &entries {
                        *constant.entry(rc).or_default() += v * sub.constant;
                    }
                }
                for &(f, coef) in &sub.terms {
                    let target = per_free.entry(f).or_default();
                    for (&rc, &v) in &entries {
                        *target.entry(rc).or_default() += v * coef;
                    }
                }
            }
            let scale = per_free
                .values()
                .chain(std::iter::once(&constant))
                .flat_map(|m| m.values())
                .fold(0.0f64, |m, v| m.max(v.norm()));
            let cutoff = 1e-14 * scale.max(1e-300);
            let is_complex = per_free
                .values()
                .chain(std::iter::once(&constant))
                .flat_map(|m| m.values())
                .any(|v| v.im.abs() > cutoff);
            complex_blocks.push(is_complex);
            sizes.push(if is_complex { 2 * n } else { n });

            let embed = |target: &mut SparseSymmetric, m: &BTreeMap<(usize, usize), Complex64>, sign: f64| {
                for (&(r, col), &v) in m {
                    if v.norm() <= cutoff {
                        continue;
                    }
                    if r <= col {
                        target.add(block, r, col, sign * v.re);
                        if is_complex {
                            target.add(block, r + n, col + n, sign * v.re);
                        }
                    }
                    if is_complex {
                        target.add(block, r, col + n, -sign * v.im);
                    }
                }
            };
            embed(&mut c, &constant, 1.0);
            for (f, m) in &per_free {
                let before = a[*f].nnz();
                embed(&mut a[*f], m, -1.0);
                if a[*f].nnz() > before {
                    used[*f] = true;
                }
            }
        }

        let sign = match sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let mut obj = vec![0.0; num_free];
        let mut objective_constant = objective.constant;
        for (&k, &v) in &objective.coeffs {
            objective_constant += v * subs[k].constant;
            for &(f, coef) in &subs[k].terms {
                obj[f] += v * coef;
            }
        }
        let obj_scale = obj.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut problem = SdpProblem::new(sizes);
        problem.objective = c;
        let mut free_to_row = vec![None; num_free];
        let free_names: Vec<String> = {
            let mut names = vec![String::new(); num_free];
            for (k, s) in subs.iter().enumerate() {
                if s.constant == 0.0 && s.terms.len() == 1 && s.terms[0].1 == 1.0 && names[s.terms[0].0].is_empty() {
                    names[s.terms[0].0] = self.names[k].clone();
                }
            }
            names
        };
        for (f, matrix) in a.into_iter().enumerate() {
            if !used[f] {
                if obj[f].abs() > 1e-12 * (1.0 + obj_scale) {
                    return Err(SdpError::Unbounded(free_names[f].clone()));
                }
                continue;
            }
            free_to_row[f] = Some(problem.constraints.len());
            problem.add_constraint(matrix, sign * obj[f], Some(free_names[f].clone()));
        }
        Ok(Canonical {
            problem,
            subs,
            free_to_row,
            sign,
            objective_constant,
            complex_blocks,
        })
    }

    /// The standard-form problem this program is solved as.
    pub fn standard_form(&self) -> Result<SdpProblem, SdpError> {
        Ok(self.canonicalize()?.problem)
    }

    /// Checks a hand-built certificate: variable values `values` and one
    /// Hermitian multiplier per LMI.
    pub fn check_certificate(&self, values: &[f64], multipliers: &[Matrix]) -> Result<CertificateCheck, SdpError> {
        let canon = self.canonicalize()?;
        if values.len() != self.names.len() || multipliers.len() != self.lmis.len() {
            return Err(SdpError::Malformed("certificate has the wrong number of parts".into()));
        }
        let mut y = vec![0.0; canon.problem.constraints.len()];
        for (k, sub) in canon.subs.iter().enumerate() {
            if let [(f, coef)] = sub.terms[..] {
                if sub.constant == 0.0 && coef == 1.0 {
                    if let Some(row) = canon.free_to_row[f] {
                        y[row] = values[k];
                    }
                }
            }
        }
        let x = BlockMatrix {
            blocks: multipliers
                .iter()
                .zip(&canon.complex_blocks)
                .map(|(z, &cx)| {
                    let n = z.rows();
                    if cx {
                        faer::Mat::from_fn(2 * n, 2 * n, |i, j| {
                            let (bi, bj) = (i / n, j / n);
                            let v = z[(i % n, j % n)];
                            0.5 * match (bi, bj) {
                                (0, 0) | (1, 1) => v.re,
                                (1, 0) => v.im,
                                _ => -v.im,
                            }
                        })
                    } else {
                        faer::Mat::from_fn(n, n, |i, j| z[(i, j)].re)
                    }
                })
                .collect(),
        };
        let mut s = canon.problem.objective.to_dense(&canon.problem.block_sizes);
        for (con, &yi) in canon.problem.constraints.iter().zip(&y) {
            for (b, r, c, v) in con.matrix.entries() {
                s.blocks[b][(r, c)] -= yi * v;
                if r != c {
                    s.blocks[b][(c, r)] -= yi * v;
                }
            }
        }
        let sol = SdpSolution {
            status: SolveStatus::Optimal,
            primal_value: canon.problem.objective.dot(&x),
            dual_value: canon.problem.constraints.iter().zip(&y).map(|(c, y)| c.rhs * y).sum(),
            x,
            y,
            s,
            iterations: 0,
            residuals: Residuals {
                primal: 0.0,
                dual: 0.0,
                gap: 0.0,
            },
            dropped: Vec::new(),
        };
        Ok(CertificateCheck {
            residuals: residuals(&canon.problem, &sol),
            min_eig_multipliers: sol.x.min_eigenvalue(),
            min_eig_lmis: sol.s.min_eigenvalue(),
        })
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<ProgramSolution, SdpError> {
        let canon = self.canonicalize()?;
        let sol = solve(&canon.problem, settings)?;
        let free: Vec<f64> = canon
            .free_to_row
            .iter()
            .map(|row| row.map_or(0.0, |i| sol.y[i]))
            .collect();
        let values: Vec<f64> = canon
            .subs
            .iter()
            .map(|s| s.constant + s.terms.iter().map(|&(f, c)| c * free[f]).sum::<f64>())
            .collect();
        let multipliers = self
            .lmis
            .iter()
            .zip(&canon.complex_blocks)
            .zip(&sol.x.blocks)
            .map(|((lmi, &cx), x)| {
                let n = lmi.expr.rows;
                if cx {
                    Matrix::from_fn(n, n, |i, j| {
                        Complex64::new(x[(i, j)] + x[(i + n, j + n)], x[(i + n, j)] - x[(i, j + n)])
                    })
                } else {
                    Matrix::from_fn(n, n, |i, j| Complex64::new(x[(i, j)], 0.0))
                }
            })
            .collect();
        Ok(ProgramSolution {
            status: sol.status,
            value: canon.sign * sol.dual_value + canon.objective_constant,
            bound: canon.sign * sol.primal_value + canon.objective_constant,
            iterations: sol.iterations,
            residuals: sol.residuals,
            values,
            multipliers,
        })
    }
}
