//! Dense complex linear algebra for bipartite operators.
//!
//! Bipartite operators on `A ⊗ B` use A-major ordering: the basis vector
//! `|a⟩|b⟩` sits at index `a * dB + b`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use faer::{Mat, Side};
pub use num_complex::Complex64;
use thiserror::Error;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPositive { eigenvalue: f64 },
    #[error("eigendecomposition failed to converge")]
    EigenFailure,
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::from_vec(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `|i⟩⟨j|` as a `rows × cols` matrix.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = ONE;
        m
    }

    /// `|v⟩⟨v|` for a column vector given as a slice.
    pub fn outer(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |h_ij − conj(h_ji)|`; infinite for non-square input.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest imaginary part of any entry.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Hilbert-Schmidt inner product `tr(self† other)`.
    pub fn inner(&self, other: &Matrix) -> Complex64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// `(self + self†)/2`.
    pub fn hermitian_part(&self) -> Matrix {
        let adj = self.adjoint();
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + adj[(i, j)]) * 0.5)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul of {}x{} by {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let row_out = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row_b = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in row_out.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub(crate) fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub(crate) fn to_faer_real(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].re)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

/// Local dimensions of a bipartite system `A ⊗ B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BipartiteShape {
    pub da: usize,
    pub db: usize,
}

impl BipartiteShape {
    pub fn new(da: usize, db: usize) -> Self {
        assert!(da >= 1 && db >= 1, "subsystem dimensions must be positive");
        Self { da, db }
    }

    /// Side length `dA·dB` of operators on the joint system.
    pub fn side(&self) -> usize {
        self.da * self.db
    }

    fn check(&self, m: &Matrix) -> Result<(), LinalgError> {
        if m.rows != self.side() || m.cols != self.side() {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {0}x{0} operator for shape ({1},{2}), got {3}x{4}",
                self.side(),
                self.da,
                self.db,
                m.rows,
                m.cols
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Absolute tolerance used when checking Hermiticity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianTol(pub f64);

impl Default for HermitianTol {
    fn default() -> Self {
        Self(1e-10)
    }
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = Matrix::zeros(rows, cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for ib in 0..b.rows {
                for jb in 0..b.cols {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = x * b[(ib, jb)];
                }
            }
        }
    }
    out
}

pub fn partial_trace(m: &Matrix, shape: BipartiteShape, system: Subsystem) -> Result<Matrix, LinalgError> {
    shape.check(m)?;
    let BipartiteShape { da, db } = shape;
    Ok(match system {
        Subsystem::A => Matrix::from_fn(db, db, |b1, b2| {
            (0..da).map(|a| m[(a * db + b1, a * db + b2)]).sum()
        }),
        Subsystem::B => Matrix::from_fn(da, da, |a1, a2| {
            (0..db).map(|b| m[(a1 * db + b, a2 * db + b)]).sum()
        }),
    })
}

pub fn partial_transpose(m: &Matrix, shape: BipartiteShape, system: Subsystem) -> Result<Matrix, LinalgError> {
    shape.check(m)?;
    let db = shape.db;
    let n = shape.side();
    Ok(Matrix::from_fn(n, n, |r, c| {
        let (a1, b1) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        match system {
            Subsystem::A => m[(a2 * db + b1, a1 * db + b2)],
            Subsystem::B => m[(a1 * db + b2, a2 * db + b1)],
        }
    }))
}

/// Unnormalized maximally entangled projector `|Φ⟩⟨Φ|`, `|Φ⟩ = Σ_i |ii⟩`.
pub fn max_entangled(d: usize) -> Matrix {
    let mut m = Matrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = ONE;
        }
    }
    m
}

/// Swap operator `Σ |ij⟩⟨ji|` on `C^d ⊗ C^d`.
pub fn swap(d: usize) -> Matrix {
    let mut m = Matrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + j, j * d + i)] = ONE;
        }
    }
    m
}

/// Spectral decomposition `h = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: Matrix,
}

impl HermitianEigen {
    /// `Σ_i f(λ_i) v_i v_i†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.vectors.rows;
        let mut out = Matrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

pub fn hermitian_eig(h: &Matrix, tol: HermitianTol) -> Result<HermitianEigen, LinalgError> {
    let asymmetry = h.hermitian_asymmetry();
    if asymmetry > tol.0 {
        return Err(LinalgError::NotHermitian { asymmetry });
    }
    let n = h.rows;
    if h.max_imag() == 0.0 {
        let evd = h
            .to_faer_real()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| LinalgError::EigenFailure)?;
        let values = (0..n).map(|i| evd.S()[i]).collect();
        let u = evd.U();
        let vectors = Matrix::from_fn(n, n, |i, j| Complex64::new(u[(i, j)], 0.0));
        return Ok(HermitianEigen { values, vectors });
    }
    let evd = h
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::EigenFailure)?;
    let values = (0..n).map(|i| evd.S()[i].re).collect();
    let u = evd.U();
    let vectors = Matrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok(HermitianEigen { values, vectors })
}

/// Splits `h = h₊ − h₋` with `h₊ h₋ = 0`, both positive semidefinite.
pub fn positive_negative_parts(h: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    let eig = hermitian_eig(h, HermitianTol::default())?;
    let plus = eig.reconstruct_with(|l| l.max(0.0));
    let minus = eig.reconstruct_with(|l| (-l).max(0.0));
    Ok((plus, minus))
}

/// Orthogonal projector onto the eigenspaces of `h` whose eigenvalue exceeds
/// `rank_tol · max(1, λ_max)`.
pub fn support_projector(h: &Matrix, rank_tol: f64) -> Result<Matrix, LinalgError> {
    Ok(support_decomposition(h, rank_tol)?.0)
}

/// Support projector together with an orthonormal basis (as columns) of its
/// complement.
pub fn support_decomposition(h: &Matrix, rank_tol: f64) -> Result<(Matrix, Matrix, usize), LinalgError> {
    let eig = hermitian_eig(h, HermitianTol(1e-8))?;
    let scale = eig.values.last().copied().unwrap_or(0.0).max(1.0);
    let threshold = rank_tol * scale;
    if let Some(&lowest) = eig.values.first() {
        if lowest < -10.0 * threshold {
            return Err(LinalgError::NotPositive { eigenvalue: lowest });
        }
    }
    let n = h.rows;
    let kernel: Vec<usize> = (0..n).filter(|&k| eig.values[k] <= threshold).collect();
    let rank = n - kernel.len();
    let projector = eig.reconstruct_with(|l| if l > threshold { 1.0 } else { 0.0 });
    let complement = Matrix::from_fn(n, kernel.len(), |i, j| eig.vectors[(i, kernel[j])]);
    Ok((projector, complement, rank))
}
