//! Quantum channels as Kraus lists, their Choi matrices and Kraus-space
//! support projectors, plus the channel families used throughout the crate.

use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    hermitian_eig, kron, partial_trace, support_decomposition, BipartiteShape, HermitianTol, LinalgError, Matrix,
    Subsystem,
};

/// Maximum trace-preservation residual accepted for a Kraus list.
pub const TP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("Kraus list is empty")]
    Empty,
    #[error("Kraus operator {index} is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    ShapeMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("channel is not trace preserving: max |Σ E†E − 1| = {residual:.3e}")]
    NotTracePreserving { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed channel file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A completely positive trace-preserving map `ρ ↦ Σ_k E_k ρ E_k†`.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    name: String,
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<Matrix>,
    tp_residual: f64,
}

/// Unnormalized Choi matrix `J_AB = Σ_ij |i⟩⟨j| ⊗ N(|i⟩⟨j|)`.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    pub matrix: Matrix,
    pub shape: BipartiteShape,
}

/// Projector onto the support of the Choi matrix, which depends only on
/// the span of the Kraus operators.
#[derive(Debug, Clone)]
pub struct KrausSupport {
    pub projector: Matrix,
    /// Orthonormal basis of the complement of the support, as columns.
    pub complement: Matrix,
    pub shape: BipartiteShape,
    pub rank: usize,
}

impl QuantumChannel {
    pub fn from_kraus(kraus: Vec<Matrix>, name: impl Into<String>) -> Result<Self, ChannelError> {
        let first = kraus.first().ok_or(ChannelError::Empty)?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        for (index, e) in kraus.iter().enumerate() {
            if e.rows() != dim_out || e.cols() != dim_in {
                return Err(ChannelError::ShapeMismatch {
                    index,
                    rows: e.rows(),
                    cols: e.cols(),
                    expected_rows: dim_out,
                    expected_cols: dim_in,
                });
            }
        }
        let mut gram = Matrix::zeros(dim_in, dim_in);
        for e in &kraus {
            gram = &gram + &(&e.adjoint() * e);
        }
        let tp_residual = gram.max_abs_diff(&Matrix::identity(dim_in));
        if tp_residual > TP_TOLERANCE {
            return Err(ChannelError::NotTracePreserving { residual: tp_residual });
        }
        Ok(Self {
            name: name.into(),
            dim_in,
            dim_out,
            kraus,
            tp_residual,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[Matrix] {
        &self.kraus
    }

    /// `max |Σ E†E − 1|` measured at construction.
    pub fn tp_residual(&self) -> f64 {
        self.tp_residual
    }

    pub fn shape(&self) -> BipartiteShape {
        BipartiteShape::new(self.dim_in, self.dim_out)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn apply(&self, rho: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.dim_out, self.dim_out);
        for e in &self.kraus {
            out = &out + &(&(e * rho) * &e.adjoint());
        }
        out
    }

    pub fn choi(&self) -> ChoiMatrix {
        let shape = self.shape();
        let n = shape.side();
        let mut j = Matrix::zeros(n, n);
        for e in &self.kraus {
            let v = vectorize(e);
            for r in 0..n {
                if v[r] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    j[(r, c)] += v[r] * v[c].conj();
                }
            }
        }
        ChoiMatrix { matrix: j, shape }
    }

    pub fn kraus_support(&self, rank_tol: f64) -> Result<KrausSupport, ChannelError> {
        let choi = self.choi();
        let (projector, complement, rank) = support_decomposition(&choi.matrix, rank_tol)?;
        Ok(KrausSupport {
            projector,
            complement,
            shape: choi.shape,
            rank,
        })
    }

    /// `N ⊗ M` with Kraus operators `E_i ⊗ F_j`.
    pub fn tensor(&self, other: &QuantumChannel) -> QuantumChannel {
        let kraus = self
            .kraus
            .iter()
            .flat_map(|e| other.kraus.iter().map(move |f| kron(e, f)))
            .collect();
        let name = format!("{}⊗{}", self.name, other.name);
        QuantumChannel::from_kraus(kraus, name).expect("tensor product of channels is a channel")
    }

    /// True when every Kraus entry is real.
    pub fn is_real(&self) -> bool {
        self.kraus.iter().all(|e| e.max_imag() == 0.0)
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            name: self.name.clone(),
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            kraus: self
                .kraus
                .iter()
                .map(|e| {
                    (0..e.rows())
                        .map(|i| (0..e.cols()).map(|j| [e[(i, j)].re, e[(i, j)].im]).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ChannelError> {
        let file: ChannelFile = serde_json::from_str(text).map_err(|e| ChannelError::Format(e.to_string()))?;
        file.into_channel()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChannelError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

impl ChoiMatrix {
    pub fn is_real(&self) -> bool {
        self.matrix.max_imag() <= 1e-14 * self.matrix.max_abs().max(1.0)
    }

    /// `max |tr_B J − 1_A|`.
    pub fn trace_preservation_residual(&self) -> f64 {
        let reduced = partial_trace(&self.matrix, self.shape, Subsystem::B).expect("Choi matrix matches its shape");
        reduced.max_abs_diff(&Matrix::identity(self.shape.da))
    }

    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        Ok(hermitian_eig(&self.matrix, HermitianTol(1e-9))?.values[0])
    }
}

/// On-disk channel description: each Kraus operator is a row-major list of
/// rows, each entry an `[re, im]` pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelFile {
    pub name: String,
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

impl ChannelFile {
    pub fn into_channel(self) -> Result<QuantumChannel, ChannelError> {
        let mut ops = Vec::with_capacity(self.kraus.len());
        for (index, rows) in self.kraus.iter().enumerate() {
            if rows.len() != self.dim_out || rows.iter().any(|r| r.len() != self.dim_in) {
                return Err(ChannelError::Format(format!(
                    "Kraus operator {index} is not {}x{}",
                    self.dim_out, self.dim_in
                )));
            }
            let data = rows
                .iter()
                .flat_map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)))
                .collect();
            ops.push(Matrix::from_vec(self.dim_out, self.dim_in, data)?);
        }
        QuantumChannel::from_kraus(ops, self.name)
    }
}

/// `(1 ⊗ E)|Φ⟩` in A-major order: component `(a, b)` is `E[b, a]`.
fn vectorize(e: &Matrix) -> Vec<Complex64> {
    let (db, da) = (e.rows(), e.cols());
    let mut v = Vec::with_capacity(da * db);
    for a in 0..da {
        for b in 0..db {
            v.push(e[(b, a)]);
        }
    }
    v
}

/// Reorders `J₁ ⊗ J₂` from `A₁B₁A₂B₂` to `(A₁A₂)(B₁B₂)`, giving the Choi
/// matrix of `N₁ ⊗ N₂`.
pub fn product_choi(j1: &ChoiMatrix, j2: &ChoiMatrix) -> ChoiMatrix {
    let (s1, s2) = (j1.shape, j2.shape);
    let joint = BipartiteShape::new(s1.da * s2.da, s1.db * s2.db);
    let raw = kron(&j1.matrix, &j2.matrix);
    // index in (A1A2)(B1B2) order -> index in A1B1A2B2 order
    let to_raw = |idx: usize| {
        let (a, b) = (idx / joint.db, idx % joint.db);
        let (a1, a2) = (a / s2.da, a % s2.da);
        let (b1, b2) = (b / s2.db, b % s2.db);
        (a1 * s1.db + b1) * s2.side() + a2 * s2.db + b2
    };
    let n = joint.side();
    let matrix = Matrix::from_fn(n, n, |r, c| raw[(to_raw(r), to_raw(c))]);
    ChoiMatrix { matrix, shape: joint }
}

/// Kraus operators `√λ_i · unvec(v_i)` from the spectral decomposition of a
/// Choi matrix.
pub fn kraus_from_choi(choi: &ChoiMatrix, rank_tol: f64) -> Result<Vec<Matrix>, ChannelError> {
    let eig = hermitian_eig(&choi.matrix, HermitianTol(1e-9))?;
    let BipartiteShape { da, db } = choi.shape;
    let scale = eig.values.last().copied().unwrap_or(0.0).max(1.0);
    let mut ops = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= rank_tol * scale {
            continue;
        }
        let s = lambda.sqrt();
        ops.push(Matrix::from_fn(db, da, |b, a| eig.vectors[(a * db + b, k)] * s));
    }
    Ok(ops)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ChannelError> {
    if cond {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter(msg()))
    }
}

/// Noiseless qudit channel `I_d`.
pub fn identity_channel(d: usize) -> Result<QuantumChannel, ChannelError> {
    require(d >= 1, || format!("identity channel needs d >= 1, got {d}"))?;
    QuantumChannel::from_kraus(vec![Matrix::identity(d)], format!("identity({d})"))
}

/// `ρ ↦ (1−p)ρ ⊕ p·tr(ρ)|e⟩⟨e|` with the flag `|e⟩ = |d⟩` adjoined.
pub fn erasure_channel(d: usize, p: f64) -> Result<QuantumChannel, ChannelError> {
    require(d >= 2, || format!("erasure channel needs d >= 2, got {d}"))?;
    require((0.0..=1.0).contains(&p), || format!("erasure probability {p} outside [0, 1]"))?;
    let mut kraus = Vec::with_capacity(d + 1);
    let keep = (1.0 - p).sqrt();
    kraus.push(Matrix::from_fn(d + 1, d, |i, j| {
        Complex64::new(if i == j { keep } else { 0.0 }, 0.0)
    }));
    for i in 0..d {
        kraus.push(Matrix::unit(d + 1, d, d, i).scale(p.sqrt()));
    }
    QuantumChannel::from_kraus(kraus, format!("erasure({d},{p})"))
}

/// `ρ ↦ (1·tr ρ − ρᵀ)/(d−1)`.
pub fn werner_holevo(d: usize) -> Result<QuantumChannel, ChannelError> {
    require(d >= 2, || format!("Werner-Holevo channel needs d >= 2, got {d}"))?;
    let n = d * d;
    let mut j = Matrix::identity(n);
    for i in 0..d {
        for k in 0..d {
            j[(i * d + k, k * d + i)] -= Complex64::new(1.0, 0.0);
        }
    }
    let choi = ChoiMatrix {
        matrix: j.scale(1.0 / (d as f64 - 1.0)),
        shape: BipartiteShape::new(d, d),
    };
    let kraus = kraus_from_choi(&choi, 1e-10)?;
    QuantumChannel::from_kraus(kraus, format!("werner({d})"))
}

/// Qutrit-to-qubit family with `E₀ = |0⟩⟨0| + √r|1⟩⟨1|`,
/// `E₁ = √(1−r)|0⟩⟨1| + |1⟩⟨2|`, `0 ≤ r ≤ 0.5`.
pub fn nr_channel(r: f64) -> Result<QuantumChannel, ChannelError> {
    require((0.0..=0.5).contains(&r), || format!("r = {r} outside [0, 0.5]"))?;
    let e0 = Matrix::from_real(2, 3, &[1.0, 0.0, 0.0, 0.0, r.sqrt(), 0.0])?;
    let e1 = Matrix::from_real(2, 3, &[0.0, (1.0 - r).sqrt(), 0.0, 0.0, 0.0, 1.0])?;
    QuantumChannel::from_kraus(vec![e0, e1], format!("nr({r})"))
}

/// `ρ ↦ Σ_i p_i U_i ρ U_i†` with strictly positive probabilities.
pub fn mixed_unitary(unitaries: &[Matrix], probs: &[f64]) -> Result<QuantumChannel, ChannelError> {
    require(!unitaries.is_empty(), || "no unitaries given".into())?;
    require(unitaries.len() == probs.len(), || {
        format!("{} unitaries but {} probabilities", unitaries.len(), probs.len())
    })?;
    require(probs.iter().all(|&p| p > 0.0), || "probabilities must be strictly positive".into())?;
    let total: f64 = probs.iter().sum();
    require((total - 1.0).abs() <= 1e-9, || format!("probabilities sum to {total}"))?;
    for (i, u) in unitaries.iter().enumerate() {
        require(u.is_square(), || format!("unitary {i} is not square"))?;
        let dev = (&u.adjoint() * u).max_abs_diff(&Matrix::identity(u.rows()));
        require(dev <= 1e-9, || format!("operator {i} is not unitary (deviation {dev:.2e})"))?;
    }
    let kraus = unitaries.iter().zip(probs).map(|(u, &p)| u.scale(p.sqrt())).collect();
    QuantumChannel::from_kraus(kraus, "mixed-unitary")
}

/// Channel from a Haar-random isometry `C^{dIn} → C^{dOut} ⊗ C^{rank}`,
/// deterministic in `seed`.
pub fn random_channel(dim_in: usize, dim_out: usize, kraus_rank: usize, seed: u64) -> Result<QuantumChannel, ChannelError> {
    require(dim_in >= 1 && dim_out >= 1, || "dimensions must be positive".into())?;
    require(kraus_rank >= 1 && kraus_rank <= dim_in * dim_out, || {
        format!("Kraus rank {kraus_rank} outside [1, {}]", dim_in * dim_out)
    })?;
    require(dim_out * kraus_rank >= dim_in, || {
        format!("an isometry needs dim_out·rank >= dim_in ({dim_out}·{kraus_rank} < {dim_in})")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = dim_out * kraus_rank;
    let mut cols: Vec<Vec<Complex64>> = (0..dim_in)
        .map(|_| {
            (0..rows)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    // Modified Gram-Schmidt: R has a positive diagonal, so Q is Haar distributed.
    for j in 0..dim_in {
        for i in 0..j {
            let proj: Complex64 = cols[i].iter().zip(&cols[j]).map(|(q, v)| q.conj() * v).sum();
            let qi = cols[i].clone();
            for (v, q) in cols[j].iter_mut().zip(&qi) {
                *v -= proj * q;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    let kraus = (0..kraus_rank)
        .map(|k| Matrix::from_fn(dim_out, dim_in, |b, a| cols[a][k * dim_out + b]))
        .collect();
    QuantumChannel::from_kraus(kraus, format!("random({dim_in},{dim_out},{kraus_rank},{seed})"))
}
