use std::collections::BTreeMap;
use std::io::{self, Write};

use faer::Mat;

use super::SdpError;

/// Symmetric block-diagonal matrix stored by its upper-triangle nonzeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSymmetric {
    entries: BTreeMap<(usize, usize, usize), f64>,
}

impl SparseSymmetric {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` at `(row, col)` and its mirror in `block`. Repeated
    /// additions accumulate.
    pub fn add(&mut self, block: usize, row: usize, col: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let key = (block, row.min(col), row.max(col));
        *self.entries.entry(key).or_insert(0.0) += value;
    }

    pub fn with(mut self, block: usize, row: usize, col: usize, value: f64) -> Self {
        self.add(block, row, col, value);
        self
    }

    /// Upper-triangle entries `(block, row, col, value)` with `row <= col`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.entries
            .iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|(&(b, r, c), &v)| (b, r, c, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `⟨self, x⟩ = Σ_k tr(self_k x_k)`.
    pub fn dot(&self, x: &BlockMatrix) -> f64 {
        self.entries()
            .map(|(b, r, c, v)| {
                if r == c {
                    v * x.blocks[b][(r, r)]
                } else {
                    v * (x.blocks[b][(r, c)] + x.blocks[b][(c, r)])
                }
            })
            .sum()
    }

    pub fn to_dense(&self, sizes: &[usize]) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(sizes);
        for (b, r, c, v) in self.entries() {
            out.blocks[b][(r, c)] += v;
            if r != c {
                out.blocks[b][(c, r)] += v;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub matrix: SparseSymmetric,
    pub rhs: f64,
    pub name: Option<String>,
}

/// `minimize ⟨C, X⟩  s.t. ⟨A_i, X⟩ = b_i, X ⪰ 0` over block-diagonal `X`.
///
/// The dual is `maximize b·y  s.t. C − Σ y_i A_i = S ⪰ 0`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub objective: SparseSymmetric,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(block_sizes: Vec<usize>) -> Self {
        Self {
            block_sizes,
            objective: SparseSymmetric::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_constraint(&mut self, matrix: SparseSymmetric, rhs: f64, name: Option<String>) {
        self.constraints.push(Constraint { matrix, rhs, name });
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.block_sizes.iter().any(|&s| s == 0) {
            return Err(SdpError::Malformed("zero-sized block".into()));
        }
        if self.constraints.is_empty() {
            return Err(SdpError::Malformed("problem has no constraints".into()));
        }
        let check = |what: &str, m: &SparseSymmetric| -> Result<(), SdpError> {
            for (b, _, c, v) in m.entries() {
                let size = *self
                    .block_sizes
                    .get(b)
                    .ok_or_else(|| SdpError::Malformed(format!("{what}: block {b} out of range")))?;
                if c >= size {
                    return Err(SdpError::Malformed(format!("{what}: index {c} outside block {b} of size {size}")));
                }
                if !v.is_finite() {
                    return Err(SdpError::Malformed(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        check("objective", &self.objective)?;
        for (i, con) in self.constraints.iter().enumerate() {
            let label = con.name.clone().unwrap_or_else(|| format!("constraint {i}"));
            check(&label, &con.matrix)?;
            if !con.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("{label}: non-finite right-hand side")));
            }
        }
        Ok(())
    }

    /// Writes the problem as plain text for cross-checking with external
    /// solvers.
    ///
    /// ```text
    /// # comment lines
    /// m <number of constraints>
    /// blocks <size_1> <size_2> ...
    /// b <b_1> <b_2> ...
    /// <matrix> <block> <row> <col> <value>
    /// ```
    ///
    /// One data line per upper-triangle nonzero; `matrix` is 0 for `C` and
    /// `i` for `A_i`; all indices are 1-based.
    pub fn write_sparse(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# min <C,X> s.t. <A_i,X> = b_i, X psd")?;
        writeln!(out, "m {}", self.constraints.len())?;
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(out, "blocks {}", sizes.join(" "))?;
        let rhs: Vec<String> = self.constraints.iter().map(|c| format!("{:e}", c.rhs)).collect();
        writeln!(out, "b {}", rhs.join(" "))?;
        for (b, r, c, v) in self.objective.entries() {
            writeln!(out, "0 {} {} {} {:e}", b + 1, r + 1, c + 1, v)?;
        }
        for (i, con) in self.constraints.iter().enumerate() {
            for (b, r, c, v) in con.matrix.entries() {
                writeln!(out, "{} {} {} {} {:e}", i + 1, b + 1, r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Dense symmetric block-diagonal matrix.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub blocks: Vec<Mat<f64>>,
}

impl BlockMatrix {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            blocks: sizes.iter().map(|&s| Mat::zeros(s, s)).collect(),
        }
    }

    pub fn identity(sizes: &[usize], scale: f64) -> Self {
        Self {
            blocks: sizes.iter().map(|&s| Mat::from_fn(s, s, |i, j| if i == j { scale } else { 0.0 })).collect(),
        }
    }

    pub fn dot(&self, other: &BlockMatrix) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let mut s = 0.0;
                for j in 0..a.ncols() {
                    for i in 0..a.nrows() {
                        s += a[(i, j)] * b[(i, j)];
                    }
                }
                s
            })
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.ncols()).flat_map(move |j| (0..b.nrows()).map(move |i| b[(i, j)].abs())))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                b.self_adjoint_eigenvalues(faer::Side::Lower)
                    .map(|v| v.first().copied().unwrap_or(f64::INFINITY))
                    .unwrap_or(f64::NAN)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn size(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }
}
