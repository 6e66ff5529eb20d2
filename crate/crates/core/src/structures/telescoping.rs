use super::block::BlockDiagonal;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Bases and diagonal blocks of one level: `U`, `V` hold `2^ℓ` blocks of
/// size `2k x k`, `D` holds `2^ℓ` blocks of size `2k x 2k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelFactors {
    pub u: BlockDiagonal,
    pub v: BlockDiagonal,
    pub d: BlockDiagonal,
}

impl LevelFactors {
    pub fn new(u: BlockDiagonal, v: BlockDiagonal, d: BlockDiagonal) -> Result<Self> {
        let nb = u.block_count();
        if v.block_count() != nb || d.block_count() != nb || nb == 0 {
            return Err(Error::DimensionMismatch(format!(
                "level factors with {nb}/{}/{} blocks",
                v.block_count(),
                d.block_count()
            )));
        }
        let (r, k) = u.block_shape();
        if r != 2 * k || v.block_shape() != (r, k) || d.block_shape() != (r, r) {
            return Err(Error::DimensionMismatch(format!(
                "level factor blocks U {:?}, V {:?}, D {:?}; expected (2k, k), (2k, k), (2k, 2k)",
                u.block_shape(),
                v.block_shape(),
                d.block_shape()
            )));
        }
        Ok(Self { u, v, d })
    }

    pub fn rank(&self) -> usize {
        self.u.block_shape().1
    }

    pub fn block_count(&self) -> usize {
        self.u.block_count()
    }

    /// Dimension of the matrix this level acts on.
    pub fn dim(&self) -> usize {
        2 * self.rank() * self.block_count()
    }

    /// `U B Vᵀ + D`.
    pub fn expand(&self, b: &DenseMatrix) -> DenseMatrix {
        let ub = self.u.apply(b);
        let mut out = self.v.apply(&ub.transpose()).transpose();
        self.d.add_to_diagonal(&mut out, 1.0);
        out
    }

    /// `Uᵀ (A − D) V`.
    pub fn compress(&self, a: &DenseMatrix) -> DenseMatrix {
        let mut shifted = a.clone();
        self.d.add_to_diagonal(&mut shifted, -1.0);
        let left = self.u.apply_transpose(&shifted);
        self.v.apply_transpose(&left.transpose()).transpose()
    }
}

/// Telescoping HSS factorization.
///
/// `B^(L+1) = B`, `B^(ℓ+1) = U^(ℓ) B^(ℓ) V^(ℓ)ᵀ + D^(ℓ)` for `ℓ = L..1`,
/// and `B^(1) = D^(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TelescopingFactorization {
    rank: usize,
    /// `levels[ℓ − 1]` holds level `ℓ`.
    levels: Vec<LevelFactors>,
    root: DenseMatrix,
}

impl TelescopingFactorization {
    /// `levels` is ordered coarsest first (`levels[0]` is level 1).
    pub fn new(rank: usize, levels: Vec<LevelFactors>, root: DenseMatrix) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be positive".into()));
        }
        for (idx, lf) in levels.iter().enumerate() {
            let level = idx + 1;
            if lf.rank() != rank || lf.block_count() != 1 << level {
                return Err(Error::DimensionMismatch(format!(
                    "level {level} has {} blocks of rank {}, expected {} of rank {rank}",
                    lf.block_count(),
                    lf.rank(),
                    1usize << level
                )));
            }
        }
        if root.shape() != (2 * rank, 2 * rank) {
            let n = 2 * rank;
            return Err(Error::DimensionMismatch(format!(
                "root block is {:?}, expected ({n}, {n})",
                root.shape()
            )));
        }
        Ok(Self { rank, levels, root })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        (1 << (self.levels.len() + 1)) * self.rank
    }

    /// Factors of level `level`, `1 ≤ level ≤ L`.
    pub fn level(&self, level: usize) -> &LevelFactors {
        assert!(level >= 1 && level <= self.levels.len(), "level {level} out of range");
        &self.levels[level - 1]
    }

    pub fn levels(&self) -> &[LevelFactors] {
        &self.levels
    }

    pub fn root(&self) -> &DenseMatrix {
        &self.root
    }

    /// Factorization of `B^(m+1)` built from levels `1..=m`.
    pub fn prefix(&self, m: usize) -> Self {
        assert!(m <= self.levels.len());
        Self { rank: self.rank, levels: self.levels[..m].to_vec(), root: self.root.clone() }
    }

    pub fn reconstruct_dense(&self) -> DenseMatrix {
        self.levels.iter().fold(self.root.clone(), |b, lf| lf.expand(&b))
    }

    /// `B x` in `O(N k)` per column.
    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.dim(), "factorization apply: row mismatch");
        let mut inputs = Vec::with_capacity(self.levels.len());
        let mut cur = x.clone();
        for lf in self.levels.iter().rev() {
            let next = lf.v.apply_transpose(&cur);
            inputs.push(cur);
            cur = next;
        }
        let mut y = self.root.matmul(&cur);
        for (lf, xin) in self.levels.iter().zip(inputs.iter().rev()) {
            let mut next = lf.u.apply(&y);
            next.add_assign(&lf.d.apply(xin));
            y = next;
        }
        y
    }

    /// `Bᵀ x`.
    pub fn apply_transpose(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.dim(), "factorization apply_transpose: row mismatch");
        let mut inputs = Vec::with_capacity(self.levels.len());
        let mut cur = x.clone();
        for lf in self.levels.iter().rev() {
            let next = lf.u.apply_transpose(&cur);
            inputs.push(cur);
            cur = next;
        }
        let mut y = self.root.t_matmul(&cur);
        for (lf, xin) in self.levels.iter().zip(inputs.iter().rev()) {
            let mut next = lf.v.apply(&y);
            next.add_assign(&lf.d.apply_transpose(xin));
            y = next;
        }
        y
    }

    /// Largest orthonormality defect over all `U` and `V` blocks.
    pub fn orthonormality_defect(&self) -> f64 {
        self.levels
            .iter()
            .map(|lf| lf.u.orthonormality_defect().max(lf.v.orthonormality_defect()))
            .fold(0.0, f64::max)
    }
}

/// One level of telescoping: `B = U X Vᵀ + D`.
#[derive(Clone, Debug, PartialEq)]
pub struct SssFactorization {
    pub factors: LevelFactors,
    pub x: DenseMatrix,
}

impl SssFactorization {
    pub fn new(factors: LevelFactors, x: DenseMatrix) -> Result<Self> {
        let n = factors.rank() * factors.block_count();
        if x.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix is {:?}, expected ({n}, {n})",
                x.shape()
            )));
        }
        Ok(Self { factors, x })
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.factors.expand(&self.x)
    }
}
