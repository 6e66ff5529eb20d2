//! Matrix-vector product oracles and query accounting.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::structures::{LevelFactors, TelescopingFactorization};

/// Black-box access to an `N x N` matrix through products with it and its
/// transpose. Each column of the input counts as one query.
pub trait MatvecOracle {
    fn dim(&self) -> usize;

    /// `A x` for an `N x s` block `x`.
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix>;

    /// `Aᵀ x` for an `N x s` block `x`.
    fn apply_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

impl<T: MatvecOracle + ?Sized> MatvecOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply(x)
    }

    fn apply_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply_transpose(x)
    }
}

pub(crate) fn check_input(dim: usize, x: &DenseMatrix) -> Result<()> {
    if x.rows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "oracle of dimension {dim} applied to {} rows",
            x.rows()
        )));
    }
    x.ensure_finite()
}

/// Oracle backed by an explicit matrix.
#[derive(Clone, Debug)]
pub struct DenseOracle {
    a: DenseMatrix,
}

impl DenseOracle {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("oracle matrix is {:?}", a.shape())));
        }
        a.ensure_finite()?;
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }
}

impl MatvecOracle for DenseOracle {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self.dim(), x)?;
        Ok(self.a.matmul(x))
    }

    fn apply_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self.dim(), x)?;
        Ok(self.a.t_matmul(x))
    }
}

impl MatvecOracle for TelescopingFactorization {
    fn dim(&self) -> usize {
        TelescopingFactorization::dim(self)
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(MatvecOracle::dim(self), x)?;
        Ok(TelescopingFactorization::apply(self, x))
    }

    fn apply_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(MatvecOracle::dim(self), x)?;
        Ok(TelescopingFactorization::apply_transpose(self, x))
    }
}

/// Forward and transpose single-vector query counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryCounts {
    pub forward: u64,
    pub transpose: u64,
}

impl QueryCounts {
    pub fn total(&self) -> u64 {
        self.forward + self.transpose
    }
}

/// Wraps an oracle and counts the columns it is applied to.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    forward: AtomicU64,
    transpose: AtomicU64,
}

impl<O: MatvecOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, forward: AtomicU64::new(0), transpose: AtomicU64::new(0) }
    }

    pub fn counts(&self) -> QueryCounts {
        QueryCounts {
            forward: self.forward.load(Ordering::Relaxed),
            transpose: self.transpose.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.forward.store(0, Ordering::Relaxed);
        self.transpose.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: MatvecOracle> MatvecOracle for CountingOracle<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let y = self.inner.apply(x)?;
        self.forward.fetch_add(x.cols() as u64, Ordering::Relaxed);
        Ok(y)
    }

    fn apply_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let y = self.inner.apply_transpose(x)?;
        self.transpose.fetch_add(x.cols() as u64, Ordering::Relaxed);
        Ok(y)
    }
}

/// Materializes the operator with `N` forward queries.
pub fn dense_from_oracle(oracle: &impl MatvecOracle) -> Result<DenseMatrix> {
    oracle.apply(&DenseMatrix::identity(oracle.dim()))
}

/// Levels `L, L−1, …` of a factorization still under construction.
#[derive(Clone, Debug)]
pub struct PartialFactorization {
    levels: usize,
    rank: usize,
    /// Finest first: `finest_first[0]` is level `L`.
    finest_first: Vec<LevelFactors>,
}

impl PartialFactorization {
    pub fn new(levels: usize, rank: usize) -> Self {
        Self { levels, rank, finest_first: Vec::with_capacity(levels) }
    }

    pub fn total_levels(&self) -> usize {
        self.levels
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Level whose factors come next; `0` once every level is present.
    pub fn next_level(&self) -> usize {
        self.levels - self.finest_first.len()
    }

    /// Dimension of `A^(next_level + 1)`.
    pub fn current_dim(&self) -> usize {
        (1 << (self.next_level() + 1)) * self.rank
    }

    /// Factors of level `level`, if already computed.
    pub fn level(&self, level: usize) -> Option<&LevelFactors> {
        if level > self.levels || level <= self.next_level() {
            return None;
        }
        self.finest_first.get(self.levels - level)
    }

    pub fn push(&mut self, lf: LevelFactors) -> Result<()> {
        let level = self.next_level();
        if level == 0 {
            return Err(Error::InvalidParameter("all levels already present".into()));
        }
        if lf.rank() != self.rank || lf.block_count() != 1 << level {
            return Err(Error::DimensionMismatch(format!(
                "level {level} expects {} blocks of rank {}, got {} of rank {}",
                1usize << level,
                self.rank,
                lf.block_count(),
                lf.rank()
            )));
        }
        self.finest_first.push(lf);
        Ok(())
    }

    pub fn finish(self, root: DenseMatrix) -> Result<TelescopingFactorization> {
        if self.next_level() != 0 {
            return Err(Error::InvalidParameter(format!(
                "factorization incomplete: level {} missing",
                self.next_level()
            )));
        }
        let mut levels = self.finest_first;
        levels.reverse();
        TelescopingFactorization::new(self.rank, levels, root)
    }
}

fn check_level_input(partial: &PartialFactorization, oracle: &impl MatvecOracle, x: &DenseMatrix) -> Result<()> {
    let top = (1usize << (partial.total_levels() + 1)) * partial.rank();
    if oracle.dim() != top {
        return Err(Error::DimensionMismatch(format!(
            "oracle dimension {} but factorization needs {top}",
            oracle.dim()
        )));
    }
    if x.rows() != partial.current_dim() {
        return Err(Error::DimensionMismatch(format!(
            "level input has {} rows, expected {}",
            x.rows(),
            partial.current_dim()
        )));
    }
    Ok(())
}

/// `A^(ℓ+1) x` where `ℓ = partial.next_level()`, using one forward query
/// per column of `x`.
///
/// Expands `x` through the computed `V` bases up to the full dimension,
/// applies the oracle, then compresses back down with
/// `y ← U^(m)ᵀ (y − D^(m) x_{m+1})`.
pub fn level_apply(partial: &PartialFactorization, oracle: &impl MatvecOracle, x: &DenseMatrix) -> Result<DenseMatrix> {
    check_level_input(partial, oracle, x)?;
    let mut inputs = Vec::with_capacity(partial.finest_first.len());
    let mut cur = x.clone();
    for lf in partial.finest_first.iter().rev() {
        let next = lf.v.apply(&cur);
        inputs.push(cur);
        cur = next;
    }
    let mut y = oracle.apply(&cur)?;
    let mut expanded = cur;
    for (lf, coarse) in partial.finest_first.iter().zip(inputs.into_iter().rev()) {
        y.sub_assign(&lf.d.apply(&expanded));
        y = lf.u.apply_transpose(&y);
        expanded = coarse;
    }
    Ok(y)
}

/// `(A^(ℓ+1))ᵀ x`, the transpose analogue of [`level_apply`].
pub fn level_apply_transpose(
    partial: &PartialFactorization,
    oracle: &impl MatvecOracle,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_level_input(partial, oracle, x)?;
    let mut inputs = Vec::with_capacity(partial.finest_first.len());
    let mut cur = x.clone();
    for lf in partial.finest_first.iter().rev() {
        let next = lf.u.apply(&cur);
        inputs.push(cur);
        cur = next;
    }
    let mut y = oracle.apply_transpose(&cur)?;
    let mut expanded = cur;
    for (lf, coarse) in partial.finest_first.iter().zip(inputs.into_iter().rev()) {
        y.sub_assign(&lf.d.apply_transpose(&expanded));
        y = lf.v.apply_transpose(&y);
        expanded = coarse;
    }
    Ok(y)
}
