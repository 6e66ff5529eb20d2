//! Block low-rank plus sparse (BLR²) recovery from matrix-vector products.
//!
//! `B = U X Vᵀ + D` over a `b x b` block grid with blocks of size `m`:
//! `U`, `V` are block diagonal with `m x k` blocks and `D` is supported on
//! the blocks of a sparsity pattern `S`. With the diagonal pattern and
//! `m = 2k` this is one level of the HSS builder.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{nullspace_basis, right_pinv_apply, RngStream};
use crate::matrix::DenseMatrix;
use crate::matvec::{diagonal_constant, pcps_constant};
use crate::oracle::MatvecOracle;
use crate::sketch::{combine_diagonal_estimates, extract_basis, row_block, sample_test_matrices, BasisMethod};
use crate::structures::{BlockDiagonal, BlockPartition};

/// Set of dense blocks `(i, j)` on a `b x b` block grid (0-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    block_count: usize,
    entries: BTreeSet<(usize, usize)>,
}

impl SparsityPattern {
    pub fn new(block_count: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let entries: BTreeSet<_> = entries.into_iter().collect();
        if let Some(&(i, j)) = entries.iter().find(|&&(i, j)| i >= block_count || j >= block_count) {
            return Err(Error::InvalidParameter(format!(
                "pattern entry ({i}, {j}) outside a {block_count}x{block_count} block grid"
            )));
        }
        Ok(Self { block_count, entries })
    }

    pub fn diagonal(block_count: usize) -> Self {
        Self { block_count, entries: (0..block_count).map(|i| (i, i)).collect() }
    }

    pub fn tridiagonal(block_count: usize) -> Self {
        let entries = (0..block_count)
            .flat_map(|i| [i.wrapping_sub(1), i, i + 1].map(|j| (i, j)))
            .filter(|&(_, j)| j < block_count)
            .collect();
        Self { block_count, entries }
    }

    /// Parses `diag`, `tridiag`, or whitespace-separated 1-based `i j`
    /// pairs, one per line (`#` starts a comment).
    pub fn parse(spec: &str, block_count: usize) -> Result<Self> {
        match spec.trim() {
            "diag" => return Ok(Self::diagonal(block_count)),
            "tridiag" => return Ok(Self::tridiagonal(block_count)),
            _ => {}
        }
        let mut pairs = Vec::new();
        for (n, raw) in spec.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Config { line: n + 1, message };
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| bad(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            match nums[..] {
                [i, j] if i >= 1 && j >= 1 => pairs.push((i - 1, j - 1)),
                _ => return Err(bad(format!("expected two 1-based block indices, got {line:?}"))),
            }
        }
        Self::new(block_count, pairs)
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.contains(&(i, j))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }

    /// `{ j : (i, j) ∈ S }`, ascending.
    pub fn row(&self, i: usize) -> Vec<usize> {
        self.entries.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j).collect()
    }

    /// `{ i : (i, j) ∈ S }`, ascending.
    pub fn column(&self, j: usize) -> Vec<usize> {
        self.entries.iter().filter(|&&(_, c)| c == j).map(|&(i, _)| i).collect()
    }

    /// Largest number of pattern blocks in any block row or column.
    pub fn max_degree(&self) -> usize {
        (0..self.block_count).map(|i| self.row(i).len().max(self.column(i).len())).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Blr2Factorization {
    pub pattern: SparsityPattern,
    pub u: BlockDiagonal,
    pub v: BlockDiagonal,
    /// `bk x bk` coupling matrix.
    pub x: DenseMatrix,
    /// Dense blocks keyed by `(i, j) ∈ S`.
    pub d: BTreeMap<(usize, usize), DenseMatrix>,
}

impl Blr2Factorization {
    pub fn block_size(&self) -> usize {
        self.u.block_shape().0
    }

    pub fn dim(&self) -> usize {
        self.block_size() * self.pattern.block_count()
    }

    pub fn sparse_part(&self) -> DenseMatrix {
        let m = self.block_size();
        let mut out = DenseMatrix::zeros(self.dim(), self.dim());
        for (&(i, j), blk) in &self.d {
            out.set_submatrix(i * m, j * m, blk);
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let ux = self.u.apply(&self.x);
        let mut out = self.v.apply(&ux.transpose()).transpose();
        out.add_assign(&self.sparse_part());
        out
    }
}

/// Constants `(Γ_r, Γ_d)` of the BLR² error guarantee.
pub fn blr2_bounds(s: usize, k: usize, m: usize, max_degree: usize) -> Result<(f64, f64)> {
    let dense_rows = max_degree * m;
    if s < dense_rows + k + 2 {
        return Err(Error::InvalidParameter(format!(
            "sketch width {s} below s_max·m + k + 2 = {}",
            dense_rows + k + 2
        )));
    }
    Ok((pcps_constant(k, s - dense_rows)?, diagonal_constant(dense_rows, s)?))
}

fn stack_blocks(m: &DenseMatrix, part: &BlockPartition, idx: &[usize]) -> DenseMatrix {
    DenseMatrix::vstack(&idx.iter().map(|&j| row_block(m, part, j)).collect::<Vec<_>>())
}

/// BLR² recovery with `4s + bk` queries, test matrices drawn from `RngStream::new(seed)`.
pub fn blr2_from_matvecs(
    oracle: &impl MatvecOracle,
    pattern: &SparsityPattern,
    k: usize,
    s: usize,
    seed: u64,
) -> Result<Blr2Factorization> {
    blr2_from_matvecs_with_stream(oracle, pattern, k, s, &RngStream::new(seed), BasisMethod::SvdPcps)
}

/// As [`blr2_from_matvecs`], with an explicit stream and basis method.
/// Block `i` of each test matrix comes from `stream.block(i).role(r)`.
pub fn blr2_from_matvecs_with_stream(
    oracle: &impl MatvecOracle,
    pattern: &SparsityPattern,
    k: usize,
    s: usize,
    stream: &RngStream,
    basis: BasisMethod,
) -> Result<Blr2Factorization> {
    let b = pattern.block_count();
    let part = BlockPartition::uniform(oracle.dim(), b)?;
    let m = part.block_size();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("rank {k} must lie in 1..={m}")));
    }
    blr2_bounds(s, k, m, pattern.max_degree())?;

    let [omega, omega_t, psi, psi_t] = sample_test_matrices(stream, &part, s);
    let fwd = oracle.apply(&DenseMatrix::hstack(&[omega.clone(), omega_t.clone()]))?;
    let tr = oracle.apply_transpose(&DenseMatrix::hstack(&[psi.clone(), psi_t.clone()]))?;
    let (y, y_t) = (fwd.col_range(0, s), fwd.col_range(s, s));
    let (z, z_t) = (tr.col_range(0, s), tr.col_range(s, s));

    // Per block row: basis U_i and the raw estimate [A_ij]_{j ∈ R_i}.
    let rows: Vec<(DenseMatrix, DenseMatrix)> = (0..b)
        .into_par_iter()
        .map(|i| {
            let r = pattern.row(i);
            let p = nullspace_basis(&stack_blocks(&omega, &part, &r))?;
            let u = extract_basis(basis, &row_block(&y, &part, i), &p, k)?;
            let est = right_pinv_apply(&row_block(&y_t, &part, i), &stack_blocks(&omega_t, &part, &r))?;
            Ok((u, est))
        })
        .collect::<Result<_>>()?;
    // Per block column: basis V_j and the raw estimate [A_ijᵀ]_{i ∈ C_j}.
    let cols: Vec<(DenseMatrix, DenseMatrix)> = (0..b)
        .into_par_iter()
        .map(|j| {
            let c = pattern.column(j);
            let q = nullspace_basis(&stack_blocks(&psi, &part, &c))?;
            let v = extract_basis(basis, &row_block(&z, &part, j), &q, k)?;
            let est = right_pinv_apply(&row_block(&z_t, &part, j), &stack_blocks(&psi_t, &part, &c))?;
            Ok((v, est))
        })
        .collect::<Result<_>>()?;

    let mut d = BTreeMap::new();
    for (i, j) in pattern.entries() {
        let pos_j = pattern.row(i).iter().position(|&c| c == j).expect("j ∈ R_i");
        let pos_i = pattern.column(j).iter().position(|&r| r == i).expect("i ∈ C_j");
        let row_est = rows[i].1.col_range(pos_j * m, m);
        let col_est = cols[j].1.col_range(pos_i * m, m);
        d.insert((i, j), combine_diagonal_estimates(&rows[i].0, &cols[j].0, &row_est, &col_est)?);
    }

    let u = BlockDiagonal::new(rows.into_iter().map(|(u, _)| u).collect())?;
    let v = BlockDiagonal::new(cols.into_iter().map(|(v, _)| v).collect())?;

    // X = Uᵀ (A V − D V): b·k further forward queries.
    let dense_v = v.to_dense();
    let mut av = oracle.apply(&dense_v)?;
    let mut sparse = Blr2Factorization {
        pattern: pattern.clone(),
        u,
        v,
        x: DenseMatrix::zeros(b * k, b * k),
        d,
    };
    av.sub_assign(&sparse.sparse_part().matmul(&dense_v));
    sparse.x = sparse.u.apply_transpose(&av);
    Ok(sparse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::orthonormalize;
    use crate::oracle::{CountingOracle, DenseOracle};

    fn planted(pattern: &SparsityPattern, m: usize, k: usize, seed: u64) -> DenseMatrix {
        let st = RngStream::new(seed);
        let b = pattern.block_count();
        let basis = |tag| {
            let blocks = (0..b).map(|i| orthonormalize(&st.label(tag).block(i).gaussian(m, k))).collect();
            BlockDiagonal::new(blocks).unwrap()
        };
        let f = Blr2Factorization {
            pattern: pattern.clone(),
            u: basis(0),
            v: basis(1),
            x: st.label(2).gaussian(b * k, b * k),
            d: pattern.entries().map(|(i, j)| ((i, j), st.label(3).block(i * b + j).gaussian(m, m))).collect(),
        };
        f.reconstruct()
    }

    #[test]
    fn pattern_parsing() {
        let p = SparsityPattern::parse("1 1\n# comment\n2 3\n\n3 3 # tail\n", 3).unwrap();
        assert_eq!(p.entries().collect::<Vec<_>>(), vec![(0, 0), (1, 2), (2, 2)]);
        assert_eq!(p.column(2), vec![1, 2]);
        assert_eq!(p.max_degree(), 2);
        assert_eq!(SparsityPattern::parse("tridiag", 4).unwrap().max_degree(), 3);
        assert!(matches!(SparsityPattern::parse("1 1\n0 2\n", 3), Err(Error::Config { line: 2, .. })));
        assert!(SparsityPattern::parse("1 4\n", 3).is_err());
    }

    #[test]
    fn recovers_planted_blr2_exactly() {
        for (pattern, s) in [(SparsityPattern::diagonal(4), 6 + 2 + 2), (SparsityPattern::tridiagonal(4), 18 + 2 + 2)] {
            let a = planted(&pattern, 6, 2, 3);
            let o = CountingOracle::new(DenseOracle::new(a.clone()).unwrap());
            let f = blr2_from_matvecs(&o, &pattern, 2, s, 8).unwrap();
            let err = f.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
            assert!(err < 1e-9, "relative error {err}");
            assert_eq!(o.counts().forward as usize, 2 * s + 4 * 2);
            assert_eq!(o.counts().transpose as usize, 2 * s);
        }
    }

    #[test]
    fn rejects_narrow_sketch() {
        let o = DenseOracle::new(DenseMatrix::identity(24)).unwrap();
        assert!(blr2_from_matvecs(&o, &SparsityPattern::tridiagonal(4), 2, 21, 0).is_err());
    }
}
