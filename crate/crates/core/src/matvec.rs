//! HSS approximation from matrix-vector products only.
//!
//! The fresh-sketch builder draws new Gaussian test matrices at every level
//! and applies the implicitly compressed `A^(ℓ+1)` to them, for `4sL + 2k`
//! queries. The reused-sketch baseline draws once at the finest level and
//! compresses the sketches algebraically between levels, for `4s + 2k`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::RngStream;
use crate::matrix::DenseMatrix;
use crate::oracle::{level_apply, MatvecOracle, PartialFactorization};
use crate::sketch::{block_nullify, extract_basis, recover_diagonal, row_block, BasisMethod, SketchBundle};
use crate::structures::{BlockDiagonal, BlockPartition, LevelFactors, TelescopingFactorization};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SketchPolicy {
    /// New test matrices at every level.
    Fresh,
    /// One set of test matrices, compressed level to level.
    Reused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatvecConfig {
    pub levels: usize,
    pub rank: usize,
    pub sketch_width: usize,
    pub seed: u64,
    pub basis: BasisMethod,
    pub policy: SketchPolicy,
}

impl MatvecConfig {
    pub fn fresh(levels: usize, rank: usize, sketch_width: usize, seed: u64) -> Self {
        Self { levels, rank, sketch_width, seed, basis: BasisMethod::SvdPcps, policy: SketchPolicy::Fresh }
    }

    pub fn reused(levels: usize, rank: usize, sketch_width: usize, seed: u64, basis: BasisMethod) -> Self {
        Self { levels, rank, sketch_width, seed, basis, policy: SketchPolicy::Reused }
    }

    pub fn dim(&self) -> usize {
        (1 << (self.levels + 1)) * self.rank
    }

    fn validate(&self, oracle_dim: usize) -> Result<()> {
        let (l, k, s) = (self.levels, self.rank, self.sketch_width);
        if l == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!("levels {l} and rank {k} must be positive")));
        }
        if oracle_dim != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "oracle dimension {oracle_dim}, but {l} levels of rank {k} need {}",
                self.dim()
            )));
        }
        let min = match (self.policy, self.basis) {
            (SketchPolicy::Fresh, _) | (_, BasisMethod::SvdPcps) => 3 * k + 2,
            (SketchPolicy::Reused, BasisMethod::PivotedQr) => 3 * k,
        };
        if s < min {
            return Err(Error::InvalidParameter(format!(
                "sketch width {s} below the minimum {min} for rank {k}"
            )));
        }
        Ok(())
    }

    fn stream(&self) -> RngStream {
        RngStream::new(self.seed)
    }
}

/// Expected query count of a build: `(forward, transpose)` excluding the
/// `2k` root probes, which are forward queries.
pub fn expected_queries(cfg: &MatvecConfig) -> (u64, u64) {
    let s = cfg.sketch_width as u64;
    let per_side = match cfg.policy {
        SketchPolicy::Fresh => 2 * s * cfg.levels as u64,
        SketchPolicy::Reused => 2 * s,
    };
    (per_side, per_side)
}

/// Extracts `U`, `V`, `D` for every block of one level from its sketches.
pub fn level_from_bundle(bundle: &SketchBundle, level: usize, k: usize, basis: BasisMethod) -> Result<LevelFactors> {
    let part = BlockPartition::hss_level(level, k);
    if bundle.omega.rows() != part.dim() {
        return Err(Error::DimensionMismatch(format!(
            "sketch has {} rows, level {level} needs {}",
            bundle.omega.rows(),
            part.dim()
        )));
    }
    let blocks: Vec<[DenseMatrix; 3]> = (0..part.block_count())
        .into_par_iter()
        .map(|i| {
            let p = block_nullify(&bundle.omega, &part, i)?;
            let u = extract_basis(basis, &row_block(&bundle.y, &part, i), &p, k)?;
            let q = block_nullify(&bundle.psi, &part, i)?;
            let v = extract_basis(basis, &row_block(&bundle.z, &part, i), &q, k)?;
            let d = recover_diagonal(
                &u,
                &v,
                &row_block(&bundle.y_tilde, &part, i),
                &row_block(&bundle.omega_tilde, &part, i),
                &row_block(&bundle.z_tilde, &part, i),
                &row_block(&bundle.psi_tilde, &part, i),
            )?;
            Ok([u, v, d])
        })
        .collect::<Result<_>>()?;
    let (mut us, mut vs, mut ds) = (Vec::new(), Vec::new(), Vec::new());
    for [u, v, d] in blocks {
        us.push(u);
        vs.push(v);
        ds.push(d);
    }
    LevelFactors::new(BlockDiagonal::new(us)?, BlockDiagonal::new(vs)?, BlockDiagonal::new(ds)?)
}

/// One fresh-sketch level: samples, queries `A^(ℓ+1)` through the
/// recursion, and returns the new factors with the sketches used.
pub fn fresh_level(
    partial: &PartialFactorization,
    oracle: &impl MatvecOracle,
    cfg: &MatvecConfig,
) -> Result<(LevelFactors, SketchBundle)> {
    let level = partial.next_level();
    if level == 0 {
        return Err(Error::InvalidParameter("no level left to compute".into()));
    }
    let bundle = SketchBundle::acquire(partial, oracle, &cfg.stream().level(level), cfg.sketch_width)?;
    let factors = level_from_bundle(&bundle, level, cfg.rank, cfg.basis)?;
    Ok((factors, bundle))
}

/// `D^(0) = A^(1)` from `2k` forward probes.
pub fn recover_root(partial: &PartialFactorization, oracle: &impl MatvecOracle) -> Result<DenseMatrix> {
    if partial.next_level() != 0 {
        return Err(Error::InvalidParameter("root requested before all levels were computed".into()));
    }
    level_apply(partial, oracle, &DenseMatrix::identity(2 * partial.rank()))
}

/// Fresh Gaussian sketches at every level.
pub fn hss_from_matvecs_fresh(oracle: &impl MatvecOracle, cfg: &MatvecConfig) -> Result<TelescopingFactorization> {
    if cfg.policy != SketchPolicy::Fresh {
        return Err(Error::InvalidParameter("configuration does not request fresh sketches".into()));
    }
    cfg.validate(oracle.dim())?;
    let mut partial = PartialFactorization::new(cfg.levels, cfg.rank);
    while partial.next_level() > 0 {
        let (factors, _) = fresh_level(&partial, oracle, cfg)?;
        partial.push(factors)?;
    }
    let root = recover_root(&partial, oracle)?;
    partial.finish(root)
}

/// Sketches drawn once at the finest level and compressed between levels.
///
/// The finest-level test matrices are exactly those the fresh builder
/// would draw for level `L` with the same seed.
pub fn hss_from_matvecs_reused(oracle: &impl MatvecOracle, cfg: &MatvecConfig) -> Result<TelescopingFactorization> {
    if cfg.policy != SketchPolicy::Reused {
        return Err(Error::InvalidParameter("configuration does not request reused sketches".into()));
    }
    cfg.validate(oracle.dim())?;
    let mut partial = PartialFactorization::new(cfg.levels, cfg.rank);
    let mut bundle =
        SketchBundle::acquire(&partial, oracle, &cfg.stream().level(cfg.levels), cfg.sketch_width)?;
    while partial.next_level() > 0 {
        let factors = level_from_bundle(&bundle, partial.next_level(), cfg.rank, cfg.basis)?;
        bundle = compress_bundle(&bundle, &factors);
        partial.push(factors)?;
    }
    let root = recover_root(&partial, oracle)?;
    partial.finish(root)
}

/// Sketches of `Uᵀ(A − D)V` from sketches of `A`:
/// `Ω ← VᵀΩ`, `Y ← Uᵀ(Y − DΩ)`, `Ψ ← UᵀΨ`, `Z ← Vᵀ(Z − DᵀΨ)`.
pub fn compress_bundle(b: &SketchBundle, f: &LevelFactors) -> SketchBundle {
    let fwd = |y: &DenseMatrix, om: &DenseMatrix| f.u.apply_transpose(&y.sub(&f.d.apply(om)));
    let tr = |z: &DenseMatrix, ps: &DenseMatrix| f.v.apply_transpose(&z.sub(&f.d.apply_transpose(ps)));
    SketchBundle {
        y: fwd(&b.y, &b.omega),
        y_tilde: fwd(&b.y_tilde, &b.omega_tilde),
        z: tr(&b.z, &b.psi),
        z_tilde: tr(&b.z_tilde, &b.psi_tilde),
        omega: f.v.apply_transpose(&b.omega),
        omega_tilde: f.v.apply_transpose(&b.omega_tilde),
        psi: f.u.apply_transpose(&b.psi),
        psi_tilde: f.u.apply_transpose(&b.psi_tilde),
    }
}

/// Dispatches on `cfg.policy`.
pub fn hss_from_matvecs(oracle: &impl MatvecOracle, cfg: &MatvecConfig) -> Result<TelescopingFactorization> {
    match cfg.policy {
        SketchPolicy::Fresh => hss_from_matvecs_fresh(oracle, cfg),
        SketchPolicy::Reused => hss_from_matvecs_reused(oracle, cfg),
    }
}

/// Constants of the expected-error guarantee for the fresh builder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremBounds {
    pub gamma_r: f64,
    pub gamma_c: f64,
    pub gamma_d: f64,
    /// `(Γ_r + Γ_c)(1 + Γ_d) L`; expected squared error is at most this
    /// times the squared error of the best HSS approximation.
    pub factor: f64,
}

/// `(1 + 2e·q / √((q − k)² − 1))²`, the expected-error constant of the
/// nullified-sketch SVD basis with `q ≥ k + 2` projected columns.
pub fn pcps_constant(k: usize, q: usize) -> Result<f64> {
    if q < k + 2 {
        return Err(Error::InvalidParameter(format!("need q ≥ k + 2, got q = {q}, k = {k}")));
    }
    let gap = (q - k) as f64;
    let ratio = 2.0 * std::f64::consts::E * q as f64 / (gap * gap - 1.0).sqrt();
    Ok((1.0 + ratio).powi(2))
}

/// `m / (s − m − 1)`, the diagonal-recovery constant for blocks with `m`
/// rows and sketch width `s ≥ m + 2`.
pub fn diagonal_constant(m: usize, s: usize) -> Result<f64> {
    if s < m + 2 {
        return Err(Error::InvalidParameter(format!("need s ≥ m + 2, got s = {s}, m = {m}")));
    }
    Ok(m as f64 / (s - m - 1) as f64)
}

pub fn theorem_bounds(s: usize, k: usize, levels: usize) -> Result<TheoremBounds> {
    if s < 3 * k + 2 {
        return Err(Error::InvalidParameter(format!("need s ≥ 3k + 2, got s = {s}, k = {k}")));
    }
    let gamma_r = pcps_constant(k, s - 2 * k)?;
    let gamma_d = diagonal_constant(2 * k, s)?;
    Ok(TheoremBounds {
        gamma_r,
        gamma_c: gamma_r,
        gamma_d,
        factor: 2.0 * gamma_r * (1.0 + gamma_d) * levels as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{CountingOracle, DenseOracle, QueryCounts};
    use crate::testbed::random_hss;

    fn rel_err(t: &TelescopingFactorization, a: &DenseMatrix) -> f64 {
        t.reconstruct_dense().sub(a).frobenius_norm() / a.frobenius_norm()
    }

    #[test]
    fn fresh_recovers_exact_hss_and_counts_queries() {
        let a = random_hss(3, 2, 12).reconstruct_dense();
        let o = CountingOracle::new(DenseOracle::new(a.clone()).unwrap());
        let cfg = MatvecConfig::fresh(3, 2, 8, 1);
        let t = hss_from_matvecs_fresh(&o, &cfg).unwrap();
        assert!(rel_err(&t, &a) < 1e-10);
        assert_eq!(o.counts(), QueryCounts { forward: 2 * 8 * 3 + 4, transpose: 2 * 8 * 3 });
        assert_eq!(expected_queries(&cfg), (48, 48));
    }

    #[test]
    fn reused_recovers_exact_hss_with_both_bases() {
        let a = random_hss(3, 2, 13).reconstruct_dense();
        for basis in [BasisMethod::SvdPcps, BasisMethod::PivotedQr] {
            let o = CountingOracle::new(DenseOracle::new(a.clone()).unwrap());
            let t = hss_from_matvecs_reused(&o, &MatvecConfig::reused(3, 2, 8, 4, basis)).unwrap();
            assert!(rel_err(&t, &a) < 1e-10, "{basis:?}");
            assert_eq!(o.counts(), QueryCounts { forward: 16 + 4, transpose: 16 });
        }
    }

    #[test]
    fn reused_finest_level_matches_fresh() {
        let a = crate::kernels::RngStream::new(3).gaussian(32, 32);
        let o = DenseOracle::new(a).unwrap();
        let fresh = hss_from_matvecs_fresh(&o, &MatvecConfig::fresh(3, 2, 9, 77)).unwrap();
        let reused = hss_from_matvecs_reused(&o, &MatvecConfig::reused(3, 2, 9, 77, BasisMethod::SvdPcps)).unwrap();
        assert_eq!(fresh.level(3), reused.level(3));
        assert_ne!(fresh.level(2), reused.level(2));
    }

    #[test]
    fn config_validation() {
        let o = DenseOracle::new(DenseMatrix::identity(32)).unwrap();
        assert!(hss_from_matvecs_fresh(&o, &MatvecConfig::fresh(3, 2, 7, 0)).is_err());
        assert!(hss_from_matvecs_fresh(&o, &MatvecConfig::fresh(2, 2, 8, 0)).is_err());
        assert!(hss_from_matvecs_fresh(&o, &MatvecConfig::reused(3, 2, 8, 0, BasisMethod::SvdPcps)).is_err());
        assert!(hss_from_matvecs_reused(&o, &MatvecConfig::reused(3, 2, 6, 0, BasisMethod::PivotedQr)).is_ok());
    }

    #[test]
    fn bound_constants_follow_their_formulas() {
        let b = theorem_bounds(5, 1, 4).unwrap();
        // Γ_r = (1 + 6e/√3)², Γ_d = 2/2.
        let gr = (1.0 + 6.0 * std::f64::consts::E / 3f64.sqrt()).powi(2);
        assert!((b.gamma_r - gr).abs() < 1e-12 * gr);
        assert_eq!(b.gamma_d, 1.0);
        assert!((b.factor - 2.0 * gr * 2.0 * 4.0).abs() < 1e-9);
        assert!(theorem_bounds(4, 1, 4).is_err());
        assert!((diagonal_constant(4, 8).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(pcps_constant(5, 6).is_err());
    }
}
