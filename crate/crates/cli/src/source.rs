//! Operator sources for `--in`: a DMAT file or an inline generator spec.
//!
//! Spec syntax is `kind[:key=value,...]`, e.g. `banded:bandwidth=17,seed=3`
//! or `bie:a=0.3,w=5`. Sizes default to the conforming dimension.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hss_core::oracle::{DenseOracle, MatvecOracle};
use hss_core::structures::read_matrix;
use hss_core::testbed::{banded_inverse_oracle, bie_star, grid_schur_oracle, hard_instance, MatrixKind};
use hss_core::DenseMatrix;

pub struct Params {
    kind: MatrixKind,
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let kind: MatrixKind = kind.parse().map_err(|e: String| anyhow!(e))?;
        let mut values = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("expected key=value in {item:?}"))?;
            if values.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                bail!("duplicate parameter {k:?}");
            }
        }
        let allowed: &[&str] = match kind {
            MatrixKind::Banded => &["n", "bandwidth", "seed"],
            MatrixKind::Grid => &["rows"],
            MatrixKind::Bie => &["n", "a", "w"],
            MatrixKind::Hard => &["delta"],
        };
        if let Some(bad) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
            bail!("unknown parameter {bad:?} for {kind} (allowed: {})", allowed.join(", "));
        }
        Ok(Self { kind, values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("parameter {key}={v}: {e}")),
        }
    }

    /// Builds the operator for an HSS problem with `levels` and `rank`.
    pub fn build(&self, levels: usize, rank: usize) -> Result<Box<dyn MatvecOracle + Sync>> {
        let n = (1usize << (levels + 1)) * rank;
        Ok(match self.kind {
            MatrixKind::Banded => Box::new(banded_inverse_oracle(
                self.get("n", n)?,
                self.get("bandwidth", 2 * rank + 1)?,
                self.get("seed", 0u64)?,
            )?),
            MatrixKind::Grid => Box::new(grid_schur_oracle(self.get("rows", n)?)?),
            MatrixKind::Bie => Box::new(DenseOracle::new(bie_star(
                self.get("n", n)?,
                self.get("a", 0.3)?,
                self.get("w", 5u32)?,
            )?)?),
            MatrixKind::Hard => Box::new(DenseOracle::new(hard_instance(levels, self.get("delta", 0.1)?))?),
        })
    }
}

/// Treats `input` as a file if it exists, otherwise as a generator spec.
pub fn open(input: &str, levels: usize, rank: usize) -> Result<Box<dyn MatvecOracle + Sync>> {
    if Path::new(input).exists() {
        let m: DenseMatrix = read_matrix(input).with_context(|| format!("reading matrix {input}"))?;
        return Ok(Box::new(DenseOracle::new(m)?));
    }
    Params::parse(input)
        .with_context(|| format!("{input:?} is neither an existing file nor a generator spec"))?
        .build(levels, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        let p = Params::parse("banded:bandwidth=5, seed=2").unwrap();
        assert_eq!(p.build(2, 2).unwrap().dim(), 16);
        assert_eq!(Params::parse("grid:rows=12").unwrap().build(2, 2).unwrap().dim(), 12);
        assert!(Params::parse("banded:width=5").is_err());
        assert!(Params::parse("banded:seed=1,seed=2").is_err());
        assert!(Params::parse("sparse").is_err());
        assert!(Params::parse("hard:delta").is_err());
    }
}
