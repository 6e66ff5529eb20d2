//! Parameter sweeps driven by a flat `key = value` config file.
//!
//! ```text
//! # banded inverse, three sketch widths
//! matrix = banded
//! levels = 6
//! rank = 8
//! bandwidth = 17
//! sketch_widths = 26, 34, 42
//! algorithms = fresh, reused-svd, reused-qr
//! trials = 10
//! seed = 1
//! ```
//!
//! The output is a pure function of the config when `timing = false`;
//! otherwise only the `wall_ms` column varies between runs.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    banded_inverse_oracle, bie_star, frobenius_error, grid_schur_oracle, hard_instance,
    hard_instance_reference,
};
use crate::error::{Error, Result};
use crate::greedy::hss_explicit_greedy;
use crate::matrix::DenseMatrix;
use crate::matvec::{hss_from_matvecs, MatvecConfig};
use crate::oracle::{dense_from_oracle, CountingOracle, DenseOracle, MatvecOracle};
use crate::sketch::BasisMethod;

pub const CSV_HEADER: &str = "matrix,algorithm,L,k,s,trial,seed,fwd_q,tr_q,rel_err,wall_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    /// Inverse of a random band matrix.
    Banded,
    /// Separator Schur complement of a `N x 51` grid Laplacian.
    Grid,
    /// Star-contour boundary integral operator.
    Bie,
    /// Adversarial instance for the explicit greedy method (`k = 1`).
    Hard,
}

impl FromStr for MatrixKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "banded" => Ok(Self::Banded),
            "grid" => Ok(Self::Grid),
            "bie" => Ok(Self::Bie),
            "hard" => Ok(Self::Hard),
            _ => Err(format!("unknown matrix {s:?} (expected banded, grid, bie or hard)")),
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Banded => "banded",
            Self::Grid => "grid",
            Self::Bie => "bie",
            Self::Hard => "hard",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Explicit,
    Fresh,
    ReusedSvd,
    ReusedQr,
    /// The all-`½` comparison matrix; hard instance only.
    Reference,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Explicit => "explicit",
            Self::Fresh => "fresh",
            Self::ReusedSvd => "reused-svd",
            Self::ReusedQr => "reused-qr",
            Self::Reference => "reference",
        }
    }

    pub fn uses_sketches(self) -> bool {
        matches!(self, Self::Fresh | Self::ReusedSvd | Self::ReusedQr)
    }

    pub fn matvec_config(self, levels: usize, rank: usize, s: usize, seed: u64) -> Option<MatvecConfig> {
        match self {
            Self::Fresh => Some(MatvecConfig::fresh(levels, rank, s, seed)),
            Self::ReusedSvd => Some(MatvecConfig::reused(levels, rank, s, seed, BasisMethod::SvdPcps)),
            Self::ReusedQr => Some(MatvecConfig::reused(levels, rank, s, seed, BasisMethod::PivotedQr)),
            Self::Explicit | Self::Reference => None,
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Self::Explicit, Self::Fresh, Self::ReusedSvd, Self::ReusedQr, Self::Reference]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Label for the `matrix` column; defaults to the matrix kind.
    pub name: String,
    pub matrix: MatrixKind,
    pub levels: usize,
    pub rank: usize,
    pub sketch_widths: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub seed: u64,
    /// Seed of the random test matrix (banded only); defaults to `seed`.
    pub matrix_seed: u64,
    /// Nonzero diagonals of the band matrix; defaults to `2k + 1`.
    pub bandwidth: usize,
    pub delta: f64,
    pub amplitude: f64,
    pub arms: u32,
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        (1 << (self.levels + 1)) * self.rank
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut name: Option<String> = None;
        let mut matrix: Option<MatrixKind> = None;
        let (mut levels, mut rank): (Option<usize>, Option<usize>) = (None, None);
        let mut sketch_widths: Vec<usize> = Vec::new();
        let mut algorithms: Vec<Algorithm> = Vec::new();
        let (mut trials, mut seed) = (1usize, 0u64);
        let (mut matrix_seed, mut bandwidth): (Option<u64>, Option<usize>) = (None, None);
        let (mut delta, mut amplitude, mut arms, mut timing) = (0.1f64, 0.3f64, 5u32, true);

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Config { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            fn one<T: FromStr>(v: &str) -> std::result::Result<T, String>
            where
                T::Err: fmt::Display,
            {
                v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
            }
            fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
            where
                T::Err: fmt::Display,
            {
                v.split(',').map(|t| one(t.trim())).collect()
            }
            let res: std::result::Result<(), String> = (|| {
                match key {
                    "name" => name = Some(value.to_string()),
                    "matrix" => matrix = Some(one(value)?),
                    "levels" => levels = Some(one(value)?),
                    "rank" => rank = Some(one(value)?),
                    "sketch_widths" => sketch_widths = list(value)?,
                    "algorithms" => algorithms = list(value)?,
                    "trials" => trials = one(value)?,
                    "seed" => seed = one(value)?,
                    "matrix_seed" => matrix_seed = Some(one(value)?),
                    "bandwidth" => bandwidth = Some(one(value)?),
                    "delta" => delta = one(value)?,
                    "amplitude" => amplitude = one(value)?,
                    "arms" => arms = one(value)?,
                    "timing" => timing = one(value)?,
                    _ => return Err(format!("unknown key {key:?}")),
                }
                Ok(())
            })();
            res.map_err(err)?;
        }

        let end = text.lines().count() + 1;
        let missing = |key: &str| Error::Config { line: end, message: format!("missing required key {key:?}") };
        let matrix: MatrixKind = matrix.ok_or_else(|| missing("matrix"))?;
        let levels: usize = levels.ok_or_else(|| missing("levels"))?;
        let rank: usize = rank.ok_or_else(|| missing("rank"))?;
        if algorithms.is_empty() {
            return Err(missing("algorithms"));
        }
        if algorithms.iter().any(|a| a.uses_sketches()) && sketch_widths.is_empty() {
            return Err(missing("sketch_widths"));
        }
        let invalid = |message: String| Error::Config { line: end, message };
        if levels == 0 || rank == 0 || trials == 0 {
            return Err(invalid("levels, rank and trials must be positive".into()));
        }
        if matrix == MatrixKind::Hard && rank != 1 {
            return Err(invalid("the hard instance has 2x2 leaf blocks, so rank must be 1".into()));
        }
        if algorithms.contains(&Algorithm::Reference) && matrix != MatrixKind::Hard {
            return Err(invalid("the reference algorithm exists only for the hard instance".into()));
        }
        Ok(Self {
            name: name.unwrap_or_else(|| matrix.to_string()),
            matrix,
            levels,
            rank,
            sketch_widths,
            algorithms,
            trials,
            seed,
            matrix_seed: matrix_seed.unwrap_or(seed),
            bandwidth: bandwidth.unwrap_or(2 * rank + 1),
            delta,
            amplitude,
            arms,
            timing,
        })
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Oracle for the configured matrix.
    pub fn build_oracle(&self) -> Result<Box<dyn MatvecOracle + Sync>> {
        let n = self.dim();
        Ok(match self.matrix {
            MatrixKind::Banded => Box::new(banded_inverse_oracle(n, self.bandwidth, self.matrix_seed)?),
            MatrixKind::Grid => Box::new(grid_schur_oracle(n)?),
            MatrixKind::Bie => Box::new(DenseOracle::new(bie_star(n, self.amplitude, self.arms)?)?),
            MatrixKind::Hard => Box::new(DenseOracle::new(hard_instance(self.levels, self.delta))?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub matrix: String,
    pub algorithm: Algorithm,
    pub levels: usize,
    pub rank: usize,
    /// Zero for algorithms that do not sketch.
    pub sketch_width: usize,
    pub trial: usize,
    pub seed: u64,
    pub forward_queries: u64,
    pub transpose_queries: u64,
    pub rel_error: f64,
    pub wall_ms: f64,
}

impl ExperimentRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.6e},{:.3}",
            self.matrix,
            self.algorithm,
            self.levels,
            self.rank,
            self.sketch_width,
            self.trial,
            self.seed,
            self.forward_queries,
            self.transpose_queries,
            self.rel_error,
            self.wall_ms
        )
    }
}

struct Cell {
    algorithm: Algorithm,
    s: usize,
    trial: usize,
}

fn run_cell(cfg: &ExperimentConfig, oracle: &(dyn MatvecOracle + Sync), a: &DenseMatrix, cell: &Cell) -> Result<ExperimentRecord> {
    let seed = cfg.seed.wrapping_add(cell.trial as u64);
    let start = Instant::now();
    let counting = CountingOracle::new(oracle);
    let approx = match cell.algorithm {
        Algorithm::Explicit => hss_explicit_greedy(a, cfg.levels, cfg.rank)?.reconstruct_dense(),
        Algorithm::Reference => hard_instance_reference(cfg.levels),
        alg => {
            let mc = alg.matvec_config(cfg.levels, cfg.rank, cell.s, seed).expect("sketching algorithm");
            hss_from_matvecs(&counting, &mc)?.reconstruct_dense()
        }
    };
    let wall_ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let counts = counting.counts();
    Ok(ExperimentRecord {
        matrix: cfg.name.clone(),
        algorithm: cell.algorithm,
        levels: cfg.levels,
        rank: cfg.rank,
        sketch_width: cell.s,
        trial: cell.trial,
        seed: if cell.algorithm.uses_sketches() { seed } else { cfg.seed },
        forward_queries: counts.forward,
        transpose_queries: counts.transpose,
        rel_error: frobenius_error(a, &approx),
        wall_ms,
    })
}

/// Runs every `(algorithm, s, trial)` cell; records are sorted by
/// algorithm, sketch width and trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    let oracle = cfg.build_oracle()?;
    let a = dense_from_oracle(&oracle.as_ref())?;
    let mut cells = Vec::new();
    for &algorithm in &cfg.algorithms {
        if algorithm.uses_sketches() {
            for &s in &cfg.sketch_widths {
                cells.extend((0..cfg.trials).map(|trial| Cell { algorithm, s, trial }));
            }
        } else {
            cells.push(Cell { algorithm, s: 0, trial: 0 });
        }
    }
    let mut records: Vec<ExperimentRecord> =
        cells.par_iter().map(|c| run_cell(cfg, oracle.as_ref(), &a, c)).collect::<Result<_>>()?;
    records.sort_by(|x, y| {
        (x.algorithm, x.sketch_width, x.trial).cmp(&(y.algorithm, y.sketch_width, y.trial))
    });
    Ok(records)
}

pub fn write_csv(records: &[ExperimentRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}
