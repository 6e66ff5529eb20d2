use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hss_core::blr2::{blr2_from_matvecs, SparsityPattern};
use hss_core::greedy::hss_explicit_greedy;
use hss_core::matvec::hss_from_matvecs;
use hss_core::oracle::{dense_from_oracle, CountingOracle};
use hss_core::structures::{read_factorization, read_matrix, write_factorization, write_matrix};
use hss_core::testbed::{frobenius_error, run_experiment, write_csv, Algorithm, ExperimentConfig};

mod source;

#[derive(Parser)]
#[command(name = "hss", version, about = "Hierarchical low-rank approximation from matrix-vector products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a test matrix as a DMAT file.
    Gen {
        /// Generator spec: hard, banded, grid or bie, optionally with
        /// `:key=value,...` parameters.
        matrix: String,
        #[arg(long = "L", visible_alias = "levels", default_value_t = 4)]
        levels: usize,
        #[arg(long = "k", visible_alias = "rank", default_value_t = 1)]
        rank: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an HSS approximation and write it as an HSSF file.
    Approx {
        /// explicit, fresh, reused-svd or reused-qr.
        algorithm: Algorithm,
        #[arg(long = "L", visible_alias = "levels")]
        levels: usize,
        #[arg(long = "k", visible_alias = "rank")]
        rank: usize,
        /// Sketch width; required for the sketching algorithms.
        #[arg(long = "s", visible_alias = "sketch-width")]
        sketch_width: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// DMAT file or generator spec.
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: PathBuf,
        /// Also report the relative Frobenius error (densifies the operator).
        #[arg(long)]
        error: bool,
    },
    /// Build a uniform block low-rank approximation and report its error.
    Blr2 {
        #[arg(long = "in")]
        input: String,
        /// Number of block rows.
        #[arg(long)]
        blocks: usize,
        #[arg(long = "k", visible_alias = "rank")]
        rank: usize,
        #[arg(long = "s", visible_alias = "sketch-width")]
        sketch_width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `diag`, `tridiag`, or a file of 1-based `i j` pairs.
        #[arg(long, default_value = "diag")]
        pattern: String,
        /// Optional DMAT output of the dense reconstruction.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment sweep and write one CSV row per cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output path, or `-` for standard output.
        #[arg(long)]
        csv: PathBuf,
    },
    /// Compare an HSSF factorization against a DMAT matrix.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        against: PathBuf,
        /// Exit with an error if the relative error exceeds this.
        #[arg(long)]
        max_error: Option<f64>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { matrix, levels, rank, out } => {
            let params = source::Params::parse(&matrix)?;
            let a = dense_from_oracle(&params.build(levels, rank)?.as_ref())?;
            write_matrix(&out, &a).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}x{} matrix to {}", a.rows(), a.cols(), out.display());
        }
        Command::Approx { algorithm, levels, rank, sketch_width, seed, input, out, error } => {
            let oracle = source::open(&input, levels, rank)?;
            let counting = CountingOracle::new(oracle.as_ref());
            let t = match algorithm {
                Algorithm::Explicit => hss_explicit_greedy(&dense_from_oracle(&oracle.as_ref())?, levels, rank)?,
                Algorithm::Reference => bail!("the reference matrix is not an approximation algorithm"),
                alg => {
                    let Some(s) = sketch_width else { bail!("{alg} needs a sketch width (--s)") };
                    let cfg = alg.matvec_config(levels, rank, s, seed).expect("sketching algorithm");
                    hss_from_matvecs(&counting, &cfg)?
                }
            };
            write_factorization(&out, &t).with_context(|| format!("writing {}", out.display()))?;
            let c = counting.counts();
            println!("forward queries: {}", c.forward);
            println!("transpose queries: {}", c.transpose);
            if algorithm.uses_sketches() {
                println!("of which root probes: {}", 2 * rank);
            }
            if error {
                let a = dense_from_oracle(&oracle.as_ref())?;
                println!("relative error: {:.6e}", frobenius_error(&a, &t.reconstruct_dense()));
            }
        }
        Command::Blr2 { input, blocks, rank, sketch_width, seed, pattern, out } => {
            let spec = match pattern.as_str() {
                "diag" | "tridiag" => pattern.clone(),
                path => std::fs::read_to_string(path).with_context(|| format!("reading pattern {path}"))?,
            };
            let pattern = SparsityPattern::parse(&spec, blocks)?;
            let oracle = source::open(&input, 1, 1)?;
            let counting = CountingOracle::new(oracle.as_ref());
            let f = blr2_from_matvecs(&counting, &pattern, rank, sketch_width, seed)?;
            let c = counting.counts();
            let b = f.reconstruct();
            println!("forward queries: {}", c.forward);
            println!("transpose queries: {}", c.transpose);
            println!("relative error: {:.6e}", frobenius_error(&dense_from_oracle(&oracle.as_ref())?, &b));
            if let Some(out) = out {
                write_matrix(&out, &b).with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Sweep { config, csv } => {
            let cfg = ExperimentConfig::from_file(&config).with_context(|| format!("in {}", config.display()))?;
            let records = run_experiment(&cfg)?;
            if csv.as_os_str() == "-" {
                write_csv(&records, std::io::stdout().lock())?;
            } else {
                let mut w = BufWriter::new(File::create(&csv).with_context(|| format!("creating {}", csv.display()))?);
                write_csv(&records, &mut w)?;
                w.flush()?;
                eprintln!("wrote {} rows to {}", records.len(), csv.display());
            }
        }
        Command::Validate { input, against, max_error } => {
            let t = read_factorization(&input).with_context(|| format!("reading {}", input.display()))?;
            let a = read_matrix(&against).with_context(|| format!("reading {}", against.display()))?;
            if a.shape() != (t.dim(), t.dim()) {
                bail!("factorization has dimension {} but the matrix is {}x{}", t.dim(), a.rows(), a.cols());
            }
            let err = frobenius_error(&a, &t.reconstruct_dense());
            println!("levels: {}, rank: {}, dimension: {}", t.num_levels(), t.rank(), t.dim());
            println!("relative error: {err:.6e}");
            if let Some(limit) = max_error {
                if err.is_nan() || err > limit {
                    bail!("relative error {err:e} exceeds {limit:e}");
                }
            }
        }
    }
    Ok(())
}
