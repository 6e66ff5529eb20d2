use std::path::Path;
use std::process::{Command, Output};

use hss_core::structures::{read_factorization, read_matrix, write_factorization, write_matrix};
use hss_core::testbed::{hard_instance, random_hss};

fn hss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hss")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hss(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no {key:?} in {stdout}"))
}

#[test]
fn gen_writes_the_hard_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hard.dmat");
    ok(&["gen", "hard:delta=0.1", "--L", "2", "--out", path_str(&out)]);
    assert_eq!(read_matrix(&out).unwrap(), hard_instance(2, 0.1));
}

#[test]
fn approx_then_validate_recovers_exact_hss() {
    let dir = tempfile::tempdir().unwrap();
    let (a_path, f_path) = (dir.path().join("a.dmat"), dir.path().join("a.hssf"));
    let a = random_hss(3, 2, 4).reconstruct_dense();
    write_matrix(&a_path, &a).unwrap();

    let out = ok(&[
        "approx", "fresh", "--L", "3", "--k", "2", "--s", "8", "--seed", "9", "--in", path_str(&a_path), "--out",
        path_str(&f_path),
    ]);
    assert_eq!(field(&out, "forward queries:"), (2 * 8 * 3 + 4).to_string());
    assert_eq!(field(&out, "transpose queries:"), (2 * 8 * 3).to_string());
    assert_eq!(read_factorization(&f_path).unwrap().dim(), 32);

    let v = ok(&["validate", "--in", path_str(&f_path), "--against", path_str(&a_path), "--max-error", "1e-9"]);
    assert!(field(&v, "relative error:").parse::<f64>().unwrap() < 1e-9);
}

#[test]
fn approx_accepts_generator_specs_and_reports_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("b.hssf");
    let out = ok(&[
        "approx", "reused-qr", "--L", "3", "--k", "2", "--s", "10", "--in", "banded:bandwidth=3,seed=1", "--out",
        path_str(&f), "--error",
    ]);
    assert_eq!(field(&out, "forward queries:"), "24");
    assert!(field(&out, "relative error:").parse::<f64>().unwrap() < 1e-9);
}

#[test]
fn validate_flags_a_bad_fit() {
    let dir = tempfile::tempdir().unwrap();
    let (a_path, f_path) = (dir.path().join("a.dmat"), dir.path().join("t.hssf"));
    write_matrix(&a_path, &random_hss(2, 1, 1).reconstruct_dense()).unwrap();
    write_factorization(&f_path, &random_hss(2, 1, 2)).unwrap();
    let out = hss(&["validate", "--in", path_str(&f_path), "--against", path_str(&a_path), "--max-error", "0.1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn sweep_is_deterministic_and_schema_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hard.cfg");
    std::fs::write(
        &cfg,
        "matrix = hard\nlevels = 3\nrank = 1\nsketch_widths = 5, 7\nalgorithms = explicit, fresh, reference\n\
         trials = 3\nseed = 11\ntiming = false\n",
    )
    .unwrap();
    let (c1, c2) = (dir.path().join("1.csv"), dir.path().join("2.csv"));
    ok(&["sweep", "--config", path_str(&cfg), "--csv", path_str(&c1)]);
    ok(&["sweep", "--config", path_str(&cfg), "--csv", path_str(&c2)]);
    let (t1, t2) = (std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());
    assert_eq!(t1, t2);

    let text = String::from_utf8(t1).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("matrix,algorithm,L,k,s,trial,seed,fwd_q,tr_q,rel_err,wall_ms"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 1 + 2 * 3 + 1);
    let err_of = |alg: &str| rows.iter().find(|r| r[1] == alg).unwrap()[9].parse::<f64>().unwrap();
    assert!(err_of("explicit") >= err_of("reference"));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "matrix = banded\nlevels = 3\nrank = two\n").unwrap();
    let out = hss(&["sweep", "--config", path_str(&cfg), "--csv", "-"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn blr2_subcommand_recovers_block_diagonal_plus_low_rank() {
    let dir = tempfile::tempdir().unwrap();
    let a_path = dir.path().join("a.dmat");
    // Rank-1 coupling plus a dense diagonal: exact BLR² with k = 1.
    let n = 12;
    let a = hss_core::DenseMatrix::from_fn(n, n, |i, j| {
        let low = (1.0 + i as f64) * (2.0 - j as f64 * 0.1);
        if i / 3 == j / 3 { low + ((i * 7 + j * 3) % 5) as f64 } else { low }
    });
    write_matrix(&a_path, &a).unwrap();
    let out = ok(&["blr2", "--in", path_str(&a_path), "--blocks", "4", "--k", "1", "--s", "6", "--pattern", "diag"]);
    assert!(field(&out, "relative error:").parse::<f64>().unwrap() < 1e-9);
}

#[test]
fn rejects_missing_sketch_width() {
    let out = hss(&["approx", "fresh", "--L", "2", "--k", "1", "--in", "hard", "--out", "/dev/null"]);
    assert!(!out.status.success());
}
