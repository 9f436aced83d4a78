//! The `mxembed` binary: subcommands, CSV output and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn mxembed(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mxembed"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = mxembed(args, dir);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) {
    ok(
        &[
            "synth",
            "--nodes",
            "120",
            "--target-edges",
            "200",
            "--aux",
            "1500:0.5",
            "--seed",
            "1",
            "--out",
            "net.txt",
            "--labels-out",
            "labels.txt",
        ],
        dir,
    );
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn stats_from_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        &[
            "stats",
            "--counts",
            "42327,614",
            "--nodes",
            "6407",
            "--target-layer",
            "1",
            "--csv",
            "s.csv",
        ],
        dir.path(),
    );
    assert!(out.contains("mu = 4.23"), "{out}");
    assert!(out.contains("1.50e-5") || out.contains("1.49e-5"), "{out}");
    let row = &csv_rows(&dir.path().join("s.csv"))[0];
    assert_eq!(row[3], "42327");
    assert_eq!(row[5], "614");
}

#[test]
fn stats_on_equal_layers() {
    let dir = tempfile::tempdir().unwrap();
    let edges: String = (0..10)
        .map(|k| format!("0 {k} {}\n1 {k} {}\n", k + 1, k + 2))
        .collect();
    std::fs::write(dir.path().join("toy.txt"), edges).unwrap();
    let out = ok(&["stats", "--data", "toy.txt"], dir.path());
    assert!(out.contains("mu = 0.00"), "{out}");
}

#[test]
fn sample_emits_decisions() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &[
            "sample",
            "--data",
            "net.txt",
            "--seed",
            "3",
            "--emit-decisions",
            "d.csv",
            "--out",
            "s.txt",
        ],
        dir.path(),
    );
    let rows = csv_rows(&dir.path().join("d.csv"));
    assert_eq!(rows.len(), 1500);
    for r in &rows {
        let sim: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&sim));
    }
    let kept = rows.iter().filter(|r| r[4].starts_with("kept")).count();
    let sampled = std::fs::read_to_string(dir.path().join("s.txt")).unwrap();
    let aux_lines = sampled.lines().filter(|l| l.starts_with("1 ")).count();
    assert_eq!(kept, aux_lines);
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    std::fs::write(
        d.join("run.cfg"),
        "# short run\ndim = 8\nattn_dim = 8\nepochs = 3\n",
    )
    .unwrap();
    ok(
        &[
            "train",
            "--config",
            "run.cfg",
            "--data",
            "net.txt",
            "--split-seed",
            "2",
            "--log",
            "log.csv",
            "--out-checkpoint",
            "ck.bin",
        ],
        d,
    );
    let log = std::fs::read_to_string(d.join("log.csv")).unwrap();
    assert!(log.starts_with("epoch,l_pos,l_neg,l_total,kept_edges_layer_0,kept_edges_layer_1\n"));
    assert_eq!(log.lines().count(), 4);

    let out = ok(
        &[
            "eval-lp",
            "--config",
            "run.cfg",
            "--data",
            "net.txt",
            "--split-seed",
            "2",
            "--checkpoint",
            "ck.bin",
            "--csv",
            "lp.csv",
        ],
        d,
    );
    assert!(out.contains("test AUC"));
    let auc: f64 = csv_rows(&d.join("lp.csv"))[0][2].parse().unwrap();
    assert!((0.0..=1.0).contains(&auc));

    let out = ok(
        &[
            "eval-nc",
            "--config",
            "run.cfg",
            "--data",
            "net.txt",
            "--labels",
            "labels.txt",
            "--checkpoint",
            "ck.bin",
            "--repeats",
            "3",
            "--csv",
            "nc.csv",
        ],
        d,
    );
    assert!(out.contains("Micro-F1"));
    assert_eq!(csv_rows(&d.join("nc.csv")).len(), 5);
}

#[test]
fn eval_lp_repeats_retrain() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &[
            "eval-lp",
            "--data",
            "net.txt",
            "--dim",
            "8",
            "--epochs",
            "2",
            "--repeats",
            "3",
            "--csv",
            "lp.csv",
        ],
        dir.path(),
    );
    let rows = csv_rows(&dir.path().join("lp.csv"));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[3][0], "mean");
}

#[test]
fn dimension_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &[
            "sweep",
            "--data",
            "net.txt",
            "--axis",
            "dimension",
            "--values",
            "16,64,256",
            "--epochs",
            "1",
            "--repeats",
            "1",
            "--out",
            "sw.csv",
        ],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("sw.csv")).unwrap();
    assert!(text.starts_with("value,mu,auc_mean,auc_std,error\n"));
    let rows = csv_rows(&dir.path().join("sw.csv"));
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r[2].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn alpha_sweep_reports_invalid_rows() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &[
            "sweep",
            "--data",
            "net.txt",
            "--axis",
            "alpha",
            "--values",
            "0.1,0.9",
            "--dim",
            "8",
            "--epochs",
            "2",
            "--repeats",
            "1",
            "--out",
            "sw.csv",
        ],
        dir.path(),
    );
    let rows = csv_rows(&dir.path().join("sw.csv"));
    assert!(rows[0][2].parse::<f64>().is_ok() && rows[0][4].is_empty());
    assert!(rows[1][2].is_empty());
    assert!(rows[1][4].contains("0 ≤ α ≤ β ≤ 1"));
}

#[test]
fn keep_fraction_sweep_raises_ratio() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &[
            "sweep",
            "--data",
            "net.txt",
            "--axis",
            "keep_fraction",
            "--values",
            "1.0,0.5,0.25",
            "--dim",
            "8",
            "--epochs",
            "1",
            "--repeats",
            "1",
            "--out",
            "sw.csv",
        ],
        dir.path(),
    );
    let mu: Vec<f64> = csv_rows(&dir.path().join("sw.csv"))
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    assert!(mu.windows(2).all(|w| w[1] > w[0]), "{mu:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    // validation failures
    assert_eq!(
        mxembed(
            &["train", "--data", "net.txt", "--alpha", "0.9", "--beta", "0.1"],
            d
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        mxembed(&["train", "--no-such-flag"], d).status.code(),
        Some(1)
    );
    std::fs::write(d.join("bad.txt"), "0 1 2\n0 1\n").unwrap();
    let out = mxembed(&["stats", "--data", "bad.txt"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.txt:2:"));
    // runtime failure: unreadable file
    assert_eq!(
        mxembed(&["stats", "--data", "missing.txt"], d)
            .status
            .code(),
        Some(2)
    );
    // divergence
    let out = mxembed(
        &[
            "train",
            "--data",
            "net.txt",
            "--learning-rate",
            "1e6",
            "--epochs",
            "2",
        ],
        d,
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_lists_flags() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(&["train", "--help"], dir.path());
    for flag in [
        "--config",
        "--data",
        "--target-layer",
        "--out-checkpoint",
        "--log",
        "--split-seed",
        "--seed",
        "--set",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
    let help = ok(&["sample", "--help"], dir.path());
    for flag in [
        "--alpha",
        "--beta",
        "--target-layer",
        "--seed",
        "--emit-decisions",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
}
