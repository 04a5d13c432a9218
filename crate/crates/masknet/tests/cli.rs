use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn masknet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masknet"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn mnist_dir() -> Option<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    if dir.join("train-images-idx3-ubyte").exists() {
        Some(dir)
    } else {
        eprintln!("MNIST not found under {}; skipping", dir.display());
        None
    }
}

#[test]
fn exit_codes() {
    assert_eq!(masknet(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(masknet(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(masknet(&["train", "--set", "colour=blue"]).status.code(), Some(3));
    assert_eq!(masknet(&["train", "--set", "momentum=2"]).status.code(), Some(3));
    assert_eq!(masknet(&["train", "--set", "mnist_dir=/nonexistent"]).status.code(), Some(4));
    assert_eq!(masknet(&["eval", "--model", "/nonexistent.bin", "--mode", "relu"]).status.code(), Some(4));
    assert_eq!(masknet(&["recover", "--widths", "4,3,2,2"]).status.code(), Some(3));
}

#[test]
fn decouple_check_reports_and_passes() {
    let o = masknet(&["decouple-check", "--trials", "30"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS decoupling: 30 networks"));
}

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    let first = masknet(&["train", "--print-config", "--set", "seed=42", "--mode", "b-alt"]);
    assert_eq!(first.status.code(), Some(0));
    std::fs::write(&cfg, &first.stdout).unwrap();
    let second = masknet(&["train", "--print-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(second.stdout, first.stdout);
    assert!(stdout(&first).contains("seed = 42\n") && stdout(&first).contains("mode = b-alt\n"));
}

#[test]
fn recover_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("rip.csv");
    let residuals = dir.path().join("res.csv");
    let o = masknet(&[
        "recover",
        "--seeds",
        "2",
        "--report",
        report.to_str().unwrap(),
        "--residuals",
        residuals.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = std::fs::read_to_string(&report).unwrap();
    assert!(r.starts_with("seed,m,sigma_min_sq,sigma_max_sq,epsilon_max,rip_satisfied,scale,relative_residual"));
    assert_eq!(r.lines().count(), 3);
    assert!(std::fs::read_to_string(&residuals).unwrap().starts_with("seed,iteration,objective\n0,0,"));
}

#[test]
fn train_eval_and_bench_end_to_end() {
    let Some(mnist) = mnist_dir() else { return };
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(
        &cfg,
        format!(
            "mnist_dir = {}\ntrain_limit = 600\ntest_limit = 300\ntotal_epochs = 6\nwarmup_epochs = 2\n",
            mnist.display()
        ),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let mut curves = Vec::new();
    for run in ["a", "b"] {
        let o = masknet(&[
            "train",
            "--config",
            cfg,
            "--mode",
            "i-alt",
            "--curve",
            &path(&format!("{run}.csv")),
            "--model",
            &path(&format!("{run}.bin")),
            "--masks",
            &path(&format!("{run}.bits")),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        curves.push(std::fs::read(path(&format!("{run}.csv"))).unwrap());
    }
    assert_eq!(curves[0], curves[1], "seeded runs must give identical curves");
    let curve = String::from_utf8(curves.remove(0)).unwrap();
    assert!(curve.starts_with("epoch,train_loss,train_err,test_err,wall_ms,alternation_event\n"));
    assert_eq!(curve.lines().count(), 7);
    assert!(curve.lines().skip(1).any(|l| l.ends_with(",1")), "no alternation event:\n{curve}");
    assert_eq!(std::fs::read(path("a.bin")).unwrap(), std::fs::read(path("b.bin")).unwrap());

    for mode in ["relu", "pht", "mask"] {
        let o = masknet(&["eval", "--config", cfg, "--model", &path("a.bin"), "--mode", mode]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).starts_with("error "));
    }
    let o = masknet(&["train", "--config", cfg, "--mode", "sgd", "--model", &path("s.bin")]);
    assert_eq!(o.status.code(), Some(0));
    let o = masknet(&["eval", "--config", cfg, "--model", &path("s.bin"), "--mode", "mask"]);
    assert_eq!(o.status.code(), Some(3), "mask evaluation needs sweep thresholds");

    let o = masknet(&["bench", "--config", cfg, "--seeds", "2", "--threads", "2", "--csv", &path("bench.csv")]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&o);
    assert!(table.contains("sgd_epochs") && table.contains("arm_epochs") && table.contains("ratio"));
    assert_eq!(table.lines().filter(|l| l.contains("i-alt")).count(), 2);
    let csv = std::fs::read_to_string(path("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
