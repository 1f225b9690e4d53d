use std::path::Path;
use std::process::{Command, Output};

fn combolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combolab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, out: &str) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(
        &path,
        format!(
            "set = mset:8:2\nlearner = hedge, omd-mset:eta=0.05\nadversary = mset-lb:seed=2\nT = 40\ntrials = 3\nseed = 5\nmode = sampled\nout = {out}\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "first.csv");
    let first = combolab(&["run", config.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second_path = dir.path().join("second.csv");
    let second = combolab(&["run", config.to_str().unwrap(), "--out", second_path.to_str().unwrap()]);
    assert!(second.status.success());
    let a = std::fs::read(dir.path().join("first.csv")).unwrap();
    let b = std::fs::read(&second_path).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("trial,t,learner,loss,cum_loss,cum_best,regret\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 40);
    let summary = String::from_utf8(first.stdout).unwrap();
    assert!(summary.contains("\"omd-mset:eta=0.05\""));
    assert!(summary.contains("mean_final_regret"));
}

#[test]
fn equiv_check_on_diamond() {
    let dir = tempfile::tempdir().unwrap();
    let dag = dir.path().join("diamond.dag");
    std::fs::write(&dag, "dag 4 4 0 3\n0 1\n0 2\n1 3\n2 3\n").unwrap();
    let out = combolab(&["equiv-check", dag.to_str().unwrap(), "--eta", "0.3", "--T", "50", "--seed", "3"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("PASS"));
}

#[test]
fn props_scope() {
    let out = combolab(&["props", "--scope", "sampling"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(text.contains("3 invariants, 0 failed"));
    assert!(!combolab(&["props", "--scope", "bogus"]).status.success());
}

#[test]
fn lb_demo_reports_rate() {
    let out = combolab(&["lb-demo", "universal", "--trials", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("√(T|I|/8)"));
    assert!(!combolab(&["lb-demo", "nope"]).status.success());
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "set = mset:8:2\nlearner = sgd\nadversary = mset-lb\nT = 4\n").unwrap();
    let out = combolab(&["run", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown learner"));
}
