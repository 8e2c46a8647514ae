use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glsearch"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("glsearch_cli_{}_{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn learned_without_checkpoint_is_usage_error() {
    let out = bin()
        .args(["solve", "--g1", "er:n=5,p=0.5", "--g2", "er:n=5,p=0.5", "--policy", "learned", "--iters", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_policy_is_usage_error() {
    let out = bin()
        .args(["solve", "--g1", "er:n=5,p=0.5", "--g2", "er:n=5,p=0.5", "--policy", "bogus", "--iters", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_budget_is_usage_error() {
    let out = bin()
        .args(["solve", "--g1", "er:n=5,p=0.5", "--g2", "er:n=5,p=0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_then_solve_round_trip() {
    let dir = tmp("solve");
    let a = dir.join("a.el");
    let b = dir.join("b.json");
    assert!(bin()
        .args(["generate", "--spec", "ba:n=12,m=2,seed=4", "--out", a.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["generate", "--spec", "er:n=12,p=0.3,seed=5", "--out", b.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let run = dir.join("run");
    let out = bin()
        .args([
            "solve",
            "--g1",
            a.to_str().unwrap(),
            "--g2",
            b.to_str().unwrap(),
            "--policy",
            "scorerl",
            "--iters",
            "300",
            "--promise",
            "on",
            "--out",
            run.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("best common subgraph size:"), "stdout: {stdout}");
    for file in ["result.json", "curve.csv", "mapping.txt"] {
        assert!(run.join(file).exists(), "missing {file}");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn oracle_zero_pairs_passes_vacuously() {
    let out = bin().args(["oracle", "--pairs", "0"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn bench_writes_table_and_curves() {
    let dir = tmp("bench");
    let spec = serde_json::json!({
        "datasets": [{"name": "er10", "source": {"er": {"n": 10, "p": 0.3}}, "pairs": 2}],
        "policies": ["degree", "random"],
        "budget_iterations": 50,
        "seed": 9,
    });
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out_dir = dir.join("out");
    let out = bin()
        .args(["bench", "--spec", spec_path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("table.csv")).unwrap();
    assert!(table.starts_with("method,er10"));
    assert!(table.contains("best_solution_size"));
    assert!(out_dir.join("meta.json").exists());
    assert_eq!(std::fs::read_dir(out_dir.join("curves")).unwrap().count(), 4);
    let _ = std::fs::remove_dir_all(&dir);
}
