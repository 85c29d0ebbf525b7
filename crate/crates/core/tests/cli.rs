use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pmcycle::coordinator::{multistart_initial_angles, run_bilevel, BilevelOptions};
use pmcycle::io::load_scenario;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn pmcycle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmcycle")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn write_bad(dir: &Path, from: &str, to: &str) -> String {
    let src = fs::read_to_string(scenario("triangle.toml")).unwrap();
    let path = dir.join("bad.toml");
    fs::write(&path, src.replacen(from, to, 1)).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn validate_accepts_sample_scenarios() {
    for name in ["triangle.toml", "pair.toml"] {
        let out = pmcycle(&["validate", scenario(name).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", text(&out));
    }
    let sc = load_scenario(&scenario("triangle.toml")).unwrap();
    assert_eq!(sc.num_visits(), 3);
}

#[test]
fn invalid_scenarios_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let overlap = write_bad(dir.path(), "x = 20.0", "x = 4.0");
    let out = pmcycle(&["compare", &overlap, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(text(&out).contains("targets 1 and 2"), "{}", text(&out));
    assert!(!dir.path().join("summary.json").exists());

    let missing = write_bad(dir.path(), "A = 1.0\n", "");
    let out = pmcycle(&["validate", &missing]);
    assert_eq!(code(&out), 2);
    assert!(text(&out).contains("`A`") && text(&out).contains("line"), "{}", text(&out));

    let out = pmcycle(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn solve_local_prints_time_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let sc = scenario("pair.toml");
    let out = pmcycle(&["solve-local", sc.to_str().unwrap(), "--target", "1", "--phi", "0", "--psi", "-2.5", "--arrival", "0", "--out", out_dir]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let printed = text(&out);
    assert!(printed.contains("T* = ") && printed.contains("lambda_R"));
    assert!(!printed.contains("FAILED"), "{printed}");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,s_x,s_y,u_x,u_y,phase,R_1\n"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert!(json["total_time"].as_f64().unwrap() > 0.0);

    let out = pmcycle(&["solve-local", sc.to_str().unwrap(), "--target", "5", "--phi", "0", "--psi", "1", "--arrival", "1", "--out", out_dir]);
    assert_eq!(code(&out), 2);
}

#[test]
fn compare_on_pair_reports_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmcycle(&["compare", scenario("pair.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["greedy_at_least_optimized"], true);
    assert_eq!(summary["greedy_stabilized"], true);
    assert_eq!(summary["optimized_converged"], true);
    let history = fs::read_to_string(dir.path().join("bilevel_history.csv")).unwrap();
    assert!(history.starts_with("cycle,T,grad_norm,phi_1,phi_2,psi_1,psi_2,R_resid\n"));
    for f in ["greedy_trajectory.csv", "greedy_history.csv", "bilevel_trajectory.csv", "bilevel_cpu_times.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn run_without_enough_cycles_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmcycle(&["run", scenario("triangle.toml").to_str().unwrap(), "--max-cycles", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", text(&out));
    let history = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
}

#[test]
fn multistart_is_reproducible_and_matches_single_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sc_path = scenario("triangle.toml");
    for dir in [&a, &b] {
        let out = pmcycle(&["multistart", sc_path.to_str().unwrap(), "--count", "1", "--seed", "5", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", text(&out));
    }
    for f in ["multistart_summary.json", "multistart_periods.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let sc = load_scenario(&sc_path).unwrap();
    let start = multistart_initial_angles(3, 1, 5).pop().unwrap();
    let single = run_bilevel(&sc, &BilevelOptions::default(), Some(start)).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("multistart_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"][0]["final_period"].as_f64().unwrap(), single.period());
    assert_eq!(summary["runs"][0]["cycles"].as_u64().unwrap() as usize, single.cycles());
}
