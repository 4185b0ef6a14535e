use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_braess-kit"))
        .args(args)
        .env_remove("BRAESS_KIT_SEED")
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<(String, String)> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn field(out: &Output, key: &str) -> String {
    records(out)
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no `{key}` in {}", String::from_utf8_lossy(&out.stdout)))
        .1
}

fn number(out: &Output, key: &str) -> f64 {
    field(out, key).parse().unwrap()
}

fn shares(out: &Output, key: &str) -> Vec<f64> {
    field(out, key).split(',').map(|x| x.parse().unwrap()).collect()
}

#[test]
fn analyze_reports_the_solver_results() {
    let out = run(&["analyze", fixture("example-2-5.scn").to_str().unwrap(), "--format", "records"]);
    assert!(out.status.success());
    assert!((shares(&out, "wardrop.partition")[0] - 0.5625).abs() < 1e-6);
    assert!((shares(&out, "social_optimum.partition")[0] - 0.40625).abs() < 1e-6);
    assert_eq!(field(&out, "wardrop.kind"), "local-nash");
}

#[test]
fn analyze_matches_the_library_exactly() {
    use braess_kit::equilibria::{find_wardrop, social_optimum, EquilibriumOptions};
    let text = std::fs::read_to_string(fixture("example-2-5.scn")).unwrap();
    let s = braess_kit::scenario::parse_scenario(&text).unwrap();
    let w = find_wardrop(&s.network, &EquilibriumOptions::default()).unwrap();
    let g = social_optimum(&s.network, &EquilibriumOptions::default()).unwrap();
    let out = run(&["analyze", fixture("example-2-5.scn").to_str().unwrap(), "--format", "records"]);
    assert_eq!(shares(&out, "wardrop.partition"), w.partition.shares());
    assert_eq!(shares(&out, "social_optimum.partition"), g.partition.shares());
}

#[test]
fn two_share_partition_selects_the_base_network() {
    let out = run(&["analyze", fixture("intro.scn").to_str().unwrap(), "--partition", "0.5,0.5", "--format", "records"]);
    assert!(out.status.success());
    assert_eq!(number(&out, "evaluation.time.alpha"), 65.0);
    assert_eq!(number(&out, "evaluation.time.beta"), 65.0);
    assert_eq!(field(&out, "equilibrium.holds"), "true");
}

#[test]
fn bad_partitions_are_validation_errors() {
    let out = run(&["analyze", fixture("intro.scn").to_str().unwrap(), "--partition", "0.5,0.4"]);
    assert_eq!(out.status.code(), Some(4));
    let out = run(&["analyze", fixture("intro.scn").to_str().unwrap(), "--partition", "0.5,0.5,0.5,0.5"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn braess_command() {
    let out = run(&["braess", fixture("example-2-7.scn").to_str().unwrap(), "--format", "records"]);
    assert!(out.status.success());
    assert_eq!(field(&out, "braess.paradox"), "true");
    for (key, want) in [
        ("braess.tau_alpha_half", 4.042908),
        ("braess.tau_gamma_zero", 4.050844),
        ("braess.tau_alpha_zero", 4.055725),
    ] {
        assert!((number(&out, key) - want).abs() < 1e-6, "{key}");
    }
    assert_eq!(field(&out, "uniqueness.unique"), "true");

    let out = run(&["braess", fixture("intro.scn").to_str().unwrap(), "--format", "records"]);
    assert_eq!(number(&out, "braess.tau_alpha_half"), 65.0);
    assert_eq!(number(&out, "braess.tau_gamma_zero"), 80.0);
    assert_eq!(number(&out, "braess.tau_alpha_zero"), 85.0);
}

#[test]
fn braess_without_equal_speed_paradox() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("equal.scn");
    let text = std::fs::read_to_string(fixture("example-2-7.scn")).unwrap().replace("v = 1/2", "v = 33/100");
    std::fs::write(&path, text).unwrap();
    let out = run(&["braess", path.to_str().unwrap(), "--format", "records"]);
    assert!(out.status.success());
    assert_eq!(field(&out, "braess.paradox"), "false");
}

#[test]
fn braess_needs_the_braess_section() {
    let out = run(&["braess", fixture("example-2-5.scn").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn control_command() {
    let out = run(&["control", fixture("example-2-7.scn").to_str().unwrap(), "--format", "records"]);
    assert!(out.status.success());
    assert_eq!(field(&out, "control.certified"), "true");
    assert_eq!(number(&out, "control.theta_star"), 0.5);
    assert!((number(&out, "control.tilde_tau") - 2.017698).abs() < 1e-6);
    assert!((number(&out, "control.controlled_time") - 4.042908).abs() < 1e-6);
}

#[test]
fn control_on_a_scenario_without_paradox() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no-paradox.scn");
    let text = std::fs::read_to_string(fixture("example-2-7.scn")).unwrap().replace("v = 1/2", "v = 1/10");
    std::fs::write(&path, text).unwrap();
    let out = run(&["control", path.to_str().unwrap(), "--format", "records"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(field(&out, "control.certified"), "true");
}

#[test]
fn sweep_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("example-2-7.scn");
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "1", "3"].iter().enumerate() {
        let path = dir.path().join(format!("run{k}.csv"));
        let out = run(&[
            "sweep",
            scn.to_str().unwrap(),
            "--grid",
            "theta1=0:1:41,theta2=0:1:41",
            "--threads",
            threads,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 1 + 41 * 41);
}

#[test]
fn sweep_corner_grid() {
    let out = run(&["sweep", fixture("example-2-7.scn").to_str().unwrap(), "--grid", "theta1=0:1:2,theta2=0:1:2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().last().unwrap().ends_with(",false"));
}

#[test]
fn sweep_needs_a_grid() {
    let out = run(&["sweep", fixture("example-2-7.scn").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["sweep", fixture("example-2-7.scn").to_str().unwrap(), "--grid", "theta1=0:3:5"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn validate_command_and_exit_codes() {
    for f in ["intro.scn", "example-2-5.scn", "example-2-7.scn"] {
        let out = run(&["validate", fixture(f).to_str().unwrap(), "--format", "records"]);
        assert!(out.status.success(), "{f}");
        assert_eq!(field(&out, "scenario.valid"), "true");
    }

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "[road a]\nkind = log\na = 1\nlength = 1\nwidth = 2\n").unwrap();
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.scn:5:1"), "{stderr}");

    let invalid = dir.path().join("invalid.scn");
    std::fs::write(&invalid, "[road a]\nkind = log\na = -1\nlength = 1\n[route r]\nroads = a\n[demand]\ninflow = 0.1\n").unwrap();
    assert_eq!(run(&["validate", invalid.to_str().unwrap()]).status.code(), Some(4));

    let missing = dir.path().join("missing.scn");
    assert_eq!(run(&["analyze", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn seed_comes_from_the_environment() {
    let scn = fixture("example-2-7.scn");
    let out = Command::new(env!("CARGO_BIN_EXE_braess-kit"))
        .args(["analyze", scn.to_str().unwrap(), "--partition", "0,0,1", "--format", "records"])
        .env("BRAESS_KIT_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(field(&out, "pareto.seed"), "7");
    let out = run(&["analyze", scn.to_str().unwrap(), "--partition", "0,0,1", "--format", "records", "--seed", "9"]);
    assert_eq!(field(&out, "pareto.seed"), "9");
}
