use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cocyclelab");

const SUITE: &str = r#"
seed = 3

[base]
kind = "shift"
weights = [0.5, 0.5]

[cocycle]
kind = "locally_constant"
table = [[1.2, 0.0, 0.0, 0.8333333333333334], [1.194004998333631, -0.0831945138723568, 0.11980009997619379, 0.8291701377316882]]

[perturbation]
schedule = [0.04, 0.02, 0.01, 0.005]
[perturbation.direction]
kind = "constant"
matrix = [0.0, -1.0, 1.0, 0.0]

[budgets]
samples = 200
n = 200
n_max = 40
grid = 8
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("COCYCLELAB_OUT")
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn selftest_exits_zero() {
    let out = Command::new(BIN).arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn missing_cocycle_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "[base]\nkind = \"shift\"\n", &["lyapunov"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[cocycle]"));
}

#[test]
fn unreadable_config_and_bad_flags() {
    let out = Command::new(BIN).args(["lyapunov", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(BIN).args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identity_oseledets_is_no_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[base]\nkind = \"shift\"\n[cocycle]\nkind = \"constant\"\nmatrix = [1.0, 0.0, 0.0, 1.0]\n[budgets]\nsamples = 10\nn = 50\n";
    assert_eq!(run(dir.path(), cfg, &["oseledets"]).status.code(), Some(3));
    let fixed = format!("{cfg}depth = 20\n");
    assert_eq!(run(dir.path(), &fixed, &["oseledets"]).status.code(), Some(3));
}

#[test]
fn outputs_carry_provenance_and_exact_headers() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["lyapunov", "oseledets", "bunching", "projective"] {
        let args = if cmd == "projective" { vec![cmd, "--svg"] } else { vec![cmd] };
        let out = run(dir.path(), SUITE, &args);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let expect = [
        ("lyapunov.csv", "sample_id,ell_plus,ell_minus"),
        ("lyapunov_summary.csv", "quantity,value"),
        ("oseledets.csv", "sample_id,theta_u,theta_s,residual,depth"),
        ("bunching.csv", "n,b_n,fitted"),
        ("projective_integrals.csv", "measure,integral,stderr,lambda,lambda_stderr,defect"),
        ("attraction.csv", "n,forward_median,backward_median"),
    ];
    for (name, header) in expect {
        let text = read(dir.path(), name);
        let mut lines = text.lines();
        let first = lines.next().unwrap();
        assert!(first.starts_with("# cocyclelab ") && first.contains("config_hash=") && first.ends_with("seed=3"), "{first}");
        assert_eq!(lines.next().unwrap(), header, "{name}");
    }
    assert_eq!(read(dir.path(), "lyapunov.csv").lines().count(), 2 + 200);
    assert!(read(dir.path(), "projective_histogram.svg").starts_with("<!-- cocyclelab "));
}

#[test]
fn seed_flag_changes_results_and_header() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), SUITE, &["lyapunov"]);
    let a = read(dir.path(), "lyapunov.csv");
    run(dir.path(), SUITE, &["lyapunov", "--seed", "4"]);
    let b = read(dir.path(), "lyapunov.csv");
    assert!(b.lines().next().unwrap().ends_with("seed=4"));
    assert_ne!(a.lines().nth(2), b.lines().nth(2));
    run(dir.path(), SUITE, &["lyapunov", "--seed", "3", "--threads", "3"]);
    assert_eq!(a, read(dir.path(), "lyapunov.csv"));
}

#[test]
fn continuity_writes_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SUITE, &["continuity"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "goodset.csv");
    assert_eq!(csv.lines().nth(1).unwrap(), "k,t,holder_dist,g_hat,ci_lo,ci_hi,lp_k,lm_k,mean_du,max_du,mean_ds,max_ds");
    assert_eq!(csv.lines().count(), 2 + 4);
    let svg = read(dir.path(), "goodset.svg");
    assert_eq!(svg.matches("<circle").count(), 4);

    // Large rotations destroy the gap: those rows are censored, not dropped.
    let coarse = SUITE.replace("schedule = [0.04, 0.02, 0.01, 0.005]", "count = 3");
    let out = run(dir.path(), &coarse, &["continuity"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = read(dir.path(), "goodset.csv");
    assert_eq!(csv.lines().count(), 2 + 3);
    assert!(csv.lines().nth(2).unwrap().ends_with("NA,NA,NA,NA"));
}

#[test]
fn continuity_needs_perturbation_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SUITE.split("[perturbation]").next().unwrap();
    let out = run(dir.path(), cfg, &["continuity"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[perturbation]"));
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.toml");
    std::fs::write(&path, SUITE).unwrap();
    let target = dir.path().join("from_env");
    let out = Command::new(BIN)
        .args(["bunching", "--config"])
        .arg(&path)
        .env("COCYCLELAB_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("bunching.csv").exists());
}
