use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE_MISSION: &str = "!u U[<=6.2] (p & !u U[<=2.3] (G[<=0.2] t & !u U[<=2.3] d))";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bltl-drive"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Copies the bundled config into `dir` with a reduced synthesis load and
/// applies `edit` to the JSON.
fn small_config(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> String {
    fs::copy(configs_dir().join("stand_in_env.json"), dir.join("stand_in_env.json")).unwrap();
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(configs_dir().join("paper_sec9.json")).unwrap()).unwrap();
    cfg["synthesis"]["episodes"] = 300.into();
    cfg["synthesis"]["max_rounds"] = 10.into();
    edit(&mut cfg);
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn synth(dir: &Path, config: &str, out: &str) -> Output {
    let out_dir = dir.join(out);
    run(&["synth", "--config", config, "--out-dir", out_dir.to_str().unwrap()])
}

#[test]
fn bundled_configs_match_library_data() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data");
    for name in ["paper_sec9.json", "stand_in_env.json"] {
        assert_eq!(
            fs::read_to_string(configs_dir().join(name)).unwrap(),
            fs::read_to_string(data.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn synth_writes_artifacts_and_reports_horizon() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    let o = synth(tmp.path(), &cfg, "a");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("horizon K = 9"));
    assert!(stdout(&o).contains("round   1: p_hat = "));

    let out = tmp.path().join("a");
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["horizon"], 9);
    let policy: Value = serde_json::from_str(&fs::read_to_string(out.join("policy.json")).unwrap()).unwrap();
    assert_eq!(policy["horizon"], 9);
    assert_eq!(policy["p_hat"], summary["p_hat"]);
    let audit = fs::read_to_string(out.join("audit.jsonl")).unwrap();
    assert_eq!(audit.lines().count() as u64, summary["rounds"].as_u64().unwrap());

    // the embedded config is the resolved one and reproduces the hash
    let embedded = serde_json::to_string(&summary["config"]).unwrap();
    let resolved = bltl_drive::config::RunConfig::from_json(&embedded).unwrap();
    assert_eq!(resolved.hash(), summary["config_hash"].as_str().unwrap());
    assert_eq!(resolved.seed, 2015);
}

#[test]
fn synth_is_deterministic_across_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    assert!(run(&["synth", "--config", &cfg, "--workers", "1", "--out-dir", out_a.to_str().unwrap()]).status.success());
    assert!(run(&["synth", "--config", &cfg, "--workers", "3", "--out-dir", out_b.to_str().unwrap()]).status.success());
    for f in ["audit.jsonl", "policy.json"] {
        assert_eq!(fs::read(out_a.join(f)).unwrap(), fs::read(out_b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    let out = tmp.path().join("s");
    let o = run(&["synth", "--config", &cfg, "--seed", "7", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(2), "{}", stderr(&o));
    let policy: Value = serde_json::from_str(&fs::read_to_string(out.join("policy.json")).unwrap()).unwrap();
    assert_eq!(policy["seed"], 7);
}

#[test]
fn invalid_delta_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "bad.json", |c| c["synthesis"]["delta"] = 0.6.into());
    let o = synth(tmp.path(), &cfg, "x");
    assert!(!o.status.success());
    assert!(stderr(&o).contains("δ out of (0, ½)"), "{}", stderr(&o));
}

#[test]
fn round_limit_exits_nonzero_but_keeps_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "one.json", |c| c["synthesis"]["max_rounds"] = 1.into());
    let o = synth(tmp.path(), &cfg, "x");
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no convergence"));
    assert!(tmp.path().join("x/policy.json").exists());
}

#[test]
fn validate_reports_both_estimates_and_verdict() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    assert!(synth(tmp.path(), &cfg, "a").status.success());
    let policy = tmp.path().join("a/policy.json");
    let out = tmp.path().join("v");
    let o = run(&[
        "validate",
        "--config",
        &cfg,
        "--policy",
        policy.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("p_hat_M (policy)"));
    assert!(text.contains("p_hat_S (simulation)"));
    assert!(text.contains("PASS") || text.contains("FAIL"));

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    let holds = report["p_hat"].as_f64().unwrap() >= report["policy_p_hat"].as_f64().unwrap() - 0.1;
    assert_eq!(report["holds"].as_bool().unwrap(), holds);
    let n = fs::read_dir(out.join("trajectories"))
        .unwrap()
        .filter(|e| !e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".trace.csv"))
        .count();
    assert_eq!(n, 20);
}

#[test]
fn validate_rejects_corrupted_policy() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    let bad = tmp.path().join("policy.json");
    fs::write(&bad, "{\"format\": \"bltl-drive-policy/1\", \"actions\": [").unwrap();
    let o = run(&["validate", "--config", &cfg, "--policy", bad.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("parsing policy"), "{}", stderr(&o));
}

#[test]
fn validate_refuses_mismatched_config_unless_overridden() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    assert!(synth(tmp.path(), &cfg, "a").status.success());
    let other = small_config(tmp.path(), "other.json", |c| c["synthesis"]["episodes"] = 301.into());
    let policy = tmp.path().join("a/policy.json");
    let out = tmp.path().join("v");
    let base = ["validate", "--config", &other, "--policy", policy.to_str().unwrap(), "--trajectories", "0", "--out-dir", out.to_str().unwrap()];

    let o = run(&base);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--override-hash"), "{}", stderr(&o));

    let mut with_override = base.to_vec();
    with_override.push("--override-hash");
    let o = run(&with_override);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
}

fn write_trace(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_prints_the_example_witness() {
    let tmp = TempDir::new().unwrap();
    let t = write_trace(tmp.path(), "ex2.csv", "label,duration\n,6.12\np,0.75\n,0.44\nt,0.61\n,1.66\nd,1.22\n");
    let o = run(&["check", "--trace", &t, "--formula", EXAMPLE_MISSION]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "satisfied\nphase 1: i = 1, k = 1, n = 1\nphase 2: i = 2, k = 2, n = 1\nphase 3: i = 4, k = 2, n = 1\n"
    );
}

#[test]
fn check_accepts_the_inner_figure_trace_and_reports_violations() {
    let tmp = TempDir::new().unwrap();
    let t = write_trace(tmp.path(), "inner.csv", "label,duration\n,5.59\np,1.45\n,0.53\nt,0.56\n,1.62\nd,1.24\n");
    let o = run(&["check", "--trace", &t, "--formula", EXAMPLE_MISSION, "--unsafe", "u"]);
    assert!(stdout(&o).starts_with("satisfied\n"), "{}", stderr(&o));

    let bad = write_trace(tmp.path(), "bad.csv", "label,duration\n,1\nu,1\np,5\n");
    let o = run(&["check", "--trace", &bad, "--formula", EXAMPLE_MISSION]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "violated\n");
}

#[test]
fn check_uses_the_config_formula() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    let t = write_trace(tmp.path(), "m.csv", "label,duration\n,3\np,1\n,2\nt1,1.2\n,1\nd,3\n");
    let o = run(&["check", "--trace", &t, "--config", &cfg]);
    assert_eq!(stdout(&o).lines().next(), Some("satisfied"), "{}", stderr(&o));
}

#[test]
fn check_rejects_empty_trace_and_bad_formula() {
    let tmp = TempDir::new().unwrap();
    let empty = write_trace(tmp.path(), "empty.csv", "label,duration\n");
    let o = run(&["check", "--trace", &empty, "--formula", EXAMPLE_MISSION]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("parsing trace"), "{}", stderr(&o));

    let t = write_trace(tmp.path(), "t.csv", "label,duration\np,1\n");
    let o = run(&["check", "--trace", &t, "--formula", "p U[<=3"]);
    assert!(!o.status.success());
}

fn write_trajectory(dir: &Path, name: &str, pts: &[(f64, f64)]) {
    let mut s = String::from("t,x,y,theta,d\n");
    for (i, (x, y)) in pts.iter().enumerate() {
        s.push_str(&format!("{i},{x},{y},0,0\n"));
    }
    fs::write(dir.join(name), s).unwrap();
}

#[test]
fn plot_draws_one_polyline_per_trajectory() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    let trajs = tmp.path().join("trajs");
    fs::create_dir(&trajs).unwrap();
    for i in 0..20 {
        let suffix = if i % 4 == 0 { "viol" } else { "sat" };
        write_trajectory(&trajs, &format!("traj_{i:03}_{suffix}.csv"), &[(0.3, 1.5), (1.0, 1.0 + 0.05 * i as f64)]);
    }
    fs::write(trajs.join("traj_000_viol.trace.csv"), "label,duration\n,1\n").unwrap();
    let out = tmp.path().join("plots");
    let o = run(&["plot", "--config", &cfg, trajs.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 20);
    assert_eq!(svg.matches("class=\"violating\"").count(), 5);
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn plot_without_trajectories_draws_environment_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    let o = run(&["plot", "--config", &cfg, "--out-dir", tmp.path().to_str().unwrap(), "--name", "env.svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(tmp.path().join("env.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 0);
    assert_eq!(svg.matches("class=\"region\"").count(), 6);
}

#[test]
fn plot_clips_out_of_bounds_trajectories_with_warning() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "run.json", |_| {});
    write_trajectory(tmp.path(), "wild.csv", &[(0.3, 1.5), (6.0, 4.0)]);
    let wild = tmp.path().join("wild.csv");
    let o = run(&["plot", "--config", &cfg, wild.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: trajectory wild.csv leaves the workspace"), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("plot.svg")).unwrap().matches("<polyline").count(), 1);
}
