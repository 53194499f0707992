use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nullfol_cli::config::RunConfig;
use nullfol_cli::runner::{oracle_compare, run};
use serde_json::Value;

fn nullfol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nullfol")).args(args).env("NULLFOL_THREADS", "1").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn cfg(text: &str) -> RunConfig {
    RunConfig::parse(text, Path::new(".")).unwrap()
}

#[test]
fn round_run_tracks_two_over_one_plus_s() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "round.cfg", "[run]\nscenario = minkowski_round\n");
    let out = nullfol(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("round.csv")).unwrap();
    let s = column(&csv, "s");
    let tr = column(&csv, "mean_trchi");
    let dev = column(&csv, "max_abs_trchi_minus_2_over_r");
    assert_eq!(s.len(), 101);
    assert!((s[100] - 1.0).abs() < 1e-12);
    for i in 0..s.len() {
        assert!((tr[i] - 2.0 / (1.0 + s[i])).abs() < 1e-8, "row {i}");
        assert!(dev[i] < 1e-8, "row {i}");
    }
    assert!(csv.ends_with('\n') && !csv.contains('\r'));
    let json = read_json(&dir.path().join("round.json"));
    assert_eq!(json["run"]["termination"], "completed");
}

#[test]
fn anisotropic_run_reports_the_caustic() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "an.cfg", "[run]\nscenario = minkowski_anisotropic\nl_max = 4\nband = 2\ntrchi0 = 0\nchih0 = 1.4142135623730951\n");
    let out = nullfol(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let json = read_json(&dir.path().join("an.json"));
    assert_eq!(json["run"]["termination"], "caustic");
    let s = json["run"]["caustic_s"].as_f64().unwrap();
    assert!((s - 1.0).abs() < 1e-4, "caustic at {s}");
    assert!(dir.path().join("an.csv").exists());
}

#[test]
fn malformed_key_exits_four_naming_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "bad.cfg", "[run]\nscenario = minkowski_round\nstep = 0.01\n");
    let out = nullfol(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3: run.step"), "{err}");
    assert!(!dir.path().join("bad.json").exists());
}

#[test]
fn invalid_value_and_missing_file_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "r0.cfg", "[run]\nr0 = 0.5\n");
    let out = nullfol(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.r0"));
    let missing = dir.path().join("none.cfg");
    assert_eq!(nullfol(&["run", missing.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn usage_errors_exit_four_and_help_exits_zero() {
    assert_eq!(nullfol(&["frobnicate"]).status.code(), Some(4));
    assert_eq!(nullfol(&["audit", "x.cfg", "--suite=nonsense"]).status.code(), Some(4));
    assert_eq!(nullfol(&["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_compare_on_round_data_is_below_1e8() {
    let (e, out) = oracle_compare(&cfg("[run]\nscenario = minkowski_round\nl_max = 6\nband = 2\n")).unwrap();
    assert!(e.max() < 1e-8, "{e:?}");
    assert_eq!(out.report.get("oracle", "match"), Some(&Value::Bool(true)));
}

#[test]
fn oracle_errors_shrink_sixteenfold_when_h_halves() {
    let base = "[run]\nscenario = minkowski_anisotropic\nl_max = 4\nband = 2\ns_end = 0.5\n[tolerances]\nstep_tol = 1\n";
    let with_h = |h: &str| cfg(&base.replacen("s_end = 0.5\n", &format!("s_end = 0.5\nh = {h}\n"), 1));
    let coarse = oracle_compare(&with_h("0.05")).unwrap().0;
    let fine = oracle_compare(&with_h("0.025")).unwrap().0;
    let ratio = coarse.trchi / fine.trchi;
    assert!((ratio - 16.0).abs() < 0.2 * 16.0, "trchi ratio {ratio}");
    let ratio = coarse.max() / fine.max();
    assert!((ratio - 16.0).abs() < 0.2 * 16.0, "max ratio {ratio}");
}

#[test]
fn oracle_compare_at_s_end_zero_is_exact() {
    let (e, _) = oracle_compare(&cfg("[run]\nscenario = minkowski_anisotropic\nl_max = 4\nband = 2\ns_end = 0\ntrchi0 = 1\nchih0 = 0.5\n")).unwrap();
    assert_eq!((e.trchi, e.chih, e.v), (0.0, 0.0, 0.0));
}

#[test]
fn oracle_compare_rejects_inhomogeneous_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "p.cfg", "[run]\nscenario = perturbed\nl_max = 4\nband = 2\n");
    assert_eq!(nullfol(&["oracle-compare", p.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn identities_suite_is_clean_on_the_round_cone() {
    let out = run(&cfg("[run]\nl_max = 8\n[audit]\nsuites = identities\n"), &[nullfol_cli::config::Suite::Identities]).unwrap();
    let sec = out.report.section("identities").unwrap();
    assert_eq!(sec["flag"], "clean");
    assert_eq!(sec["curvature_input"], "consistent");
    for (k, v) in sec {
        if let Some(x) = v.as_f64() {
            assert!(x < 1e-8, "{k} = {x}");
        }
    }
}

#[test]
fn commutators_with_one_leaf_are_skipped_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.cfg", "[run]\nl_max = 4\nband = 2\ns_end = 0\n");
    let out = nullfol(&["audit", p.to_str().unwrap(), "--suite=commutators"]);
    assert_eq!(out.status.code(), Some(0));
    let json = read_json(&dir.path().join("c.json"));
    let sec = json["commutators"].as_object().unwrap();
    assert_eq!(sec.len(), 5);
    assert!(sec.values().all(|v| v.as_str().is_some_and(|s| s.starts_with("skipped"))));
}

#[test]
fn bootstrap_suite_passes_on_small_perturbations() {
    // ε is the sup of a band-limited metric perturbation; curvature-level
    // terms pick up factors of order l², so Δ₀ = 0.01 needs ε well below 1e-3.
    let c = cfg("[run]\nscenario = perturbed\nl_max = 8\nband = 2\neps = 1e-4\ns_end = 0.5\nh = 0.05\n[audit]\ndelta0 = 0.01\naudit_stride = 2\n");
    let out = run(&c, &c.suites).unwrap();
    assert!(out.report.section("bootstrap").is_none());
    let out = run(&c, &[nullfol_cli::config::Suite::Bootstrap]).unwrap();
    let sec = out.report.section("bootstrap").unwrap();
    assert_eq!(sec["all_pass"], true, "{sec:?}");
    assert_eq!(sec["first_failure"], Value::Null);
    for flag in ["BA1", "BA2", "BA3", "BA4", "BA5"] {
        assert!(sec[flag]["margin"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn bootstrap_suite_at_eps_1e3_reports_its_first_failure() {
    let c = cfg("[run]\nscenario = perturbed\nl_max = 8\nband = 2\neps = 1e-3\ns_end = 0.5\nh = 0.05\n[audit]\ndelta0 = 0.01\naudit_stride = 2\n");
    let out = run(&c, &[nullfol_cli::config::Suite::Bootstrap]).unwrap();
    let sec = out.report.section("bootstrap").unwrap();
    for flag in ["BA1", "BA2", "BA3", "BA4", "BA5"] {
        let f = &sec[flag];
        let (bound, lhs) = (f["bound"].as_f64().unwrap(), f["lhs"].as_f64().unwrap());
        assert_eq!(f["pass"].as_bool().unwrap(), lhs <= bound);
    }
    assert_eq!(sec["all_pass"].as_bool().unwrap(), sec["first_failure"].is_null());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[run]\nscenario = synthetic_curvature\nl_max = 6\nband = 3\ns_end = 0.3\nh = 0.05\nseed = 7\n[audit]\nsuites = identities, commutators\naudit_stride = 2\n";
    let mut outs = Vec::new();
    for name in ["a.cfg", "b.cfg"] {
        let p = write_config(dir.path(), name, text);
        assert_eq!(nullfol(&["run", p.to_str().unwrap()]).status.code(), Some(0));
        let stem = &name[..1];
        outs.push((
            std::fs::read(dir.path().join(format!("{stem}.csv"))).unwrap(),
            std::fs::read(dir.path().join(format!("{stem}.json"))).unwrap(),
        ));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn output_paths_come_from_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let p = write_config(dir.path(), "x.cfg", "[run]\nl_max = 4\nband = 2\ns_end = 0.1\ncsv = out/series.csv\njson = out/report.json\n");
    assert_eq!(nullfol(&["run", p.to_str().unwrap()]).status.code(), Some(0));
    assert!(dir.path().join("out/series.csv").exists());
    assert!(dir.path().join("out/report.json").exists());
    assert!(!dir.path().join("x.json").exists());
}
