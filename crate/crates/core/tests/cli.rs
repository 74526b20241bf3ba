use std::path::Path;
use std::process::Command;

use cevnorm::cli::{execute, Outcome, LEAVES, COMMANDS, EXIT_CONFIG, EXIT_DATA, EXIT_PASS, EXIT_VERDICT};
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Outcome {
    try_run(dir, args).unwrap_or_else(|f| panic!("exit {}: {}", f.code, f.message))
}

fn try_run(dir: &Path, args: &[&str]) -> Result<Outcome, cevnorm::cli::Failure> {
    let out = dir.to_str().unwrap().to_owned();
    let mut argv = vec!["cevnorm"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", &out]);
    execute(argv)
}

fn metric(o: &Outcome, key: &str) -> f64 {
    o.report.metrics[key].as_f64().unwrap_or_else(|| panic!("metric {key} missing"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cevnorm"))
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str| {
        let d = dir.path().join(sub);
        let status = bin()
            .args(["simulate", "--n", "10", "--seed", "1", "--formats", "csv,binary", "--out"])
            .arg(&d)
            .output()
            .unwrap();
        assert!(status.status.success());
        (std::fs::read(d.join("sample_t50.csv")).unwrap(), std::fs::read(d.join("sample_t50.bin")).unwrap())
    };
    let (csv_a, bin_a) = read("a");
    let (csv_b, bin_b) = read("b");
    assert_eq!(csv_a, csv_b);
    assert_eq!(bin_a, bin_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().next(), Some("x0,x1,x2"));
}

#[test]
fn simulate_writes_one_file_per_level() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["simulate", "--n", "20", "--t-list", "10,100,1000"]);
    for t in ["10", "100", "1000"] {
        assert!(dir.path().join(format!("sample_t{t}.csv")).exists());
    }
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn invalid_value_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "model": {"erv1": {"rho": "x"}}}"#).unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.erv1.rho"), "{err}");

    std::fs::write(&cfg, r#"{"schema_version": 1, "run": {"seeds": 3}}"#).unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "run": {"n": 7, "seed": 5}}"#).unwrap();
    let o = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "6"]);
    assert_eq!(o.report.config.run.n, 7);
    assert_eq!(o.report.config.run.seed, 6);
}

#[test]
fn help_lists_every_flag_for_every_command() {
    for (name, _) in COMMANDS {
        let out = bin().args([name, "--help"]).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in LEAVES.iter().map(|l| l.flag).chain(["config", "threads", "out"]) {
            assert!(text.contains(&format!("--{flag} ")), "{name} --help lacks --{flag}");
        }
    }
}

#[test]
fn verify_rn_passes_on_canonical_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["verify-rn", "--n", "100000", "--b", "199", "--delta-max", "0.012", "--significance", "0.01", "--ks-max", "0.01"],
    );
    assert_eq!(o.code, EXIT_PASS, "{}", o.report.to_json());
    assert_eq!(o.report.passed, Some(true));
}

#[test]
fn verify_rn_fails_on_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["verify-rn", "--comonotone-control", "true", "--n", "20000", "--b", "99", "--significance", "0.01"],
    );
    assert_eq!(o.code, EXIT_VERDICT);
    assert_eq!(metric(&o, "p_value"), 1.0 / 100.0);
}

#[test]
fn constant_norming_rn_and_dn_agree() {
    let dir = tempfile::tempdir().unwrap();
    let model = ["--erv1-rho", "0", "--erv1-kappa", "0", "--erv2-rho", "0", "--erv2-kappa", "0"];
    let common = ["--n", "5000", "--b", "99"];
    let args = |cmd: &'static str| [&[cmd][..], &model[..], &common[..]].concat();
    let rn = run(dir.path(), &args("verify-rn"));
    let dn = run(dir.path(), &args("verify-dn"));
    for key in ["delta", "p_value", "n"] {
        assert_eq!(rn.report.metrics[key], dn.report.metrics[key], "{key}");
    }
}

#[test]
fn verify_dn_matches_limit_and_rejects_factorization() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["verify-dn", "--n", "100000", "--b", "199", "--significance", "0.01", "--gap-tol", "1e-6", "--ecdf-max", "0.01"],
    );
    assert_eq!(o.code, EXIT_PASS, "{}", o.report.to_json());
    assert!(metric(&o, "ecdf_sup") < 0.01);
    assert_eq!(o.report.metrics["independence_rejected"], Value::Bool(true));
}

#[test]
fn verify_dn_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let f = try_run(dir.path(), &["verify-dn", "--grid-levels", ""]).unwrap_err();
    assert_eq!(f.code, EXIT_CONFIG);
    assert!(f.message.contains("grid_levels"));
}

#[test]
fn limit_h_surface_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["limit-h", "--x1-grid=-3,-1,0,1,3,1e6", "--x2-grid=-3,-1,0,1,3,1e6"]);
    let mut rdr = csv::Reader::from_path(dir.path().join("h_surface.csv")).unwrap();
    let h: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(h.len(), 36);
    for j in 0..6 {
        for l in 0..6 {
            if l + 1 < 6 {
                assert!(h[j * 6 + l] <= h[j * 6 + l + 1]);
            }
            if j + 1 < 6 {
                assert!(h[j * 6 + l] <= h[(j + 1) * 6 + l]);
            }
        }
    }
    assert!(h[35] > 1.0 - 1e-3, "{}", h[35]);
}

#[test]
fn gap_verdicts_and_reproducible_hash() {
    let dir = tempfile::tempdir().unwrap();
    let deg = run(dir.path(), &["gap", "--erv2-rho", "0", "--erv2-kappa", "0", "--gap-tol", "1e-8"]);
    assert!(metric(&deg, "gap") <= 1e-8);
    assert_eq!(deg.code, EXIT_PASS);
    let pos = run(dir.path(), &["gap", "--gap-tol", "1e-8"]);
    assert!(metric(&pos, "gap") > 0.01);
    assert_eq!(pos.code, EXIT_PASS);
    let again = run(dir.path(), &["gap", "--gap-tol", "1e-8"]);
    assert_eq!(pos.report.config_hash, again.report.config_hash);
    assert_eq!(pos.report.deterministic_json(), again.report.deterministic_json());
}

#[test]
fn chi_synthetic_references() {
    let dir = tempfile::tempdir().unwrap();
    let co = run(dir.path(), &["chi", "--synthetic", "comonotone", "--n", "100000", "--chi-tol", "1e-12"]);
    assert_eq!(co.report.metrics["chi"], serde_json::json!([1.0, 1.0, 1.0]));
    assert_eq!(co.code, EXIT_PASS);
    let ind = run(dir.path(), &["chi", "--synthetic", "independent", "--n", "1000000", "--chi-levels", "0.5,0.9"]);
    let chi: Vec<f64> = serde_json::from_value(ind.report.metrics["chi"].clone()).unwrap();
    assert!((chi[0] - 0.25).abs() < 0.005, "{chi:?}");
    assert!((chi[1] - 0.01).abs() < 0.003, "{chi:?}");
}

#[test]
fn diagnose_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    run(&sim, &["simulate", "--t", "1", "--n", "200000", "--seed", "3"]);
    let data = sim.join("sample_t1.csv");
    let o = run(
        dir.path(),
        &["diagnose", "--data-path", data.to_str().unwrap(), "--b", "199", "--significance", "0.05"],
    );
    assert_eq!(o.code, EXIT_PASS, "{}", o.report.to_json());
    assert!((metric(&o, "rho1") - 0.5).abs() < 0.1);
    assert!(dir.path().join("fit.json").exists());
    assert!(dir.path().join("residuals.csv").exists());

    let missing = dir.path().join("absent.csv");
    let f = try_run(dir.path(), &["diagnose", "--data-path", missing.to_str().unwrap()]).unwrap_err();
    assert_eq!(f.code, EXIT_DATA);

    let small = dir.path().join("small.csv");
    std::fs::write(&small, "x0,x1,x2\n1,2,3\n2,3,4\n3,4,5\n").unwrap();
    let f = try_run(dir.path(), &["diagnose", "--data-path", small.to_str().unwrap()]).unwrap_err();
    assert_eq!(f.code, EXIT_CONFIG);
    assert!(f.message.contains("at least 100"), "{}", f.message);
}

#[test]
fn threads_env_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("CEVNORM_THREADS", "2")
        .args(["simulate", "--n", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["command"], "simulate");
    assert!(report.get("wall_clock_seconds").is_some());
}
