use std::path::{Path, PathBuf};
use std::process::Command as Process;

use fsde_cli::output::without_timestamp;
use fsde_cli::{execute, Budget, Command, CommonArgs, RunConfig};
use proptest::prelude::*;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fsde(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Process::new(env!("CARGO_BIN_EXE_fsde"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn cfg(name: &str) -> String {
    configs().join(format!("{name}.toml")).to_string_lossy().into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("model.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn args(config: &str, out: &Path) -> CommonArgs {
    CommonArgs {
        config: PathBuf::from(config),
        seed: None,
        out: Some(out.to_path_buf()),
        budget: Budget::Smoke,
        checks: Vec::new(),
        quiet: true,
    }
}

#[test]
fn every_bundled_config_parses_and_builds() {
    for e in std::fs::read_dir(configs()).unwrap() {
        let p = e.unwrap().path();
        let (c, _) = RunConfig::load(&p).unwrap();
        c.build_model().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = fsde(&["certify", "--config", &cfg("ou"), "--budget", "smoke"], dir.path());
    assert_eq!(code, 0, "{out}");
    assert!(dir.path().join("certify.json").exists());
    let (code, out, _) = fsde(&["certify", "--config", &cfg("infeasible"), "--budget", "smoke"], dir.path());
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("margin"));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let (code, _, err) = fsde(&["certify", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(code, 2, "{err}");

    let p = write_config(dir.path(), "[model]\nr0 = 1.0\nsigma = [1.0]\ncolour = \"red\"\n");
    let (code, _, err) = fsde(&["certify", "--config", &p], dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("colour"), "{err}");

    let p = write_config(dir.path(), "[model]\nr0 = 1.0\nsigma = [1.0, 0.0]\n");
    let (code, _, _) = fsde(&["certify", "--config", &p], dir.path());
    assert_eq!(code, 2);
}

#[test]
fn unknown_check_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = fsde(
        &["verify", "--config", &cfg("ou"), "--budget", "smoke", "--check", "telepathy"],
        dir.path(),
    );
    assert_eq!(code, 2);
    assert!(err.contains("telepathy"));
}

#[test]
fn spectral_without_linear_part_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "[model]\nr0 = 1.0\nsigma = [1.0]\nz = { kind = \"linear_cubic\", a = 1.0, c = 1.0 }\n",
    );
    let (code, _, _) = fsde(&["spectral", "--config", &p], dir.path());
    assert_eq!(code, 2);
}

#[test]
fn negative_control_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = fsde(&["verify", "--config", &cfg("ou_negative_control"), "--budget", "smoke"], dir.path());
    assert_eq!(code, 1, "{out}");
    assert!(dir.path().join("verify_contraction.csv").exists());
}

#[test]
fn spectral_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = execute(&Command::Spectral(args(&cfg("example_cor14"), dir.path()))).unwrap();
    assert_eq!(out.exit_code, 0);
    let l0 = out.report["result"]["lambda0"]["lambda0"].as_f64().unwrap();
    assert!((l0 + 1.0).abs() < 1e-6);
    assert!(out.report["result"]["pp_table_ratio_max"].as_f64().unwrap() <= 1.0);
    for f in ["gamma.csv", "ck.csv", "spectral.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn report_envelope_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = execute(&Command::Certify(args(&cfg("ou"), dir.path()))).unwrap();
    let r = &out.report;
    for key in ["schema", "tool", "version", "command", "config_hash", "seed", "budget", "exit_code", "timestamp", "result"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert_eq!(r["command"], "certify");
    assert_eq!(r["budget"], "smoke");
    assert_eq!(r["seed"], 42);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_override_changes_simulation_only_through_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut x = args(&cfg("delayed_linear"), a.path());
    let first = execute(&Command::Simulate(x.clone())).unwrap();
    x.out = Some(b.path().to_path_buf());
    x.seed = Some(7);
    let second = execute(&Command::Simulate(x)).unwrap();
    assert_eq!(second.report["seed"], 7);
    assert_ne!(first.report["result"]["endpoint_mean"], second.report["result"]["endpoint_mean"]);
    assert_eq!(first.report["result"]["steps"], second.report["result"]["steps"]);
}

#[test]
fn repeated_runs_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = execute(&Command::Verify(args(&cfg("delayed_linear"), a.path()))).unwrap();
    let rb = execute(&Command::Verify(args(&cfg("delayed_linear"), b.path()))).unwrap();
    assert_eq!(without_timestamp(ra.report), without_timestamp(rb.report));
    let ca = std::fs::read(a.path().join("verify_contraction.csv")).unwrap();
    let cb = std::fs::read(b.path().join("verify_contraction.csv")).unwrap();
    assert_eq!(ca, cb);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn config_round_trips_through_toml(a in -5.0f64..-0.01, seed in 0..=i64::MAX as u64, r0 in 0.25f64..4.0, lambda1 in 0.1f64..5.0) {
        let text = format!(
            "[model]\nr0 = {r0}\nsigma = [1.0]\nz = {{ kind = \"linear\", a = [{a}] }}\n\
             [certificates]\nlambda1 = {lambda1}\nlambda2 = 0.0\n[sim]\nseed = {seed}\n"
        );
        let c = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(c.sim.seed, seed);
        let back = RunConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
    }

    #[test]
    fn unknown_keys_rejected_in_every_section(section in prop::sample::select(vec!["model", "certificates", "sim", "spectral", "verify", "output"])) {
        let mut text = String::from("[model]\nr0 = 1.0\nsigma = [1.0]\n");
        if section != "model" {
            text.push_str(&format!("[{section}]\n"));
        }
        text.push_str("bogus_key = 1\n");
        prop_assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn budgets_grow(i in 0usize..2) {
        let b = [Budget::Smoke, Budget::Default, Budget::Deep];
        let (lo, hi) = (b[i], b[i + 1]);
        prop_assert!(lo.replicas() < hi.replicas());
        prop_assert!(lo.cells() < hi.cells());
        prop_assert!(lo.ensemble() < hi.ensemble());
    }
}
