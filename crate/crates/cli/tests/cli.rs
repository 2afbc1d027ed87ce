use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use spinloop_cli::run::{simulate, sweep, verify};
use spinloop_cli::scenario::{preset_names, Scenario, OUT_DIR_ENV};
use spinloop_cli::units::UnitSystem;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinloop"));
    c.env_remove(OUT_DIR_ENV);
    c
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ZERO: &str = r#"
[profile]
kind = "circular"
xi0 = 0.0
alpha0 = 0.0
n = 3

[verify]
n_x = 128
steps = 4096
"#;

proptest! {
    #[test]
    fn unit_conversion_round_trips(m in 0.005..1.0f64, e in 0.05..20.0f64, v in -1e4..1e4f64) {
        let u = UnitSystem::new(m, e).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE);
        prop_assert!(close(u.length_from_scaled(u.length_to_scaled(v)), v));
        prop_assert!(close(u.velocity_from_scaled(u.velocity_to_scaled(v)), v));
        prop_assert!(close(u.time_from_scaled(u.time_to_scaled(v)), v));
        prop_assert!(close(u.energy_from_scaled(u.energy_to_scaled(v)), v));
    }
}

#[test]
fn every_preset_parses() {
    for name in preset_names() {
        Scenario::preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert!(Scenario::preset("nope").is_err());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let o = bin()
            .args(["simulate", "--preset", "circular-n3", "--samples", "512", "--out-dir"])
            .arg(dir)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn config_errors_carry_line_numbers_and_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "bad.toml",
        "[profile]\nkind = \"circular\"\nxi0 = 1.0\nalpha0 = 1.0\nn = 3\nwobble = 2\n",
    );
    let o = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));

    let cfg = write(
        d.path(),
        "kind.toml",
        "[profile]\nkind = \"circular\"\nxi0 = 1.0\nalpha0 = 1.0\nn = 3\nramp = \"sinusoidal\"\n",
    );
    let o = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6") && stderr(&o).contains("ramp"), "{}", stderr(&o));

    let cfg = write(d.path(), "units.toml", "[units]\nm_star_me = 0.015\n\n[params]\nm_star = 2.0\n\n[profile]\nkind = \"circular\"\nxi0 = 1\nalpha0 = 1\nn = 3\n");
    let o = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));

    let o = bin().arg("simulate").arg(d.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_verification_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify", "--preset", "circular-n3", "--n-x", "128", "--steps", "32", "--out-dir"])
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("circular_n3_verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn verify_work_guard_is_a_config_error() {
    let o = bin()
        .args(["verify", "--preset", "circular-n3", "--n-x", "65536", "--steps", "65536"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_dir_precedence() {
    let d = tempfile::tempdir().unwrap();
    let (env_dir, flag_dir) = (d.path().join("env"), d.path().join("flag"));
    let cfg = write(d.path(), "zero.toml", &format!("{ZERO}\n[outputs]\ndir = \"cfg\"\n"));
    let o = bin().arg("contours").arg(&cfg).env(OUT_DIR_ENV, &env_dir).current_dir(d.path()).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_dir.join("run_C1.csv").exists());
    let o = bin()
        .arg("contours")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&flag_dir)
        .env(OUT_DIR_ENV, &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("run_C_ad.csv").exists());
    let o = bin().arg("contours").arg(&cfg).current_dir(d.path()).output().unwrap();
    assert!(o.status.success());
    assert!(d.path().join("cfg/run_C5.csv").exists());
}

#[test]
fn header_reports_conversion_factors() {
    let d = tempfile::tempdir().unwrap();
    let o = bin().args(["simulate", "--preset", "insb-square", "--out-dir"]).arg(d.path()).output().unwrap();
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().next().unwrap().contains("length unit 71.27"), "{out}");
}

#[test]
fn zero_driving_is_trivial() {
    let d = tempfile::tempdir().unwrap();
    let s = Scenario::from_toml_str(ZERO, d.path()).unwrap();
    let sim = simulate(&s).unwrap();
    let ph = &sim.phases;
    for v in [ph.phi_t, ph.phi_c, ph.phi_a, ph.phi_ad, ph.action_s] {
        assert_eq!(v, 0.0);
    }
    let m = sim.holonomy.matrix;
    assert!(m[(0, 1)].norm() < 1e-15 && (m[(0, 0)] - m[(1, 1)]).norm() < 1e-15);
    let report = verify(&s).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn n_sweep_ratio() {
    let s = Scenario::preset("circular-adiabatic-sweep").unwrap();
    let table = sweep(&s).unwrap();
    assert_eq!(table.rows.len(), 31);
    for (i, r) in table.rows.iter().enumerate() {
        assert_eq!(r.index, i);
        let n = r.value;
        let want = n * n / (n * n - 1.0);
        assert!((r.phases.phi_t / r.phases.phi_ad - want).abs() < 1e-8, "n = {n}");
    }
    assert!(table.crossings.is_empty());
}

#[test]
fn sweep_rows_do_not_depend_on_thread_count() {
    let d = tempfile::tempdir().unwrap();
    let mut files = vec![];
    for t in ["1", "4"] {
        let out = d.path().join(t);
        let o = bin()
            .args(["sweep", "--preset", "ellipsoidal-delay-sweep", "--threads", t, "--out-dir"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        files.push(std::fs::read(out.join("ellipsoidal_sweep.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn sweep_requires_a_sweep_section() {
    let o = bin().args(["sweep", "--preset", "circular-n3"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
