use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resonant_homog::io::CsvTable;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resonant-homog"));
    c.env_remove("RH_THREADS");
    c
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().arg(args[0]).arg("--config").arg(config).arg("--out").arg(out).args(&args[1..]).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

const DIRAC: &str = r#"{
    "center": { "x": { "kind": "dirac", "value": 0.5 }, "y": { "kind": "dirac", "value": 0.5 } },
    "radius": { "kind": "dirac", "value": 0.375 },
    "permittivity": { "re": { "kind": "dirac", "value": 100.0 }, "im": { "kind": "dirac", "value": IM } },
    "delta": 0.1
}"#;

fn dirac(im: f64) -> String {
    DIRAC.replace("IM", &format!("{im:?}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fig2_preset_writes_two_curves_and_a_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["mu-sweep"], &preset("fig2.json"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["fig2_mu_dirac.csv", "fig2_mu_uniform.csv", "fig2_mu.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let text = std::fs::read_to_string(dir.path().join("fig2_mu_dirac.csv")).unwrap();
    let t = CsvTable::parse(&text).unwrap();
    assert_eq!(t.rows.len(), 400);
    assert!(t.comments.iter().any(|c| c.starts_with("config_sha256=") && c.contains("seed=0")));
    let svg = std::fs::read_to_string(dir.path().join("fig2_mu.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn fig3_preset_writes_the_limit_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["mu-limit"], &preset("fig3.json"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let t = CsvTable::parse(&std::fs::read_to_string(dir.path().join("fig3_mu_limit.csv")).unwrap()).unwrap();
    let hs = t.column("h").unwrap();
    assert_eq!(hs.len(), 3 * 400);
    for h in [0.0, 1.0, 5.0] {
        assert_eq!(hs.iter().filter(|&&x| x == h).count(), 400);
    }
    assert!(t.column("im_mu").unwrap().iter().all(|&v| v >= 0.0));
    assert!(dir.path().join("fig3_mu_limit.svg").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert!(run(&["mu-sweep"], &preset("fig2.json"), d.path()).status.success());
    }
    for f in ["fig2_mu_dirac.csv", "fig2_mu_uniform.csv", "fig2_mu.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{"laws": {{"d": {}}}, "numerics": {{"eta": 0.2}}}}"#, dirac(5.0)));
    let o = run(&["sample", "--seed", "9"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("rods_d.csv")).unwrap();
    let t = CsvTable::parse(&text).unwrap();
    assert!(!t.rows.is_empty());
    assert_eq!(t.render(), text);
    assert!(t.comments.iter().any(|c| c.contains("seed=9")));
}

#[test]
fn seed_flag_changes_samples_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{"laws": {{"d": {}}}}}"#, dirac(5.0)));
    let read = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        assert!(run(&["sample", "--seed", seed], &cfg, &out).status.success());
        std::fs::read_to_string(out.join("rods_d.csv")).unwrap()
    };
    let (a, b, c) = (read("1", "a"), read("1", "b"), read("2", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn empty_law_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"laws": {}, "sweep": {"k0": {"values": [0.5]}}}"#);
    let o = run(&["mu-sweep"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`laws`"), "{}", stderr(&o));
}

#[test]
fn unknown_field_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{"laws": {{"d": {}}}, "numerics": {{"resolutoin": 64}}}}"#, dirac(5.0)));
    let o = run(&["eps-eff"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("numerics"), "{}", stderr(&o));
}

#[test]
fn inadmissible_law_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{"laws": {{"d": {}}}}}"#, dirac(5.0).replace("0.1\n", "0.2\n")));
    let o = run(&["eps-eff"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("laws.d"), "{}", stderr(&o));
}

#[test]
fn lossless_law_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(r#"{{"laws": {{"d": {}}}, "sweep": {{"lambda": {{"from": 6, "to": 20, "count": 50}}}}}}"#, dirac(0.0));
    let cfg = write_config(dir.path(), &body);
    let o = run(&["mu-sweep"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("mu_d.csv").exists());
    let o = run(&["mu-sweep", "--force"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("mu_d.csv").exists());
}

#[test]
fn oversized_system_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(r#"{{"laws": {{"d": {}}}, "scatter": {{"k0": 1.0, "eta": 0.125, "max_unknowns": 100}}}}"#, dirac(5.0));
    let cfg = write_config(dir.path(), &body);
    let o = run(&["scatter"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn scatter_writes_both_far_fields() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"laws": {{"d": {}}}, "scatter": {{"k0": 1.15, "eta": 0.25, "rod_order": 3}}, "numerics": {{"resolution": 64}}}}"#,
        dirac(5.0)
    );
    let cfg = write_config(dir.path(), &body);
    let o = run(&["scatter"], &cfg, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["farfield.csv", "farfield_hom.csv"] {
        let t = CsvTable::parse(&std::fs::read_to_string(dir.path().join(f)).unwrap()).unwrap();
        assert_eq!(t.header, ["angle", "re_f", "im_f"]);
        assert_eq!(t.rows.len(), 720);
    }
}

#[test]
fn command_mismatch_is_rejected() {
    let o = run(&["mu-limit"], &preset("fig2.json"), Path::new("."));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`command`"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = bin()
        .env("RH_THREADS", "zero")
        .args(["mu-sweep", "--config"])
        .arg(preset("fig2.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("RH_THREADS"));
}
