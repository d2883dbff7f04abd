use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn fraclap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclap")).args(args).output().expect("binary runs")
}

fn square_config(dir: &Path, extra: &str, q: f64) -> String {
    let text = format!(
        r#"{{
  "domain": {{"shape": {{"kind": "rectangle", "l1": 1, "l2": 1}}, "scale": 1}},
  "bc": {{"regime": "neumann"}},
  "grid": {{"resolution": 16}},
  "solve": {{"params": {{"s": 0.5, "q": {q}}}}},
  "seed": 3{extra}
}}"#
    );
    let path = dir.join("run.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_small_square_gives_area_quotient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = square_config(dir.path(), "", 3.0);
    let out = dir.path().join("a");
    let o = fraclap(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&out.join("report.json"));
    assert_eq!(r["report_version"], 1);
    assert_eq!(r["command"], "solve");
    assert!(r["converged"].as_bool().unwrap());
    // |Ω|^{1−2/q} with |Ω| = 1
    assert!((r["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let f = fraclap::io::FieldFile::load(out.join("solution.fld")).unwrap();
    assert_eq!(f.header.dims, [16, 16]);
    assert_eq!(f.header.q, Some(3.0));
}

#[test]
fn solve_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = square_config(dir.path(), r#", "output": {"field": "u.fld"}"#, 3.0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(fraclap(&["solve", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]).status.success());
    assert!(fraclap(&["solve", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "4"]).status.success());
    assert_eq!(std::fs::read(a.join("u.fld")).unwrap(), std::fs::read(b.join("u.fld")).unwrap());
}

#[test]
fn bad_exponent_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = square_config(dir.path(), "", 2.0);
    let o = fraclap(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q∈(2,2*_s)"), "{}", stderr(&o));
}

#[test]
fn unknown_key_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = square_config(dir.path(), r#", "tilling": null"#, 3.0);
    let o = fraclap(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("tilling") && e.contains("line"), "{e}");
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.fld");
    let o = fraclap(&["render", "--input", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_keeps_failures_per_entry() {
    let dir = tempfile::tempdir().unwrap();
    // R = 0.1 is too coarse for 16 nodes per unit length
    let cfg = square_config(dir.path(), r#", "sweep": {"scales": [0.1, 1.0]}"#, 3.0);
    let o = fraclap(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("sweep.json"));
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries[0]["status"], "failed");
    assert_eq!(entries[1]["status"], "ok");
    assert_eq!(r["failed"], 1);
    assert!(dir.path().join("solution_01.fld").exists());
}

#[test]
fn empty_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = square_config(dir.path(), r#", "sweep": {"scales": []}"#, 3.0);
    assert_eq!(fraclap(&["sweep", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn extend_render_and_diagnose_a_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = square_config(dir.path(), r#", "tiling": {"mode": "even", "copies": [2, 2]}"#, 3.0);
    let out = dir.path().to_str().unwrap();
    assert!(fraclap(&["solve", "--config", &cfg, "--out", out]).status.success());
    let sol = dir.path().join("solution.fld");
    let o = fraclap(&["extend", "--config", &cfg, "--input", sol.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("extend.json"));
    assert_eq!(r["accepted"], true);
    let ext = fraclap::io::FieldFile::load(dir.path().join("extended.fld")).unwrap();
    assert_eq!(ext.header.dims, [32, 32]);

    let o = fraclap(&["render", "--input", sol.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let img = std::fs::read(dir.path().join("render.pgm")).unwrap();
    let header = b"P5\n16 16\n255\n";
    assert_eq!(&img[..header.len()], header);
    // constant minimizer renders uniformly
    assert!(img[header.len()..].iter().all(|&p| p == 255));

    let o = fraclap(&["diagnose", "--input", sol.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("diagnose.json"));
    assert!(r["residuals"]["relative_l2"].as_f64().unwrap() < 1e-6);
    assert!(r["concentration"]["weight"].as_f64().is_some());
}

#[test]
fn stverify_half_order_and_rejects_periodic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = square_config(dir.path(), r#", "stverify": {"samples": 2}"#, 3.0);
    let o = fraclap(&["stverify", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("stverify.json"));
    let row = &r["orders"][0];
    assert!(row["max_energy_gap"].as_f64().unwrap() < 1e-8);
    assert!(row["max_trace_mismatch"].as_f64().unwrap() < 1e-4);

    let text = std::fs::read_to_string(&cfg).unwrap().replace("neumann", "periodic");
    std::fs::write(&cfg, text).unwrap();
    let o = fraclap(&["stverify", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
