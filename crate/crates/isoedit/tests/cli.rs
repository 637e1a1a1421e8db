use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isoedit::checkpoint::{Checkpoint, Encoding};
use isoedit::mesh_io;
use isoedit_core::{AnalyticField, FieldModel, ImplicitField};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn isoedit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoedit")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn analytic_checkpoint(dir: &Path, name: &str, f: AnalyticField) -> String {
    let p = dir.join(name);
    Checkpoint::from(FieldModel::Analytic(f)).save(&p, Encoding::Plain).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn mesh_of_fitted_sphere_has_unit_ball_volume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sphere.obj");
    let model = fixture("sphere.json");
    let v = stdout_json(&isoedit(&["mesh", "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let vol = v["volume"].as_f64().unwrap();
    assert!((vol - 4.0 * PI / 3.0).abs() <= 0.02 * 4.0 * PI / 3.0, "volume {vol}");
    let mesh = mesh_io::read_obj(&out).unwrap();
    assert_eq!(mesh.triangles.len() as u64, v["triangles"].as_u64().unwrap());
    assert!((mesh.enclosed_volume() - vol).abs() < 1e-3 * vol);
}

#[test]
fn basis_of_radius_parameter_is_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let model = analytic_checkpoint(dir.path(), "s.json", AnalyticField::sphere(1.0));
    let out = dir.path().join("basis.bin");
    let args = ["basis-viz", "--model", &model, "--param-index", "0", "--res", "24", "--out", out.to_str().unwrap()];
    let v = stdout_json(&isoedit(&args));
    assert!((v["min"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["max"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let mesh = mesh_io::from_binary(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(mesh.channels[0].name, "basis_0");
    assert!(mesh.channels[0].values.iter().all(|b| (b - 1.0).abs() < 1e-6));

    let bad = isoedit(&["basis-viz", "--model", &model, "--param-index", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stderr_json(&bad)["error"]["field"], "param_index");
}

#[test]
fn malformed_spec_exits_two_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let model = analytic_checkpoint(dir.path(), "s.json", AnalyticField::sphere(1.0));
    let out = dir.path().join("out.json");
    let cases = [
        (r#"{"targets":[{"region":{"type":"all"},"displacement":{"type":"normal","value":"up"}}]}"#, "targets[0].displacement"),
        (r#"{"targets":[{"region":{"type":"all"},"displacement":{"type":"normal","value":0.1}}],"lamda":0.1}"#, "lamda"),
        (r#"{"targets":[{"region":{"type":"all"},"displacement":{"type":"normal","value":0.1}}],"lambda":-1}"#, "lambda"),
        (r#"{"targets":[]}"#, "targets"),
    ];
    for (text, field) in cases {
        let spec = dir.path().join("spec.json");
        std::fs::write(&spec, text).unwrap();
        let r = isoedit(&["edit", "--model", &model, "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(2), "{text}");
        let err = stderr_json(&r);
        let got = err["error"]["field"].as_str().unwrap_or_default().to_owned();
        assert!(got.contains(field), "{text}: field {got:?} in {err}");
    }
    assert!(!out.exists());
}

#[test]
fn usage_errors_and_missing_files() {
    let r = isoedit(&["mesh", "--bogus"]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(stderr_json(&r)["error"]["kind"], "usage");
    let r = isoedit(&["volume", "--model", "/nonexistent/model.json"]);
    assert_eq!(r.status.code(), Some(4));
    assert!(isoedit(&["--help"]).status.success());
}

#[test]
fn edit_inflates_an_analytic_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let model = analytic_checkpoint(dir.path(), "s.json", AnalyticField::sphere(1.0));
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"targets":[{"region":{"type":"all"},"displacement":{"type":"normal","value":0.1}}],"splits":1}"#,
    )
    .unwrap();
    let out = dir.path().join("edited.json");
    let rep = dir.path().join("report.csv");
    let v = stdout_json(&isoedit(&[
        "edit", "--model", &model, "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--report", rep.to_str().unwrap(),
    ]));
    assert_eq!(v["iterations"], 1);
    let FieldModel::Analytic(f) = Checkpoint::load(&out).unwrap().into_field().unwrap() else { panic!() };
    // 100 unit basis rows and λ = 0.1 shrink the update by 100 / 100.1.
    assert!((f.params()[0] - 1.0 - 0.1 * 100.0 / 100.1).abs() < 1e-6, "{}", f.params()[0]);
    let csv = std::fs::read_to_string(rep).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn smoothing_shrinks_and_volume_reports() {
    let dir = tempfile::tempdir().unwrap();
    let model = analytic_checkpoint(dir.path(), "e.json", AnalyticField::ellipsoid(1.0, 0.6, 0.5));
    let trace = dir.path().join("trace.csv");
    let out = dir.path().join("smooth.json");
    let v = stdout_json(&isoedit(&[
        "smooth", "--model", &model, "--iters", "3", "--tau", "0.005", "--samples", "200", "--volume-res", "48",
        "--trace", trace.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]));
    assert_eq!(v["steps"], 3);
    assert!(v["relative_volume_change"].as_f64().unwrap() < 0.0);
    // header, initial volume, one row per step
    assert_eq!(std::fs::read_to_string(trace).unwrap().lines().count(), 5);
    let vol = stdout_json(&isoedit(&["volume", "--model", out.to_str().unwrap(), "--res", "48"]));
    let last = v["volumes"].as_array().unwrap().last().unwrap().as_f64().unwrap();
    assert!((vol["volume"].as_f64().unwrap() - last).abs() < 1e-12);
}

#[test]
fn failed_fit_reports_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");
    let r = isoedit(&["fit", "--target", "sphere:0.8", "--iterations", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    assert_eq!(stderr_json(&r)["error"]["kind"], "fit_failure");
    let r = isoedit(&["fit", "--target", "pyramid", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(stderr_json(&r)["error"]["field"], "target");
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let model = analytic_checkpoint(dir.path(), "s.json", AnalyticField::sphere(1.0));
    let cfg = dir.path().join("isoedit.toml");
    std::fs::write(&cfg, "volume_resolution = 40\n").unwrap();
    let v = stdout_json(&isoedit(&["--config", cfg.to_str().unwrap(), "volume", "--model", &model]));
    assert_eq!(v["res"], 40);
    std::fs::write(&cfg, "volume_resolution = \"high\"\n").unwrap();
    let r = isoedit(&["--config", cfg.to_str().unwrap(), "volume", "--model", &model]);
    assert_eq!(r.status.code(), Some(2));
}
