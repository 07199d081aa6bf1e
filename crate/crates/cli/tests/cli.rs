use std::path::Path;
use std::process::{Command, Output};

use isomesh::io::{load_mesh, save_face_function, FORMAT_VERSION};
use isomesh::{FaceFunction, QuadGrid};

fn isomesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isomesh"))
        .args(args)
        .output()
        .expect("run isomesh")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn sample_then_check_satisfies_stokes() {
    let dir = tempfile::tempdir().unwrap();
    // Write the product torus as an immersion file, taken from the
    // provenance of a library sample, and sample from the file.
    let lib = p(dir.path(), "lib.json");
    assert!(isomesh(&["sample", "--imm", "product", "--N", "4", "--out", &lib])
        .status
        .success());
    let spec = load_mesh(lib.as_ref()).unwrap().provenance.unwrap().immersion.unwrap();
    let spec_path = p(dir.path(), "product.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let m = p(dir.path(), "m.json");
    assert!(
        isomesh(&["sample", "--imm", &spec_path, "--N", "16", "--n", "2", "--out", &m])
            .status
            .success()
    );
    let report = json(&isomesh(&["check", &m]));
    assert!(report["stokes_sum"].as_f64().unwrap().abs() <= 1e-10);
    assert_eq!(load_mesh(m.as_ref()).unwrap().header.format_version, FORMAT_VERSION);
}

#[test]
fn flow_converges_on_perturbed_product_torus() {
    let dir = tempfile::tempdir().unwrap();
    let (m, f) = (p(dir.path(), "m.json"), p(dir.path(), "f.json"));
    assert!(
        isomesh(&["sample", "--imm", "product", "--N", "16", "--noise", "0.01", "--seed", "1", "--out", &m])
            .status
            .success()
    );
    let report = json(&isomesh(&["flow", &m, "--tol", "1e-6", "--out", &f]));
    assert_eq!(report["termination"], "Converged");
    let trace = std::fs::read_to_string(p(dir.path(), "f.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("step,energy,max_density,dt"));
    assert!(json(&isomesh(&["check", &f]))["max_density"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn study_eta_decays() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "eta.csv");
    let summary = json(&isomesh(&["study", "eta", "--N", "8,16,32,64", "--out", &out]));
    assert!(summary["slope"].as_f64().unwrap() <= -0.8);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 5);
}

#[test]
fn perturb_refine_export_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (rho, tri, obj) = (
        p(dir.path(), "rho.json"),
        p(dir.path(), "tri.json"),
        p(dir.path(), "tri.obj"),
    );
    let report = json(&isomesh(&[
        "perturb",
        "--imm",
        "bumped-product",
        "--N",
        "8",
        "--out",
        &rho,
    ]));
    assert_eq!(report["converged"], true);
    assert!(isomesh(&["refine", &rho, "--out", &tri]).status.success());
    let check = json(&isomesh(&["check", &tri]));
    assert!(check["max_triangle_residual"].as_f64().unwrap() <= 1e-10);
    let summary = json(&isomesh(&["export", &tri, "--out", &obj]));
    let text = std::fs::read_to_string(&obj).unwrap();
    assert_eq!(
        text.lines().filter(|l| l.starts_with("v ")).count() as u64,
        summary["vertices"].as_u64().unwrap()
    );
    assert_eq!(
        text.lines().filter(|l| l.starts_with("f ")).count() as u64,
        summary["faces"].as_u64().unwrap()
    );
}

#[test]
fn norms_of_comb_function() {
    let dir = tempfile::tempdir().unwrap();
    let file = p(dir.path(), "comb.json");
    let grid = std::sync::Arc::new(QuadGrid::square(8).unwrap());
    save_face_function(file.as_ref(), &FaceFunction::comb(grid)).unwrap();
    let norm = json(&isomesh(&["norms", &file, "--k", "2", "--exact-holder"]));
    assert!((norm["weak_total"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(isomesh(&[]).status.code(), Some(64));
    assert_eq!(isomesh(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(isomesh(&["sample", "--N", "8"]).status.code(), Some(64));
    assert_eq!(isomesh(&["--help"]).status.code(), Some(0));
    assert_eq!(
        isomesh(&["check", &p(dir.path(), "missing.json")]).status.code(),
        Some(1)
    );
    let bad = p(dir.path(), "bad.json");
    std::fs::write(&bad, "{\"header\": 3}").unwrap();
    assert_eq!(isomesh(&["check", &bad]).status.code(), Some(1));
    assert_eq!(
        isomesh(&["sample", "--imm", "sphere", "--N", "8", "--out", &bad])
            .status
            .code(),
        Some(1)
    );
    // Refining a non-isotropic sample is a validation failure.
    let m = p(dir.path(), "m.json");
    assert!(isomesh(&["sample", "--imm", "bumped-product", "--N", "8", "--out", &m])
        .status
        .success());
    assert_eq!(
        isomesh(&["refine", &m, "--out", &p(dir.path(), "t.json")])
            .status
            .code(),
        Some(1)
    );
    // A flow with a one-step budget fails as a solver failure.
    let out = isomesh(&["flow", &m, "--max-steps", "1", "--out", &p(dir.path(), "f.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = p(dir.path(), name);
        assert!(isomesh(&[
            "sample",
            "--imm",
            "triple-product",
            "--N",
            "8",
            "--noise",
            "0.1",
            "--seed",
            "9",
            "--out",
            &out
        ])
        .status
        .success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}
