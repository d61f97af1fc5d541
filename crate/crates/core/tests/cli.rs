use std::path::Path;
use std::process::{Command, Output};

use facefit::cli::RunManifest;
use facefit::formats::{read_pcf, write_pcf};
use facefit::geometry::{Point3, PointCloud};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facefit")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = bin(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = bin(&["synth", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:usage: "), "{}", stderr(&o));
}

#[test]
fn missing_subcommand_exits_with_usage_code() {
    assert_eq!(bin(&[]).status.code(), Some(2));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_io_error() {
    let o = bin(&["emd", "--a", "/nonexistent/a.pcf", "--b", "/nonexistent/b.pcf"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:io: "), "{}", stderr(&o));
}

#[test]
fn corrupt_pcf_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.pcf"), b"not a cloud").unwrap();
    let o = bin(&["emd", "--a", &p(dir.path(), "a.pcf"), "--b", &p(dir.path(), "a.pcf")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:format: "), "{}", stderr(&o));
}

#[test]
fn emd_of_identical_clouds_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = PointCloud::new((0..30).map(|i| Point3::new(i as f64 * 0.01, 0.0, (i % 7) as f64 * 0.02)).collect()).unwrap();
    write_pcf(&cloud, &dir.path().join("a.pcf")).unwrap();
    let text = ok(&["emd", "--a", &p(dir.path(), "a.pcf"), "--b", &p(dir.path(), "a.pcf")]);
    assert!(text.starts_with("emd 0.0000000000000000e0\n"), "{text}");
    assert!(text.contains("points 30"));

    let o = bin(&["emd", "--a", &p(dir.path(), "a.pcf"), "--b", &p(dir.path(), "a.pcf"), "--eps-final", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn emd_rejects_mismatched_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let a = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0); 3]).unwrap();
    let b = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0); 4]).unwrap();
    write_pcf(&a, &dir.path().join("a.pcf")).unwrap();
    write_pcf(&b, &dir.path().join("b.pcf")).unwrap();
    let o = bin(&["emd", "--a", &p(dir.path(), "a.pcf"), "--b", &p(dir.path(), "b.pcf")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:assignment: "), "{}", stderr(&o));
}

#[test]
fn cluster_rejects_unsupported_grouping() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("l.csv"), "id,gender,race,z0\na,Female,Asian,0.1\n").unwrap();
    let o = bin(&["cluster", "--latents", &p(dir.path(), "l.csv"), "--group-by", "gender", "--out", &p(dir.path(), "c")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:usage: "), "{}", stderr(&o));
}

#[test]
fn replay_of_missing_manifest_fails() {
    let o = bin(&["replay", "/nonexistent/manifest.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:io: "));
}

/// Full chain on a tiny dataset, exercising every subcommand.
#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--count", "24", "--points", "3000", "--seed", "4", "--out", &p(d, "raw")]);
    let raw_meta = std::fs::read_to_string(d.join("raw/scan_00000.json")).unwrap();
    assert!(raw_meta.contains("tragion_left"));
    assert!(d.join("raw/manifest.json").exists());

    ok(&["preprocess", "--in", &p(d, "raw"), "--out", &p(d, "proc"), "--points", "64", "--seed", "4"]);
    let face = read_pcf(&d.join("proc/scan_00000.pcf")).unwrap();
    assert_eq!(face.len(), 64);
    assert!(face.centroid().norm() < 1e-6);
    assert!(!std::fs::read_to_string(d.join("proc/scan_00000.json")).unwrap().contains("tragion_left"));

    ok(&[
        "train", "--data", &p(d, "proc"), "--max-epochs", "2", "--batch", "4", "--lr", "1e-3", "--seed", "4",
        "--out", &p(d, "m/model.vae"),
    ]);
    let log = std::fs::read_to_string(d.join("m/model.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4, "{log}");
    let manifest = RunManifest::read(&d.join("m/model.manifest.json")).unwrap();
    assert_eq!(manifest.command, "train");
    assert_eq!(manifest.seed, Some(4));
    assert_eq!(manifest.argv[0], "train");

    ok(&["encode", "--model", &p(d, "m/model.vae"), "--data", &p(d, "proc"), "--out", &p(d, "latents.csv")]);
    let latents = std::fs::read_to_string(d.join("latents.csv")).unwrap();
    assert_eq!(latents.lines().count(), 25);

    ok(&["explore", "--latents", &p(d, "latents.csv"), "--data", &p(d, "proc"), "--out", &p(d, "ex")]);
    assert_eq!(read_pcf(&d.join("ex/mean_face.pcf")).unwrap().len(), 64);
    assert!(d.join("ex/explore.json").exists());

    let text = ok(&["cluster", "--latents", &p(d, "latents.csv"), "--k", "3", "--seed", "1", "--out", &p(d, "cl")]);
    assert!(text.contains("8 groups, 24 exemplars, 0 skipped"), "{text}");
    assert!(d.join("cl/report.json").exists());
    assert!(std::fs::read_to_string(d.join("cl/scatter_Female_Asian.svg")).unwrap().starts_with("<svg"));

    let size = ok(&[
        "size", "--model", &p(d, "m/model.vae"), "--scan", &p(d, "proc/scan_00000.pcf"), "--report",
        &p(d, "cl/report.json"),
    ]);
    assert!(size.starts_with("group "), "{size}");
    assert!(size.contains("cluster,distance,exemplar_id"));

    let before = std::fs::read(d.join("m/model.vae")).unwrap();
    ok(&["replay", &p(d, "m/model.manifest.json")]);
    assert_eq!(std::fs::read(d.join("m/model.vae")).unwrap(), before);
}
