use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pansharp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pansharp")).args(args).current_dir(dir).output().expect("spawn pansharp")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pansharp(dir, args);
    assert!(out.status.success(), "pansharp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn simulated(size: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--procedural", size, "--alphas", "0.1,0.4,0.25,0.25", "--out", "data"]);
    dir
}

#[test]
fn simulate_without_reference_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pansharp(dir.path(), &["simulate", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_from_its_seed() {
    let a = simulated("32x32x4");
    let b = tempfile::tempdir().unwrap();
    ok(b.path(), &["simulate", "--procedural", "32x32x4", "--alphas", "0.1,0.4,0.25,0.25", "--out", "data"]);
    for name in ["pan.mbf", "lowres.mbf", "truth.mbf"] {
        let x = std::fs::read(a.path().join("data").join(name)).unwrap();
        let y = std::fs::read(b.path().join("data").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["factor"], 4);
    assert_eq!(manifest["reference"]["kind"], "procedural");
}

#[test]
fn different_noise_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        ok(dir.path(), &["simulate", "--procedural", "32x32x3", "--noise", "1", "--seed", seed, "--out", seed]);
    }
    let x = std::fs::read(dir.path().join("1/lowres.mbf")).unwrap();
    let y = std::fs::read(dir.path().join("2/lowres.mbf")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn every_method_writes_a_fused_image_and_run_manifest() {
    let dir = simulated("32x32x4");
    for method in ["nlvd", "nlv", "hpf", "sfim", "lmvm", "lbf", "bicubic"] {
        let out = format!("{method}.mbf");
        ok(
            dir.path(),
            &["fuse", "--method", method, "--pan", "data/pan.mbf", "--lowres", "data/lowres.mbf", "--manifest", "data/manifest.json", "--max-iter", "20", "--out", &out],
        );
        let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{method}.json"))).unwrap()).unwrap();
        assert_eq!(run["settings"]["method"], method);
        assert_eq!(run["inputs"].as_array().unwrap().len(), 2);
        let expected_bands = match method {
            "nlvd" => 4,
            "nlv" => 1,
            _ => 0,
        };
        assert_eq!(run["bands"].as_array().unwrap().len(), expected_bands, "{method}");
    }
}

#[test]
fn nlv_refuses_misregistered_bands() {
    let dir = simulated("32x32x4");
    let out = pansharp(
        dir.path(),
        &["fuse", "--method", "nlv", "--misregistered", "--pan", "data/pan.mbf", "--lowres", "data/lowres.mbf", "--manifest", "data/manifest.json"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("co-registered"));
}

#[test]
fn replay_reproduces_the_output() {
    let dir = simulated("32x32x4");
    ok(
        dir.path(),
        &["fuse", "--method", "nlvd", "--misregistered", "--pan", "data/pan.mbf", "--lowres", "data/lowres.mbf", "--manifest", "data/manifest.json", "--max-iter", "15", "--out", "a.mbf"],
    );
    ok(dir.path(), &["fuse", "--replay", "a.json"]);

    // Tampered inputs are detected.
    let pan = dir.path().join("data/pan.mbf");
    let mut bytes = std::fs::read(&pan).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&pan, bytes).unwrap();
    let out = pansharp(dir.path(), &["fuse", "--replay", "a.json"]);
    assert!(!out.status.success());
}

#[test]
fn eval_of_truth_against_itself_is_perfect() {
    let dir = simulated("32x32x4");
    let csv = ok(dir.path(), &["eval", "--truth", "data/truth.mbf", "--fused", "data/truth.mbf", "--names", "truth"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,rmse,ergas,sam,ssim,q2n"));
    let values: Vec<f64> = lines.next().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(&values[..3], &[0.0, 0.0, 0.0]);
    assert!((values[3] - 1.0).abs() < 1e-12 && (values[4] - 1.0).abs() < 1e-12);
}

#[test]
fn eval_modes_and_outputs() {
    let dir = simulated("32x32x4");
    ok(dir.path(), &["fuse", "--method", "hpf", "--pan", "data/pan.mbf", "--lowres", "data/lowres.mbf", "--out", "hpf.mbf"]);

    let missing = pansharp(dir.path(), &["eval", "--fused", "hpf.mbf"]);
    assert_eq!(missing.status.code(), Some(2));

    let noref = ok(dir.path(), &["eval", "--mode", "no-reference", "--fused", "hpf.mbf", "--pan", "data/pan.mbf", "--lowres", "data/lowres.mbf"]);
    assert!(noref.starts_with("method,d_lambda,d_s,qnr\nhpf,"));

    ok(
        dir.path(),
        &[
            "eval", "--mode", "both", "--format", "json", "--truth", "data/truth.mbf", "--fused", "hpf.mbf", "--pan", "data/pan.mbf",
            "--lowres", "data/lowres.mbf", "--diff-ppm", "diff.ppm", "--out", "scores.json",
        ],
    );
    let scores: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("scores.json")).unwrap()).unwrap();
    let qnr = scores[0]["no_reference"]["qnr"].as_f64().unwrap();
    assert!(qnr > 0.0 && qnr <= 1.0);
    assert!(scores[0]["full"]["rmse"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read(dir.path().join("diff.ppm")).unwrap().starts_with(b"P6"));
}

#[test]
fn weights_dump_rows_sum_to_one() {
    let dir = simulated("32x32x4");
    let csv = ok(dir.path(), &["weights-dump", "--pan", "data/pan.mbf", "--x", "3", "--y", "30"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("offset_x,offset_y,weight"));
    let weights: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(weights.len(), 49);
    assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let outside = pansharp(dir.path(), &["weights-dump", "--pan", "data/pan.mbf", "--x", "32", "--y", "0"]);
    assert!(!outside.status.success());
}

#[test]
fn zero_threads_is_rejected() {
    let dir = simulated("32x32x4");
    let out = pansharp(dir.path(), &["--threads", "0", "fuse", "--method", "bicubic", "--pan", "data/pan.mbf", "--lowres", "data/lowres.mbf"]);
    assert!(!out.status.success());
}
