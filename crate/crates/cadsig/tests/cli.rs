//! End-to-end checks of the `cadsig` binary: exit codes, reproducibility,
//! run artifacts, and the wiring between subcommands.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cadsig"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("cadsig-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn gen_data(dir: &Path, count: usize, points: usize, seed: u64) {
    let status = bin()
        .args([
            "gen-data",
            "--out",
            dir.to_str().unwrap(),
            "--count",
            &count.to_string(),
            "--points",
            &points.to_string(),
            "--seed",
            &seed.to_string(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn gen_data_is_byte_identical_and_validates_count() {
    let root = tmp("gen-determinism");
    let a = root.join("a");
    let b = root.join("b");
    gen_data(&a, 8, 64, 3);
    gen_data(&b, 8, 64, 3);
    assert_eq!(
        std::fs::read(a.join("manifest.json")).unwrap(),
        std::fs::read(b.join("manifest.json")).unwrap()
    );
    for entry in std::fs::read_dir(a.join("samples")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.join("samples").join(&name)).unwrap(),
            std::fs::read(b.join("samples").join(&name)).unwrap(),
            "{name:?} differs between identical runs"
        );
    }

    let status = bin()
        .args([
            "gen-data",
            "--out",
            root.join("zero").to_str().unwrap(),
            "--count",
            "0",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "count 0 is a validation error");
}

#[test]
fn train_writes_artifacts_and_resume_guards_config() {
    let root = tmp("train");
    let data = root.join("data");
    gen_data(&data, 6, 64, 5);
    let run = root.join("run");
    let status = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--model-preset",
            "tiny",
            "--out",
            run.to_str().unwrap(),
            "--epochs",
            "2",
            "--batch-size",
            "4",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(run.join("checkpoints/latest.ckpt").exists());
    assert!(run.join("run_manifest.json").exists());

    // Every log line parses as JSON with the expected fields.
    let log = std::fs::read_to_string(run.join("logs/train.jsonl")).unwrap();
    let mut steps = Vec::new();
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["loss"].is_number() && v["lr"].is_number() && v["accuracy"].is_number());
        steps.push(v["step"].as_u64().unwrap());
    }
    assert!(!steps.is_empty());
    let first_run_final = *steps.last().unwrap();

    // Resume continues the step counter monotonically.
    let status = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--model-preset",
            "tiny",
            "--out",
            run.to_str().unwrap(),
            "--epochs",
            "3",
            "--batch-size",
            "4",
            "--resume",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let log = std::fs::read_to_string(run.join("logs/train.jsonl")).unwrap();
    let resumed_first: u64 = log
        .lines()
        .next()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["step"]
                .as_u64()
                .unwrap()
        })
        .unwrap();
    assert_eq!(resumed_first, first_run_final + 1);

    // Mismatched preset hash refuses to resume.
    let status = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--model-preset",
            "desk",
            "--out",
            run.to_str().unwrap(),
            "--epochs",
            "4",
            "--resume",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn infer_greedy_matches_hybrid_one_and_writes_outputs() {
    let root = tmp("infer");
    let data = root.join("data");
    gen_data(&data, 6, 64, 9);
    let run = root.join("run");
    let status = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--model-preset",
            "tiny",
            "--out",
            run.to_str().unwrap(),
            "--epochs",
            "2",
            "--batch-size",
            "4",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let cloud = data.join("samples/s00000.cloud.ply");
    let ckpt = run.join("checkpoints/latest.ckpt");
    let mut outputs = Vec::new();
    for (k, name) in [("1", "k1"), ("3", "k3")] {
        let out = root.join(name);
        let status = bin()
            .args([
                "infer",
                "--ckpt",
                ckpt.to_str().unwrap(),
                "--cloud",
                cloud.to_str().unwrap(),
                "--hybrid-k",
                k,
                "--out",
                out.to_str().unwrap(),
                "--eval-points",
                "128",
                "--seed",
                "4",
            ])
            .status()
            .unwrap();
        assert!(status.success());
        let result: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap())
                .unwrap();
        assert!(result["candidates"].as_array().unwrap().len() <= k.parse().unwrap());
        outputs.push(out);
    }
    // Rank-1 candidate of hybrid(3) equals the pure greedy decode.
    let c0_k1 = std::fs::read(outputs[0].join("candidates/cand_0.program.json")).unwrap();
    let c0_k3 = std::fs::read(outputs[1].join("candidates/cand_0.program.json")).unwrap();
    assert_eq!(c0_k1, c0_k3);

    // Unreadable cloud is an IO error.
    let status = bin()
        .args([
            "infer",
            "--ckpt",
            ckpt.to_str().unwrap(),
            "--cloud",
            root.join("missing.ply").to_str().unwrap(),
            "--out",
            root.join("x").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn eval_scores_perfect_predictions_and_names_missing_ids() {
    let root = tmp("eval");
    let data = root.join("data");
    gen_data(&data, 5, 64, 11);
    let preds = root.join("preds");
    std::fs::create_dir_all(&preds).unwrap();
    for entry in std::fs::read_dir(data.join("samples")).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        if name.ends_with(".program.json") {
            std::fs::copy(entry.path(), preds.join(&name)).unwrap();
        }
    }
    let report_path = root.join("report.json");
    let output = bin()
        .args([
            "eval",
            "--pred-dir",
            preds.to_str().unwrap(),
            "--gt-dir",
            data.to_str().unwrap(),
            "--out",
            report_path.to_str().unwrap(),
            "--eval-points",
            "256",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["ir_percent"], 0.0);
    assert_eq!(report["median_cd"], 0.0);
    assert_eq!(report["curves"]["line"]["f1"], 1.0);
    assert_eq!(report["extrusion"]["f1"], 1.0);

    std::fs::remove_file(preds.join("s00002.program.json")).unwrap();
    let output = bin()
        .args([
            "eval",
            "--pred-dir",
            preds.to_str().unwrap(),
            "--gt-dir",
            data.to_str().unwrap(),
            "--out",
            report_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("s00002"),
        "missing id must be named: {stderr}"
    );
}

#[test]
fn interactive_autocomplete_quits_and_saves_partial() {
    let root = tmp("interactive");
    let data = root.join("data");
    gen_data(&data, 6, 64, 13);
    let run = root.join("run");
    let status = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--model-preset",
            "tiny",
            "--out",
            run.to_str().unwrap(),
            "--epochs",
            "1",
            "--batch-size",
            "4",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let out = root.join("session");
    let mut child = bin()
        .args([
            "autocomplete",
            "--ckpt",
            run.join("checkpoints/latest.ckpt").to_str().unwrap(),
            "--cloud",
            data.join("samples/s00000.cloud.ply").to_str().unwrap(),
            "--interactive",
            "--out",
            out.to_str().unwrap(),
            "--k",
            "2",
            "--eval-points",
            "64",
        ])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.as_mut().unwrap().write_all(b"q\n").unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    assert!(out.join("session.tokens").exists());
    assert!(out.join("session.program.json").exists());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("step 1:"), "{stdout}");
}
