//! Integration tests for the `osnrsim` binary: subcommand round trips,
//! thread-count independence and the documented exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> PathBuf {
    // target/<profile>/osnrsim next to the test executable
    let mut p = std::env::current_exe().unwrap();
    p.pop();
    if p.ends_with("deps") {
        p.pop();
    }
    p.join("osnrsim")
}

fn write_tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
schema_version = 1

[channel_plan]
count = 3
symbols_per_channel = 4096

[scenario]
min_spans = 1
max_spans = 2

[emulator]
segments = 10
patterns = 2

[route]
restrict_to = ["NDSF", "TWc"]

[nn]
max_epochs = 200
patience = 200
"#,
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).to_string(),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

#[test]
fn generate_train_eval_estimate_report_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let data = dir.path().join("d.jsonl");
    let frames = dir.path().join("frames");

    let (code, stdout, stderr) = run(&[
        "generate",
        "--config",
        cfg,
        "--count",
        "20",
        "--seed",
        "5",
        "--out",
        data.to_str().unwrap(),
        "--frames-dir",
        frames.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "generate failed: {stderr}");
    assert!(stdout.contains("generated 20 records"));
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 20);

    let model = dir.path().join("model.json");
    let (code, stdout, _) = run(&[
        "train",
        "--config",
        cfg,
        "--dataset",
        data.to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("test-set SNR_NL accuracy"));
    assert!(stdout.contains("±"));
    assert!(model.exists());
    assert!(dir.path().join("model.history.csv").exists());
    assert!(dir.path().join("model.split.json").exists());

    let report = dir.path().join("report.csv");
    let svg = dir.path().join("report.svg");
    let (code, stdout, _) = run(&[
        "eval",
        "--config",
        cfg,
        "--dataset",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("OSNR accuracy"));
    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.starts_with("metric,key,value"));
    assert!(report_text.contains("ccdf_osnr,0.00,1"));
    assert!(svg.exists());

    // estimate against the first record's metadata
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&data).unwrap().lines().next().unwrap())
            .unwrap();
    let (code, stdout, _) = run(&[
        "estimate",
        "--config",
        cfg,
        "--frame",
        frames.join("frame_000000.bin").to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--length-km",
        &first["link"]["length_km"].to_string(),
        "--cum-dispersion-ps-nm",
        &first["link"]["cumulative_dispersion_ps_nm"].to_string(),
    ]);
    assert_eq!(code, 0);
    let est: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(est["osnr_db"].is_f64());
    assert!(est["valid"].is_boolean());

    // re-render the CSV report
    let replot = dir.path().join("replot.svg");
    let (code, stdout, _) = run(&[
        "report",
        "--report",
        report.to_str().unwrap(),
        "--svg",
        replot.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("dB over 20 records"));
    assert!(replot.exists());
}

#[test]
fn generate_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let mut digests = Vec::new();
    for threads in ["1", "2", "4"] {
        let out = dir.path().join(format!("d{threads}.jsonl"));
        let (code, _, stderr) = run(&[
            "generate",
            "--config",
            cfg,
            "--threads",
            threads,
            "--count",
            "6",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
        digests.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[1], digests[2]);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    // 1: usage error
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&["generate"]); // missing required args
    assert_eq!(code, 1);
    // 0: help
    let (code, _, _) = run(&["--help"]);
    assert_eq!(code, 0);
    // 2: data error (missing dataset)
    let (code, _, stderr) = run(&[
        "eval",
        "--dataset",
        dir.path().join("missing.jsonl").to_str().unwrap(),
        "--out",
        dir.path().join("r.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");
    // 2: config error (bad schema version)
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "schema_version = 99\n").unwrap();
    let (code, _, _) = run(&[
        "generate",
        "--config",
        bad_cfg.to_str().unwrap(),
        "--count",
        "1",
        "--out",
        dir.path().join("x.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn env_var_overrides_apply_when_flags_absent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_tiny_config(dir.path());
    let out = dir.path().join("env.jsonl");
    let status = Command::new(bin())
        .env("OSNRSIM_CONFIG", &cfg_path)
        .env("OSNRSIM_THREADS", "1")
        .args([
            "generate",
            "--count",
            "2",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    // the tiny config (3 channels) was picked up from the environment
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&out).unwrap().lines().next().unwrap())
            .unwrap();
    let count = first["scenario"]["channel_count"].as_u64().unwrap();
    assert!(count <= 3);
}
