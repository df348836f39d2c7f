//! End-to-end tests of the `alphaforge` binary: exit-code discipline,
//! stdout/stderr separation, determinism, and input immutability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use alphaforge::data::generate_synthetic;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alphaforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a deterministic panel CSV and returns its path.
fn panel_csv(dir: &Path) -> PathBuf {
    let (panel, _) = generate_synthetic(120, 20, 4, None, 0.0, 7).unwrap();
    let path = dir.join("panel.csv");
    panel.write_csv(&path).unwrap();
    path
}

#[test]
fn validate_exit_codes() {
    let ok = run(&["validate", "cs_rank(ts_delta(close, 5))"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("valid"));

    // Unit violation: price + volume mixes incompatible units.
    let unit = run(&["validate", "add(volume, close)"]);
    assert_eq!(unit.status.code(), Some(2));

    // Grammar violation.
    let syntax = run(&["validate", "ts_mean(close 5)"]);
    assert_eq!(syntax.status.code(), Some(2));

    // Semantic violation: log of an always-nonpositive argument.
    let semantic = run(&["validate", "log(sub(close, close))"]);
    assert_eq!(semantic.status.code(), Some(2));
}

#[test]
fn eval_streaming_matches_batch_and_preserves_input() {
    let tmp = TempDir::new().unwrap();
    let data = panel_csv(tmp.path());
    let before = std::fs::read(&data).unwrap();

    let batch_out = tmp.path().join("batch.csv");
    let stream_out = tmp.path().join("stream.csv");
    let expr = "sub(ts_mean(close, 5), ts_mean(close, 20))";

    let b = run(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--expr",
        expr,
        "--out",
        batch_out.to_str().unwrap(),
    ]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));

    let s = run(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--expr",
        expr,
        "--out",
        stream_out.to_str().unwrap(),
        "--streaming",
    ]);
    assert_eq!(s.status.code(), Some(0), "{}", stderr(&s));

    let batch_csv = std::fs::read(&batch_out).unwrap();
    let stream_csv = std::fs::read(&stream_out).unwrap();
    assert_eq!(batch_csv, stream_csv, "streaming output differs from batch");
    assert_eq!(std::fs::read(&data).unwrap(), before, "input panel was mutated");
}

#[test]
fn eval_rejects_invalid_expression_without_writing() {
    let tmp = TempDir::new().unwrap();
    let data = panel_csv(tmp.path());
    let out = tmp.path().join("never.csv");
    let r = run(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--expr",
        "add(volume, close)",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists(), "rejected eval must not write output");
}

#[test]
fn missing_data_file_is_operational_error() {
    let r = run(&[
        "eval",
        "--data",
        "/nonexistent/panel.csv",
        "--expr",
        "ts_mean(close, 5)",
        "--out",
        "/tmp/never.csv",
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("error"));
}

#[test]
fn backtest_reports_to_stdout() {
    let tmp = TempDir::new().unwrap();
    let data = panel_csv(tmp.path());
    let report = tmp.path().join("report.json");
    let r = run(&[
        "backtest",
        "--data",
        data.to_str().unwrap(),
        "--expr",
        "cs_rank(ts_delta(close, 5))",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let text = stdout(&r);
    assert!(text.contains("sharpe"), "summary on stdout: {text}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(doc.get("sharpe").is_some());
    assert!(doc.get("net_annual_return").is_some() || doc.get("annual_return").is_some());
}

#[test]
fn search_is_deterministic_for_fixed_config() {
    let tmp = TempDir::new().unwrap();
    let data = panel_csv(tmp.path());
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            r#"data = "{}"

[gp]
population_size = 30
generations = 4
seed = 11
"#,
            data.display()
        ),
    )
    .unwrap();

    let out1 = tmp.path().join("r1.json");
    let out2 = tmp.path().join("r2.json");
    let hof = tmp.path().join("hof.jsonl");
    for out in [&out1, &out2] {
        let r = run(&[
            "search",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--hof",
            hof.to_str().unwrap(),
        ]);
        assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    }
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out2).unwrap(),
        "same config and seed must reproduce the result byte for byte"
    );

    // The hall-of-fame JSONL must be accepted back as the next run's seeds.
    let seeded = run(&[
        "search",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        hof.to_str().unwrap(),
        "--out",
        tmp.path().join("r3.json").to_str().unwrap(),
    ]);
    assert_eq!(seeded.status.code(), Some(0), "{}", stderr(&seeded));
}

#[test]
fn pool_add_then_reject_scaled_duplicate() {
    let tmp = TempDir::new().unwrap();
    let data = panel_csv(tmp.path());
    let pool = tmp.path().join("pool");
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        format!("data = \"{}\"\npool = \"{}\"\n", data.display(), pool.display()),
    )
    .unwrap();
    let cfg = config.to_str().unwrap();

    let add = run(&[
        "pool", "add", "--config", cfg, "--expr", "cs_rank(ts_delta(close, 5))", "--name",
        "momo5",
    ]);
    assert_eq!(add.status.code(), Some(0), "{}", stderr(&add));
    assert!(stdout(&add).contains("accepted"));

    // A scaled copy is perfectly correlated and must be rejected with exit 2.
    let dup = run(&[
        "pool",
        "add",
        "--config",
        cfg,
        "--expr",
        "mul(2, cs_rank(ts_delta(close, 5)))",
        "--name",
        "momo5x2",
    ]);
    assert_eq!(dup.status.code(), Some(2));
    assert!(stderr(&dup).contains("rejected"));

    let check = run(&["pool", "check", "--config", cfg, "--expr", "cs_rank(ts_delta(close, 5))"]);
    assert_eq!(check.status.code(), Some(0), "{}", stderr(&check));
    assert!(stdout(&check).starts_with("max_correlation="));
}

#[test]
fn mine_replays_shipped_transcript() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let transcript = root.join("assets/transcripts/mining_demo.json");
    let knowledge = root.join("assets/knowledge.jsonl");
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        format!("[llm]\nknowledge = \"{}\"\n", knowledge.display()),
    )
    .unwrap();

    let r = run(&[
        "mine",
        "--config",
        config.to_str().unwrap(),
        "--idea",
        "short-term price momentum with volume confirmation",
        "--transcript",
        transcript.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let text = stdout(&r);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 5, "expected mined expressions on stdout: {lines:?}");
    assert!(stderr(&r).contains("rounds_run=2"));
}

#[test]
fn synth_writes_panel_and_metadata() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("panel.csv");
    let r = run(&["synth", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert!(out.exists());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("panel.meta.json")).unwrap())
            .unwrap();
    assert!(meta.get("fingerprint").is_some());
    assert_eq!(meta.get("seed").and_then(|v| v.as_u64()), Some(0));
}
