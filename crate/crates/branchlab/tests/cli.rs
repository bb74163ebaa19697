use std::path::{Path, PathBuf};
use std::process::Command;

use branchlab::cli::{run, EXIT_ERROR, EXIT_LIMIT, EXIT_OK, EXIT_USAGE};
use branchlab::config::RunConfig;
use branchlab::io::read_json;
use branchlab_core::SolveReport;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("branchlab").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SUBCOMMANDS: [&str; 6] = ["generate", "solve", "collect", "train", "eval", "features-dump"];

fn help_text() -> String {
    let mut text = cli(&["--help"]).1;
    for sub in SUBCOMMANDS {
        let (code, out, _) = cli(&[sub, "--help"]);
        assert_eq!(code, EXIT_OK);
        text.push_str(&format!("\n==> branchlab {sub} --help\n{out}"));
    }
    text
}

#[test]
fn help_matches_golden_file() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/help.txt");
    let text = help_text();
    if std::env::var_os("BRANCHLAB_BLESS").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(&golden).unwrap());
}

#[test]
fn solve_toy_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let toy = fixture("toy.mps");
    let (code, stdout, _) =
        cli(&["solve", "--instance", toy.to_str().unwrap(), "--policy", "random", "--seed", "0", "--trace", "--out", out]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("status=optimal"));
    let report: SolveReport = read_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(report.value, Some(-1.0));
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count() as u64, report.branchings);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, err) = cli(&["solve", "--instance", "no/such/file.mps", "--out", out]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("no/such/file.mps"));

    assert_eq!(cli(&["solve", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(cli(&["solve"]).0, EXIT_USAGE);
    assert_eq!(cli(&[]).0, EXIT_USAGE);
    assert_eq!(cli(&["collect", "--split", "nope"]).0, EXIT_USAGE);
    assert_eq!(cli(&["--version"]).0, EXIT_OK);

    let knap = fixture("knap.mps");
    let (code, stdout, _) = cli(&["solve", "--instance", knap.to_str().unwrap(), "--policy", "random", "--node-limit", "1", "--out", out]);
    assert_eq!(code, EXIT_LIMIT, "{stdout}");
}

#[test]
fn binary_exit_status_and_output_env() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_branchlab");
    let status = Command::new(bin).arg("--frobnicate").status().unwrap();
    assert_eq!(status.code(), Some(EXIT_USAGE));
    let status = Command::new(bin)
        .args(["solve", "--instance", fixture("toy.mps").to_str().unwrap()])
        .env("BRANCHLAB_OUT", dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    assert!(dir.path().join("solve/report.json").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let out = dir.path().join("run");
    std::fs::write(
        &cfg_path,
        format!(
            r#"{{"command": "solve", "instance": "{}", "seed": 3, "policy": "pscost", "out": "{}"}}"#,
            fixture("toy.mps").display(),
            out.display()
        ),
    )
    .unwrap();
    let (code, stdout, err) = cli(&["--config", cfg_path.to_str().unwrap(), "solve", "--seed", "5"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("pscost"));
    let saved: RunConfig = read_json(&out.join("run_config.json")).unwrap();
    assert_eq!(saved.seed, Some(5));
    assert_eq!(saved.policy.as_deref(), Some("pscost"));

    // the saved config replays the run
    let replay = dir.path().join("replay.json");
    let mut again = saved.clone();
    again.out = Some(dir.path().join("run2"));
    std::fs::write(&replay, serde_json::to_string(&again).unwrap()).unwrap();
    assert_eq!(cli(&["--config", replay.to_str().unwrap(), "solve"]).0, EXIT_OK);
    assert_eq!(
        std::fs::read_to_string(out.join("report.json")).unwrap().replace(char::is_whitespace, "").split("\"wall_time\"").next(),
        std::fs::read_to_string(dir.path().join("run2/report.json"))
            .unwrap()
            .replace(char::is_whitespace, "")
            .split("\"wall_time\"")
            .next()
    );

    std::fs::write(&cfg_path, r#"{"seed": 1, "typo": 2}"#).unwrap();
    let (code, _, err) = cli(&["--config", cfg_path.to_str().unwrap(), "solve"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("typo"));

    std::fs::write(&cfg_path, r#"{"command": "train"}"#).unwrap();
    assert_eq!(cli(&["--config", cfg_path.to_str().unwrap(), "solve"]).0, EXIT_USAGE);
}

#[test]
fn full_pipeline_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let (suite, data) = (p("suite"), p("data"));
    assert_eq!(cli(&["generate", "--count", "2", "--test-count", "1", "--format", "mps", "--out", &suite]).0, EXIT_OK);
    let index = format!("{suite}/suite.json");
    for (split, seeds, ks) in [("train", "0,1", "0,1"), ("valid", "4", "0"), ("test", "0", "0")] {
        let (code, _, err) =
            cli(&["collect", "--suite", &index, "--split", split, "--seeds", seeds, "--ks", ks, "--jobs", "2", "--out", &data]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    let (code, _, err) = cli(&["collect", "--suite", &index, "--split", "test", "--ks", "5", "--out", &data]);
    assert_eq!(code, EXIT_USAGE, "{err}");

    let model = p("model");
    let (code, stdout, err) = cli(&["train", "--data", &data, "--arch", "treegate", "--h", "32", "--d", "2", "--epochs", "2", "--out", &model]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("treegate"));
    for f in ["checkpoint.json", "curves.csv", "candidates_hist.csv", "labels_hist.csv", "summary.json", "run_config.json"] {
        assert!(Path::new(&model).join(f).exists(), "{f}");
    }
    let ckpt = format!("{model}/checkpoint.json");
    let ev = p("eval");
    let models = format!("treegate={ckpt}");
    let (code, stdout, err) = cli(&[
        "eval", "--suite", &index, "--policies", "treegate,random,pscost,expert", "--model", &models, "--seeds", "0-1", "--out", &ev,
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("expert fair (analog)"));
    let ev2 = p("eval2");
    let runs = format!("{ev}/runs.jsonl");
    assert_eq!(cli(&["eval", "--from-runs", &runs, "--out", &ev2]).0, EXIT_OK);
    assert_eq!(std::fs::read(format!("{ev}/report.txt")).unwrap(), std::fs::read(format!("{ev2}/report.txt")).unwrap());
    assert_eq!(std::fs::read(format!("{ev}/report.csv")).unwrap(), std::fs::read(format!("{ev2}/report.csv")).unwrap());

    let dump = p("dump");
    let inst = std::fs::read_dir(&suite)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "mps"))
        .unwrap();
    let (code, _, err) =
        cli(&["features-dump", "--instance", inst.to_str().unwrap(), "--policy", "learned", "--model", &ckpt, "--k", "2", "--out", &dump]);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = std::fs::read_to_string(format!("{dump}/features.jsonl")).unwrap();
    for (i, line) in text.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["tree"].as_array().unwrap().len(), 61);
        let cands = v["candidates"].as_array().unwrap();
        assert!(cands.iter().all(|c| c.as_array().unwrap().len() == 25));
        assert_eq!(cands.len(), v["candidate_ids"].as_array().unwrap().len());
        assert_eq!(v.get("label").is_some(), i >= 2);
    }

    // a checkpoint from another feature layout is refused
    let stale = p("stale.json");
    std::fs::write(&stale, std::fs::read_to_string(&ckpt).unwrap().replace(branchlab_core::FEATURE_VERSION, "old-layout")).unwrap();
    let (code, _, err) =
        cli(&["solve", "--instance", inst.to_str().unwrap(), "--policy", "learned", "--model", &stale, "--out", &p("s")]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("old-layout") && err.contains(branchlab_core::FEATURE_VERSION), "{err}");
}
