use std::fs;
use std::process::Command;

fn stackfuzz(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stackfuzz")).args(args).output().unwrap();
    (
        out.status.success(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn fuzz_writes_a_campaign_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let (ok, stdout, stderr) = stackfuzz(&[
        "fuzz",
        "--benchmark",
        "builtin:cxxfilt_toy",
        "--metric",
        "staczzer",
        "--predictor",
        "oracle",
        "--rng-seed",
        "5",
        "--max-input-len",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("target hit after"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rng_seed"], 5);
    assert_eq!(report["target_hit"], true);
    let crash = fs::read_to_string(out.join("crash-000.hex")).unwrap();
    assert!(hex::decode(crash.trim()).is_ok());
    assert!(out.join("timing.json").exists());
}

#[test]
fn predict_with_mock_stack() {
    let (ok, stdout, _) = stackfuzz(&[
        "predict",
        "--benchmark",
        "builtin:cxxfilt_toy",
        "--predictor",
        "mock",
        "--mock-stack",
        "cxxfilt.c:11,cxxfilt.c:26,cxxfilt.c:35",
    ]);
    assert!(ok);
    assert_eq!(stdout, "cxxfilt.c:11\ncxxfilt.c:26\ncxxfilt.c:35\n");
}

#[test]
fn bad_arguments_fail() {
    assert!(!stackfuzz(&["fuzz", "--benchmark", "builtin:cxxfilt_toy", "--metric", "fastest"]).0);
    assert!(!stackfuzz(&["fuzz", "--benchmark", "builtin:nope"]).0);
    let (ok, _, stderr) = stackfuzz(&["predict", "--benchmark", "builtin:cxxfilt_toy", "--predictor", "llm"]);
    assert!(!ok);
    assert!(stderr.contains("endpoint_url"), "{stderr}");
}

#[test]
fn bench_synth_run_compare() {
    let dir = tempfile::tempdir().unwrap();
    let suite_dir = dir.path().join("suite");
    let results = dir.path().join("results");
    let (ok, _, stderr) = stackfuzz(&["bench", "synth", "--out", suite_dir.to_str().unwrap(), "--count", "2"]);
    assert!(ok, "{stderr}");
    let (ok, stdout, stderr) = stackfuzz(&[
        "bench",
        "run",
        "--suite",
        suite_dir.join("suite.toml").to_str().unwrap(),
        "--reps",
        "2",
        "--budget",
        "3000",
        "--parallelism",
        "1",
        "--out",
        results.to_str().unwrap(),
    ]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("win/loss/tie"), "{stdout}");
    for f in ["results.json", "table.txt", "table.csv"] {
        assert!(results.join(f).exists(), "{f}");
    }
    assert!(results.join("campaigns/synth01/afl/rep-001/report.json").exists());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(results.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["format_version"], 1);
    assert_eq!(json["runs"].as_array().unwrap().len(), 8);

    let (ok, stdout, _) = stackfuzz(&[
        "bench",
        "compare",
        "--results",
        results.to_str().unwrap(),
        "--baseline",
        "afl",
        "--subject",
        "staczzer:oracle",
    ]);
    assert!(ok);
    assert!(stdout.starts_with("benchmark,baseline_mtte,subject_mtte,ratio,verdict\nsynth00,"), "{stdout}");
    let missing = ["bench", "compare", "--results", results.to_str().unwrap(), "--baseline", "dafl", "--subject", "afl"];
    assert!(!stackfuzz(&missing).0);
}
