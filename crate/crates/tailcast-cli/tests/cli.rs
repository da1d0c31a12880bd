//! End-to-end tests that drive the compiled binary the way a user would.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailcast"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn exit_code(dir: &Path, args: &[&str]) -> i32 {
    run_in(dir, args).status.code().expect("exit code")
}

const CONFIG: &str = r#"
data = "panel.csv"
out_dir = "out"
seed = 11

[folds]
k = 2

[forest]
n_trees = 25

[strategy]
top_n = 2

[strategy.grid]
rally_entry = [0.74, 0.80]
rally_exit = [0.90]
crash_exit = [0.60]
crash_caution = [0.40]
base = [1.0]
max_leverage = [1.5]
min_hold = [8]
bounce = [1.0]

[universes]
tiny = ["SPY", "QQQ", "IWM", "XLF", "XLE", "XLK", "GLD", "TLT"]
"#;

#[test]
fn full_pipeline_and_artifacts() {
    let dir = tempfile::TempDir::new().unwrap();
    fs::write(dir.path().join("tailcast.toml"), CONFIG).unwrap();

    let synth = ok(dir.path(), &["synth", "--days", "1400", "--seed", "11"]);
    assert!(synth.contains("panel.csv"), "synth output: {synth}");
    assert!(dir.path().join("panel.csv").exists());

    let features = ok(dir.path(), &["features", "--jobs", "1"]);
    assert!(features.contains("combined"), "features output: {features}");
    let features_csv = dir.path().join("out").join("features.csv");
    let first = fs::read(&features_csv).unwrap();

    // A rerun with an unchanged config must be byte-identical.
    ok(dir.path(), &["features"]);
    assert_eq!(first, fs::read(&features_csv).unwrap(), "features rerun differs");

    let evaluate = ok(dir.path(), &["evaluate"]);
    assert!(evaluate.contains("traditional"), "evaluate output: {evaluate}");
    assert!(evaluate.contains("spectral"));
    assert!(evaluate.contains("combined"));

    let backtest = ok(dir.path(), &["backtest"]);
    assert!(backtest.contains("strategy"), "backtest output: {backtest}");
    assert!(backtest.contains("benchmark"));

    let report = ok(dir.path(), &["report"]);
    assert!(report.contains("run_report.json"), "report output: {report}");
    assert!(report.contains("divergence"), "report output: {report}");

    for name in [
        "features.csv",
        "features_manifest.json",
        "metrics.json",
        "predictions.csv",
        "strategy_ledger.csv",
        "benchmark_ledger.csv",
        "strategy_report.json",
        "run_report.json",
    ] {
        assert!(dir.path().join("out").join(name).exists(), "missing artifact {name}");
    }

    // Every artifact embeds the config hash and seed.
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/metrics.json")).unwrap())
            .unwrap();
    let hash = metrics["meta"]["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 16);
    assert_eq!(metrics["meta"]["seed"].as_u64(), Some(11));
    let header = fs::read_to_string(&features_csv).unwrap();
    let header = header.lines().next().unwrap().to_string();
    assert!(header.contains(hash), "features header lacks config hash: {header}");

    // A seed override changes the config hash, so downstream steps must
    // refuse artifacts produced under the old seed until reran upstream.
    let stale = run_in(dir.path(), &["evaluate", "--seed", "12"]);
    assert_eq!(stale.status.code(), Some(3));
    assert!(
        String::from_utf8_lossy(&stale.stderr).contains("rerun the upstream step"),
        "stale-artifact error should say how to recover"
    );
    ok(dir.path(), &["features", "--seed", "12"]);
    let evaluate2 = ok(dir.path(), &["evaluate", "--seed", "12"]);
    assert!(evaluate2.contains("combined"));
    let metrics2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics2["meta"]["seed"].as_u64(), Some(12));
    assert_ne!(metrics2["meta"]["config_hash"].as_str().unwrap(), hash);
}

#[test]
fn subset_flag_restricts_columns() {
    let dir = tempfile::TempDir::new().unwrap();
    fs::write(dir.path().join("tailcast.toml"), CONFIG).unwrap();
    ok(dir.path(), &["synth", "--days", "900", "--seed", "5"]);

    // Layout: meta line, families line, then the column header.
    let column_names = |dir: &Path| -> Vec<String> {
        fs::read_to_string(dir.join("out/features.csv"))
            .unwrap()
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .skip(2)
            .map(str::to_string)
            .collect()
    };

    ok(dir.path(), &["features", "--subset", "spectral"]);
    let names = column_names(dir.path());
    assert_eq!(names.len(), 217, "spectral subset column count");
    assert!(names.iter().all(|n| !n.starts_with("trad_")), "traditional column leaked");

    ok(dir.path(), &["features", "--subset", "traditional"]);
    let names = column_names(dir.path());
    assert_eq!(names.len(), 27, "traditional subset column count");
    assert!(names.iter().all(|n| n.starts_with("trad_")));
}

#[test]
fn universe_flag_selects_named_list() {
    let dir = tempfile::TempDir::new().unwrap();
    fs::write(dir.path().join("tailcast.toml"), CONFIG).unwrap();
    ok(dir.path(), &["synth", "--days", "900", "--seed", "5"]);

    let out = ok(dir.path(), &["features", "--universe", "tiny"]);
    assert!(out.contains("features:"), "features output: {out}");

    let missing = run_in(dir.path(), &["features", "--universe", "nope"]);
    assert_eq!(missing.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert!(stderr.contains("nope"), "stderr: {stderr}");
    assert!(stderr.contains("tiny"), "stderr should list available universes: {stderr}");
}

#[test]
fn exit_codes_follow_failure_class() {
    let dir = tempfile::TempDir::new().unwrap();

    // No config file at all.
    assert_eq!(exit_code(dir.path(), &["features"]), 2);

    // Malformed config.
    fs::write(dir.path().join("tailcast.toml"), "data = [1, 2]\n").unwrap();
    assert_eq!(exit_code(dir.path(), &["features"]), 2);

    // Valid config pointing at a missing panel.
    fs::write(dir.path().join("tailcast.toml"), CONFIG).unwrap();
    assert_eq!(exit_code(dir.path(), &["features"]), 3);

    // Evaluate before features exists.
    ok(dir.path(), &["synth", "--days", "900", "--seed", "5"]);
    assert_eq!(exit_code(dir.path(), &["evaluate"]), 3);

    // Zero workers is a config error.
    assert_eq!(exit_code(dir.path(), &["features", "--jobs", "0"]), 2);

    // 900 days load and featurize fine but leave no room for a full
    // training window, so fold planning rejects the run.
    ok(dir.path(), &["features"]);
    assert_eq!(exit_code(dir.path(), &["evaluate"]), 3);
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::TempDir::new().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for flag in ["--config", "--seed", "--jobs", "--universe"] {
        assert!(help.contains(flag), "top-level help lacks {flag}");
    }
    for sub in ["features", "evaluate", "backtest", "report", "run", "synth"] {
        assert!(help.contains(sub), "top-level help lacks {sub}");
    }
    let features_help = ok(dir.path(), &["features", "--help"]);
    assert!(features_help.contains("--subset"));
    let synth_help = ok(dir.path(), &["synth", "--help"]);
    assert!(synth_help.contains("--days"));
    assert!(synth_help.contains("--out"));
}
