use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

const TINY: &str = r#"
[corpus]
n_train = 3
n_dev = 1
n_test = 2
frames_per_utterance = 20

[autoencoder]
bottleneck = 16

[autoencoder.train]
max_epochs = 3
batch_size = 8

[estimator]
hidden_width = 32
hidden_layers = 2

[estimator.window]
width = 5

[estimator.train]
max_epochs = 3
learning_rate = 1e-3

[[sweep.points]]
window = 1

[[sweep.points]]
bottleneck = 16
window = 1

[[sweep.points]]
bottleneck = 16
window = 3
"#;

impl Workspace {
    fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("ssi.toml");
        let paths = format!(
            "\n[paths]\ncorpus = {:?}\nwork = {:?}\n",
            root.join("corpus").display().to_string(),
            root.join("work").display().to_string()
        );
        std::fs::write(&config, format!("{TINY}{extra}{paths}")).unwrap();
        Workspace { _dir: dir, root, config }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ssi"))
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs a command that must succeed and returns its JSON summary.
    fn ok(&self, args: &[&str]) -> Value {
        let mut all = args.to_vec();
        all.push("--json");
        let out = self.run(&all);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        serde_json::from_slice(&out.stdout).unwrap()
    }

    fn work(&self) -> PathBuf {
        self.root.join("work")
    }
}

fn error_of(out: &Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    serde_json::from_str(stderr.trim_end()).unwrap()
}

fn files_under(dir: &Path, ext: &str) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
        .count()
}

#[test]
fn full_chain_produces_audio_and_reports() {
    let ws = Workspace::new("");
    let corpus = ws.ok(&["gen-corpus"]);
    assert_eq!(corpus["train"], 3);
    assert_eq!(corpus["test"], 2);

    let ae = ws.ok(&["train-ae"]);
    assert_eq!(ae["bottleneck"], 16);
    let log = std::fs::read_to_string(ws.work().join("autoencoder.model.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["epoch"], 0);
    assert!(first["valid_loss"].as_f64().is_some());

    let enc = ws.ok(&["encode"]);
    assert_eq!(enc["files"], 6);
    assert_eq!(files_under(&ws.work().join("features/dev"), "feat"), 1);

    let est = ws.ok(&["train-est"]);
    assert_eq!(est["feature_dim"], 16);
    assert_eq!(est["window"], 5);
    assert!(ws.work().join("estimator.model.json").exists());

    ws.ok(&["predict"]);
    assert_eq!(files_under(&ws.work().join("predictions/test"), "param"), 2);

    let synth = ws.ok(&["synth"]);
    assert_eq!(synth["files"], 2);
    assert_eq!(files_under(&ws.work().join("wav/test"), "wav"), 2);

    let report = ws.ok(&["eval"]);
    assert_eq!(report["n_frames"], 40);
    let plain = ws.run(&["eval"]);
    assert!(plain.status.success());
    let stdout = String::from_utf8(plain.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("nmse_mean=")));
    let text = std::fs::read_to_string(ws.work().join("report.txt")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("nmse_mean=")));
}

#[test]
fn oracle_predictions_score_zero() {
    let ws = Workspace::new("");
    ws.ok(&["gen-corpus"]);
    let corpus = ws.root.join("corpus");
    let report = ws.ok(&["eval", "--predictions", corpus.to_str().unwrap(), "--split", "dev"]);
    assert_eq!(report["nmse_mean"], 0.0);
    assert!((report["corr_mean"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(ws.work().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["nmse_per_dim"].as_array().unwrap().len(), 25);
}

#[test]
fn pixel_estimator_and_training_normalizer() {
    let ws = Workspace::new("\n[eval]\nnormalizer = \"training\"\n");
    ws.ok(&["gen-corpus"]);
    let est = ws.ok(&["train-est", "--input", "pixels", "--out", ws.root.join("pix.model").to_str().unwrap()]);
    assert_eq!(est["feature_dim"], 8192);
    assert_eq!(est["input"], "pixels");
    ws.ok(&["predict", "--model", ws.root.join("pix.model").to_str().unwrap(), "--split", "dev"]);
    let report = ws.ok(&["eval", "--split", "dev"]);
    assert!(report["nmse_mean"].as_f64().unwrap().is_finite());
}

#[test]
fn sweep_reports_weight_counts() {
    let ws = Workspace::new("");
    let counts = ws.ok(&["sweep", "--count-only"]);
    let rows = counts["rows"].as_array().unwrap();
    assert_eq!(rows[0]["weights"], 8192 * 32 + 32 * 32 + 32 * 25);
    assert_eq!(rows[2]["weights"], 8192 * 16 + 3 * 16 * 32 + 32 * 32 + 32 * 25);
    assert!(rows[0]["scores"].is_null());

    ws.ok(&["gen-corpus"]);
    let table = ws.ok(&["sweep"]);
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let s = &r["scores"];
        assert!(s["dev_nmse"].as_f64().unwrap().is_finite());
        assert!(s["test_corr"].as_f64().unwrap().abs() <= 1.0);
    }
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(ws.work().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(saved["rows"], table["rows"]);
}

#[test]
fn default_sweep_grid_matches_the_published_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ssi"))
        .args(["sweep", "--count-only", "--json", "--out"])
        .arg(dir.path().join("t.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let first = &v["rows"][0];
    assert!(first["point"]["bottleneck"].is_null());
    assert_eq!(first["point"]["window"], 1);
    assert_eq!(first["weights"], 12_608_512);
}

#[test]
fn errors_are_one_json_line_with_distinct_exit_codes() {
    let ws = Workspace::new("");

    let missing = ws.run(&["train-ae"]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(error_of(&missing)["kind"], "missing");

    let out = Command::new(env!("CARGO_BIN_EXE_ssi"))
        .args(["--config", "/nonexistent/ssi.toml", "gen-corpus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["kind"], "missing");

    let bad = Workspace::new("\n[vocoder]\ngamma = -0.4\n");
    let out = bad.run(&["gen-corpus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "config");

    let typo = Workspace::new("\n[synth]\npeak = true\n");
    let out = typo.run(&["gen-corpus"]);
    assert_eq!(error_of(&out)["kind"], "config");

    let out = ws.run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "usage");
}

#[test]
fn divergent_training_aborts() {
    let ws = Workspace::new("");
    let text = std::fs::read_to_string(&ws.config)
        .unwrap()
        .replace("learning_rate = 1e-3", "learning_rate = 1e12\nl2_lambda = 0.0");
    std::fs::write(&ws.config, text).unwrap();
    ws.ok(&["gen-corpus"]);
    let out = ws.run(&["train-est", "--input", "pixels"]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_of(&out)["kind"], "numeric");
}

#[test]
fn seed_flag_changes_the_corpus() {
    let ws = Workspace::new("");
    let a = ws.ok(&["gen-corpus", "--out", ws.root.join("a").to_str().unwrap()]);
    let b = ws.ok(&["gen-corpus", "--seed", "9", "--out", ws.root.join("b").to_str().unwrap()]);
    assert_eq!(b["seed"], 9);
    assert_ne!(a["config_sha256"], b["config_sha256"]);
    let read = |d: &str| std::fs::read(ws.root.join(d).join("train/utt000.ult")).unwrap();
    assert_ne!(read("a"), read("b"));
}
