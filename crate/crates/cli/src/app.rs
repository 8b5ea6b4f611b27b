//! Argument parsing, dispatch and output formatting for the binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;
use ssi_core::synthcorpus::Split;

use crate::commands::{self, InputKind, Summary};
use crate::config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "ssi", version, about = "Ultrasound tongue video to speech parameters and audio")]
pub struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for corpus generation, training and synthesis noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Primary output of the command (file or directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the summary as one JSON object and write JSON reports.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: ssi_core::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic corpus.
    GenCorpus,
    /// Train the autoencoder on the training frames.
    TrainAe,
    /// Write bottleneck features for corpus splits.
    Encode {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "train,dev,test", value_parser = parse_split)]
        split: Vec<Split>,
    },
    /// Train the parameter estimator.
    TrainEst {
        #[arg(long, value_enum, default_value_t = InputKind::Features)]
        input: InputKind,
        /// Directory of encoded features.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Write predicted parameter files for a split.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
    },
    /// Render parameter files to WAV.
    Synth {
        /// Directory of parameter files.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Directory of F0 files; the corpus by default.
        #[arg(long)]
        f0: Option<PathBuf>,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
    },
    /// Score predicted parameter files against the corpus targets.
    Eval {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
    },
    /// Train and score every configured (bottleneck, window) point.
    Sweep {
        /// Report weight counts without training.
        #[arg(long)]
        count_only: bool,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<Summary> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    cfg.validate()?;
    let out = cli.out;
    match cli.command {
        Command::GenCorpus => commands::gen_corpus(&cfg, out),
        Command::TrainAe => commands::train_ae(&cfg, out),
        Command::Encode { model, split } => commands::encode(&cfg, model, &split, out),
        Command::TrainEst { input, features } => commands::train_est(&cfg, input, features, out),
        Command::Predict { model, features, split } => commands::predict_split(&cfg, model, features, split, out),
        Command::Synth { params, f0, split } => commands::synth(&cfg, params, f0, split, out),
        Command::Eval { predictions, split } => commands::eval(&cfg, predictions, split, cli.json, out),
        Command::Sweep { count_only } => commands::sweep(&cfg, count_only, cli.json, out),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `key=value` lines; arrays of objects become one line per element.
pub fn render_text(summary: &Summary) -> String {
    let mut out = String::new();
    for (k, v) in summary {
        match v {
            Value::Array(items) => {
                for item in items {
                    let line = match item {
                        Value::Object(fields) => flatten(fields).join(" "),
                        other => scalar(other),
                    };
                    out += &format!("{k}: {line}\n");
                }
            }
            other => out += &format!("{k}={}\n", scalar(other)),
        }
    }
    out
}

fn flatten(fields: &serde_json::Map<String, Value>) -> Vec<String> {
    fields
        .iter()
        .flat_map(|(k, v)| match v {
            Value::Object(inner) => flatten(inner),
            Value::Null => vec![format!("{k}=-")],
            other => vec![format!("{k}={}", scalar(other))],
        })
        .collect()
}

/// Error category used in the one-line error report.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    use ssi_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => "config",
                E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "missing",
                E::Metadata { .. } => "missing",
                E::Io { .. } => "io",
                E::NonFiniteLoss { .. } | E::Unstable(_) | E::ZeroVariance { .. } => "numeric",
                E::Clipping { .. } => "clipping",
                _ => "data",
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return if e.kind() == std::io::ErrorKind::NotFound { "missing" } else { "io" };
        }
    }
    "internal"
}

pub fn exit_code(kind: &str) -> i32 {
    match kind {
        "usage" | "config" => 2,
        "missing" | "io" => 3,
        "data" => 4,
        "numeric" => 5,
        "clipping" => 6,
        _ => 1,
    }
}

/// Single-line JSON error report.
pub fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "status": "error", "kind": kind, "message": message }).to_string()
}
