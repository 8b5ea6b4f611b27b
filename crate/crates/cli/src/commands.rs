//! One function per subcommand. Each returns a flat summary that the binary
//! prints either as `key=value` lines or as one JSON object.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Map, Value};
use ssi_core::autoenc::{bottleneck_of, AutoencoderConfig, encode_all, read_features, write_features};
use ssi_core::estimator::{predict, train_estimator, Estimator, FeatureKind, ParallelUtterance, WindowSpec};
use ssi_core::evalmetrics::{evaluate, evaluate_split, Normalizer};
use ssi_core::mgclsp::{read_f0, read_params, write_params, LSP_ORDER};
use ssi_core::nncore::{load_model, save_model, EpochRecord};
use ssi_core::synthcorpus::{generate_corpus, load_split, CorpusUtterance, Manifest, Split};
use ssi_core::vocoder::{mglsa_synthesize, write_wav};

use crate::config::{split_file, NormalizerSource, PipelineConfig};
use crate::experiment::{fit_autoencoder, fit_and_score, pooled_frames, target_variances, CorpusData, FeatureSets};
use crate::sweep::{SweepRow, SweepTable};

pub type Summary = Map<String, Value>;

/// Source of estimator inputs for `train-est`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputKind {
    /// Encoded features written by `encode`.
    Features,
    /// Preprocessed frames straight from the corpus.
    Pixels,
}

/// Appends one JSON object per epoch to a log file.
struct EpochLog {
    path: PathBuf,
    out: BufWriter<File>,
    failed: Option<std::io::Error>,
}

impl EpochLog {
    fn create(path: PathBuf) -> anyhow::Result<Self> {
        let file = File::create(&path).with_context(|| format!("creating log {}", path.display()))?;
        Ok(EpochLog {
            path,
            out: BufWriter::new(file),
            failed: None,
        })
    }

    fn record(&mut self, stage: &str, r: &EpochRecord) {
        if self.failed.is_some() {
            return;
        }
        let line = json!({
            "stage": stage,
            "epoch": r.epoch,
            "train_loss": r.train_loss,
            "valid_loss": r.valid_loss,
            "improved": r.improved,
        });
        if let Err(e) = writeln!(self.out, "{line}") {
            self.failed = Some(e);
        }
    }

    fn finish(mut self) -> anyhow::Result<PathBuf> {
        if let Some(e) = self.failed.take() {
            return Err(e).with_context(|| format!("writing log {}", self.path.display()));
        }
        self.out.flush().with_context(|| format!("writing log {}", self.path.display()))?;
        Ok(self.path)
    }
}

/// `<model>.log.jsonl`.
pub fn log_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".log.jsonl");
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

pub fn gen_corpus(cfg: &PipelineConfig, out: Option<PathBuf>) -> anyhow::Result<Summary> {
    let dir = out.unwrap_or_else(|| cfg.paths.corpus.clone());
    ensure_dir(&dir)?;
    let manifest = generate_corpus(&cfg.corpus, &dir)?;
    let mut s = Summary::new();
    s.insert("corpus".into(), path_value(&dir));
    s.insert("seed".into(), manifest.seed.into());
    s.insert("config_sha256".into(), manifest.config_hash.clone().into());
    for split in Split::ALL {
        s.insert(split.name().into(), manifest.names(split).len().into());
    }
    Ok(s)
}

pub fn train_ae(cfg: &PipelineConfig, out: Option<PathBuf>) -> anyhow::Result<Summary> {
    let model_path = out.unwrap_or_else(|| cfg.paths.autoencoder());
    ensure_parent(&model_path)?;
    let data = CorpusData {
        train: load_split(&cfg.paths.corpus, Split::Train)?,
        dev: load_split(&cfg.paths.corpus, Split::Dev)?,
        test: Vec::new(),
    };
    let mut log = EpochLog::create(log_path(&model_path))?;
    let outcome = fit_autoencoder(&data, &cfg.autoencoder, &mut |r| log.record("autoencoder", r))?;
    let log = log.finish()?;
    save_model(&outcome.model, &model_path)?;
    let mut s = Summary::new();
    s.insert("model".into(), path_value(&model_path));
    s.insert("bottleneck".into(), cfg.autoencoder.bottleneck.into());
    s.insert("train_frames".into(), pooled_frames(&data.train).len().into());
    s.insert("epochs".into(), (outcome.history.len() - 1).into());
    s.insert("best_epoch".into(), outcome.best_epoch.into());
    s.insert("best_dev_mse".into(), outcome.best_loss().into());
    s.insert("log".into(), path_value(&log));
    Ok(s)
}

pub fn encode(cfg: &PipelineConfig, model: Option<PathBuf>, splits: &[Split], out: Option<PathBuf>) -> anyhow::Result<Summary> {
    let model_path = model.unwrap_or_else(|| cfg.paths.autoencoder());
    let encoder = load_model(&model_path)?;
    let bottleneck = bottleneck_of(&encoder)?;
    let dir = out.unwrap_or_else(|| cfg.paths.features());
    let mut files = 0usize;
    let mut frames = 0usize;
    for &split in splits {
        ensure_dir(&dir.join(split.name()))?;
        for utt in load_split(&cfg.paths.corpus, split)? {
            let features = encode_all(&encoder, &utt.pixels)?;
            write_features(&split_file(&dir, split, &utt.name, "feat"), &features)?;
            files += 1;
            frames += features.len();
        }
    }
    let mut s = Summary::new();
    s.insert("features".into(), path_value(&dir));
    s.insert("bottleneck".into(), bottleneck.into());
    s.insert("files".into(), files.into());
    s.insert("frames".into(), frames.into());
    Ok(s)
}

/// Estimator inputs for `utterances`: encoded features read from
/// `features_dir`, or the frames themselves.
fn parallel_split(
    utterances: Vec<CorpusUtterance>,
    split: Split,
    input: InputKind,
    features_dir: &Path,
) -> anyhow::Result<Vec<ParallelUtterance>> {
    utterances
        .into_iter()
        .map(|u| {
            let features = match input {
                InputKind::Pixels => u.pixels,
                InputKind::Features => read_features(&split_file(features_dir, split, &u.name, "feat"))?,
            };
            Ok(ParallelUtterance::new(features, u.targets)?)
        })
        .collect()
}

fn normalizer(cfg: &PipelineConfig) -> anyhow::Result<Normalizer> {
    Ok(match cfg.eval.normalizer {
        NormalizerSource::Evaluation => Normalizer::Evaluation,
        NormalizerSource::Training => Normalizer::Fixed(target_variances(&load_split(&cfg.paths.corpus, Split::Train)?)),
    })
}

pub fn train_est(
    cfg: &PipelineConfig,
    input: InputKind,
    features: Option<PathBuf>,
    out: Option<PathBuf>,
) -> anyhow::Result<Summary> {
    let model_path = out.unwrap_or_else(|| cfg.paths.estimator());
    ensure_parent(&model_path)?;
    let features_dir = features.unwrap_or_else(|| cfg.paths.features());
    let load = |split| -> anyhow::Result<Vec<ParallelUtterance>> {
        parallel_split(load_split(&cfg.paths.corpus, split)?, split, input, &features_dir)
    };
    let train = load(Split::Train)?;
    let dev = load(Split::Dev)?;
    let kind = match input {
        InputKind::Pixels => FeatureKind::Pixels,
        InputKind::Features => FeatureKind::Encoded {
            bottleneck: train[0].feature_dim(),
        },
    };
    let mut log = EpochLog::create(log_path(&model_path))?;
    let outcome = train_estimator(&train, &dev, kind, &cfg.estimator, &mut |r| log.record("estimator", r))?;
    let log = log.finish()?;
    outcome.estimator.save(&model_path)?;
    let report = evaluate_split(&outcome.estimator, &dev, &normalizer(cfg)?)?;

    let mut s = Summary::new();
    s.insert("model".into(), path_value(&model_path));
    s.insert("input".into(), format!("{input:?}").to_lowercase().into());
    s.insert("feature_dim".into(), kind.dim().into());
    s.insert("window".into(), cfg.estimator.window.width.into());
    s.insert("weights".into(), outcome.estimator.model.weight_count().into());
    s.insert("epochs".into(), (outcome.history.len() - 1).into());
    s.insert("best_epoch".into(), outcome.best_epoch.into());
    s.insert("dev_nmse".into(), report.nmse_mean.into());
    s.insert("dev_corr".into(), report.corr_mean.into());
    s.insert("log".into(), path_value(&log));
    Ok(s)
}

pub fn predict_split(
    cfg: &PipelineConfig,
    model: Option<PathBuf>,
    features: Option<PathBuf>,
    split: Split,
    out: Option<PathBuf>,
) -> anyhow::Result<Summary> {
    let model_path = model.unwrap_or_else(|| cfg.paths.estimator());
    let est = Estimator::load(&model_path)?;
    let input = match est.features {
        FeatureKind::Pixels => InputKind::Pixels,
        FeatureKind::Encoded { .. } => InputKind::Features,
    };
    let features_dir = features.unwrap_or_else(|| cfg.paths.features());
    let utterances = parallel_split(load_split(&cfg.paths.corpus, split)?, split, input, &features_dir)?;
    let names = Manifest::read(&cfg.paths.corpus)?.names(split).to_vec();
    let dir = out.unwrap_or_else(|| cfg.paths.predictions());
    ensure_dir(&dir.join(split.name()))?;
    let mut frames = 0usize;
    for (name, utt) in names.iter().zip(&utterances) {
        let params = predict(&est, &utt.features)?;
        write_params(&split_file(&dir, split, name, "param"), &params)?;
        frames += params.len();
    }
    let mut s = Summary::new();
    s.insert("predictions".into(), path_value(&dir));
    s.insert("split".into(), split.name().into());
    s.insert("files".into(), names.len().into());
    s.insert("frames".into(), frames.into());
    Ok(s)
}

pub fn synth(
    cfg: &PipelineConfig,
    params: Option<PathBuf>,
    f0: Option<PathBuf>,
    split: Split,
    out: Option<PathBuf>,
) -> anyhow::Result<Summary> {
    let params_dir = params.unwrap_or_else(|| cfg.paths.predictions());
    let f0_dir = f0.unwrap_or_else(|| cfg.paths.corpus.clone());
    let names = Manifest::read(&cfg.paths.corpus)?.names(split).to_vec();
    let dir = out.unwrap_or_else(|| cfg.paths.audio());
    ensure_dir(&dir.join(split.name()))?;
    let rate = cfg.vocoder.sample_rate.round() as u32;
    let (mut samples, mut clipped) = (0usize, 0usize);
    for (i, name) in names.iter().enumerate() {
        let frames = read_params(&split_file(&params_dir, split, name, "param"), LSP_ORDER)?;
        let track = read_f0(&split_file(&f0_dir, split, name, "f0"))?;
        let wave = mglsa_synthesize(&frames, &track, &cfg.vocoder, cfg.synth.seed.wrapping_add(i as u64))?;
        let stats = write_wav(&split_file(&dir, split, name, "wav"), &wave, rate, cfg.synth.peak_normalize)?;
        samples += stats.samples;
        clipped += stats.clipped;
    }
    let mut s = Summary::new();
    s.insert("audio".into(), path_value(&dir));
    s.insert("split".into(), split.name().into());
    s.insert("files".into(), names.len().into());
    s.insert("samples".into(), samples.into());
    s.insert("clipped".into(), clipped.into());
    Ok(s)
}

pub fn eval(
    cfg: &PipelineConfig,
    predictions: Option<PathBuf>,
    split: Split,
    json_report: bool,
    out: Option<PathBuf>,
) -> anyhow::Result<Summary> {
    let pred_dir = predictions.unwrap_or_else(|| cfg.paths.predictions());
    let mut pred = Vec::new();
    let mut target = Vec::new();
    for utt in load_split(&cfg.paths.corpus, split)? {
        let p = read_params(&split_file(&pred_dir, split, &utt.name, "param"), LSP_ORDER)?;
        if p.len() != utt.targets.len() {
            anyhow::bail!(ssi_core::Error::Shape {
                context: "prediction frames",
                expected: utt.targets.len().to_string(),
                actual: format!("{} in {}", p.len(), utt.name),
            });
        }
        pred.extend(p.iter().map(|v| v.to_row()));
        target.extend(utt.targets.iter().map(|v| v.to_row()));
    }
    let report = evaluate(&pred, &target, &normalizer(cfg)?)?;
    let path = out.unwrap_or_else(|| cfg.paths.report(json_report));
    ensure_parent(&path)?;
    let text = if json_report { report.to_json() + "\n" } else { report.to_text() };
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;

    let mut s = Summary::new();
    s.insert("report".into(), path_value(&path));
    s.insert("split".into(), split.name().into());
    s.insert("n_frames".into(), report.n_frames.into());
    s.insert("nmse_mean".into(), report.nmse_mean.into());
    s.insert("corr_mean".into(), report.corr_mean.into());
    Ok(s)
}

/// Runs every sweep point, or only counts weights when `count_only` is set.
pub fn sweep(cfg: &PipelineConfig, count_only: bool, json_table: bool, out: Option<PathBuf>) -> anyhow::Result<Summary> {
    let mut table = SweepTable::counts(&cfg.sweep, &cfg.estimator);
    if !count_only {
        let data = CorpusData::load(&cfg.paths.corpus)?;
        let normalizer = normalizer(cfg)?;
        let log_file = cfg.paths.work.join("sweep.log.jsonl");
        ensure_parent(&log_file)?;
        let mut log = EpochLog::create(log_file)?;
        let mut bottlenecks: Vec<Option<usize>> = cfg.sweep.points.iter().map(|p| p.bottleneck).collect();
        bottlenecks.sort();
        bottlenecks.dedup();
        for bottleneck in bottlenecks {
            let sets = match bottleneck {
                None => FeatureSets::pixels(&data)?,
                Some(n) => {
                    let ae_cfg = AutoencoderConfig {
                        bottleneck: n,
                        ..cfg.autoencoder.clone()
                    };
                    let stage = format!("autoencoder N={n}");
                    let ae = fit_autoencoder(&data, &ae_cfg, &mut |r| log.record(&stage, r))?;
                    FeatureSets::encoded(&ae.model, &data)?
                }
            };
            for row in table.rows.iter_mut().filter(|r| r.point.bottleneck == bottleneck) {
                let mut est_cfg = cfg.estimator.clone();
                est_cfg.window = WindowSpec::new(row.point.window)?;
                let stage = row.label();
                let scored = fit_and_score(&sets, &est_cfg, &normalizer, &mut |r| log.record(&stage, r))?;
                row.scores = Some(SweepRow::scores_from(&scored));
            }
        }
        log.finish()?;
    }
    let path = out.unwrap_or_else(|| cfg.paths.sweep(json_table));
    ensure_parent(&path)?;
    let text = if json_table { table.to_json() + "\n" } else { table.to_tsv() };
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;

    let mut s = Summary::new();
    s.insert("table".into(), path_value(&path));
    s.insert("rows".into(), serde_json::to_value(&table.rows)?);
    Ok(s)
}
