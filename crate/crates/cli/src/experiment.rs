//! In-memory pipeline stages shared by the commands and the sweep.

use std::path::Path;

use ssi_core::autoenc::{bottleneck_of, encode_all, train_autoencoder, AutoencoderConfig};
use ssi_core::estimator::{train_estimator, EstimatorConfig, EstimatorOutcome, FeatureKind, ParallelUtterance};
use ssi_core::mgclsp::MgcLspVector;
use ssi_core::evalmetrics::{evaluate_split, EvalReport, Normalizer};
use ssi_core::nncore::{EpochRecord, Mlp, TrainOutcome};
use ssi_core::synthcorpus::{generate_split, load_split, CorpusConfig, CorpusUtterance, Split};
use ssi_core::uspre::resize_bicubic;
use ssi_core::Result;

/// All three splits with preprocessed frames.
#[derive(Debug, Clone)]
pub struct CorpusData {
    pub train: Vec<CorpusUtterance>,
    pub dev: Vec<CorpusUtterance>,
    pub test: Vec<CorpusUtterance>,
}

impl CorpusData {
    /// Generates the corpus without touching the disk. The result equals
    /// writing the corpus and loading it back, including the f32 rounding of
    /// targets and F0.
    pub fn synthesize(cfg: &CorpusConfig) -> Result<Self> {
        let split = |s: Split| -> Result<Vec<CorpusUtterance>> {
            generate_split(cfg, s)?
                .into_iter()
                .map(|u| {
                    Ok(CorpusUtterance {
                        name: u.name,
                        pixels: u.frames.iter().map(|f| resize_bicubic(f).into_pixels()).collect(),
                        targets: u.targets.iter().map(as_stored).collect::<Result<_>>()?,
                        f0: u.f0.iter().map(|&v| v as f32 as f64).collect(),
                    })
                })
                .collect()
        };
        Ok(CorpusData {
            train: split(Split::Train)?,
            dev: split(Split::Dev)?,
            test: split(Split::Test)?,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(CorpusData {
            train: load_split(dir, Split::Train)?,
            dev: load_split(dir, Split::Dev)?,
            test: load_split(dir, Split::Test)?,
        })
    }
}

fn as_stored(v: &MgcLspVector) -> Result<MgcLspVector> {
    let row: Vec<f64> = v.to_row().iter().map(|&x| x as f32 as f64).collect();
    MgcLspVector::from_row(&row)
}

pub fn pooled_frames(utterances: &[CorpusUtterance]) -> Vec<Vec<f32>> {
    utterances.iter().flat_map(|u| u.pixels.iter().cloned()).collect()
}

pub fn pixel_utterances(utterances: &[CorpusUtterance]) -> Result<Vec<ParallelUtterance>> {
    utterances
        .iter()
        .map(|u| ParallelUtterance::new(u.pixels.clone(), u.targets.clone()))
        .collect()
}

pub fn encoded_utterances(encoder: &Mlp<f32>, utterances: &[CorpusUtterance]) -> Result<Vec<ParallelUtterance>> {
    utterances
        .iter()
        .map(|u| ParallelUtterance::new(encode_all(encoder, &u.pixels)?, u.targets.clone()))
        .collect()
}

/// Trains the autoencoder on the training frames, early-stopping on dev.
pub fn fit_autoencoder(
    data: &CorpusData,
    cfg: &AutoencoderConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome<f32>> {
    let train = pooled_frames(&data.train);
    let dev = pooled_frames(&data.dev);
    train_autoencoder(&train, Some(&dev), cfg, observer)
}

/// Features of every split for one feature extractor.
pub struct FeatureSets {
    pub kind: FeatureKind,
    pub train: Vec<ParallelUtterance>,
    pub dev: Vec<ParallelUtterance>,
    pub test: Vec<ParallelUtterance>,
}

impl FeatureSets {
    pub fn pixels(data: &CorpusData) -> Result<Self> {
        Ok(FeatureSets {
            kind: FeatureKind::Pixels,
            train: pixel_utterances(&data.train)?,
            dev: pixel_utterances(&data.dev)?,
            test: pixel_utterances(&data.test)?,
        })
    }

    pub fn encoded(encoder: &Mlp<f32>, data: &CorpusData) -> Result<Self> {
        Ok(FeatureSets {
            kind: FeatureKind::Encoded {
                bottleneck: bottleneck_of(encoder)?,
            },
            train: encoded_utterances(encoder, &data.train)?,
            dev: encoded_utterances(encoder, &data.dev)?,
            test: encoded_utterances(encoder, &data.test)?,
        })
    }
}

pub struct Scored {
    pub outcome: EstimatorOutcome,
    pub dev: EvalReport,
    pub test: EvalReport,
}

/// Trains an estimator on `sets.train` (early-stopping on dev) and scores the
/// dev and test splits.
pub fn fit_and_score(
    sets: &FeatureSets,
    cfg: &EstimatorConfig,
    normalizer: &Normalizer,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<Scored> {
    let outcome = train_estimator(&sets.train, &sets.dev, sets.kind, cfg, observer)?;
    let dev = evaluate_split(&outcome.estimator, &sets.dev, normalizer)?;
    let test = evaluate_split(&outcome.estimator, &sets.test, normalizer)?;
    Ok(Scored { outcome, dev, test })
}

/// Population variance of each target dimension over `utterances`.
pub fn target_variances(utterances: &[CorpusUtterance]) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = utterances.iter().flat_map(|u| u.targets.iter().map(|v| v.to_row())).collect();
    let n = rows.len() as f64;
    let dim = rows.first().map_or(0, Vec::len);
    (0..dim)
        .map(|d| {
            let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
            rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}
