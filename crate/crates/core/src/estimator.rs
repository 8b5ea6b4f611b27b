//! Sliding-window regression from per-frame features to vocoder parameters.
//!
//! Each sample is the concatenation of `w` consecutive feature frames centred
//! on the target frame; the network is `w * dim -> hidden x layers (swish) ->
//! 25 (linear)`. Targets are standardized per dimension with training-set
//! statistics and mapped back at prediction time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mgclsp::{PARAM_DIM, REPAIR_MIN_GAP};
use crate::nncore::{self, chain_specs, count_weights, Activation, Dataset, EpochRecord, LayerSpec, Mlp, TrainConfig};
use crate::uspre::FRAME_LEN;

pub use crate::mgclsp::MgcLspVector;

/// How positions before the first or after the last frame are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgePolicy {
    #[default]
    Replicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub width: usize,
    pub edge_policy: EdgePolicy,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            width: 9,
            edge_policy: EdgePolicy::Replicate,
        }
    }
}

impl WindowSpec {
    pub fn new(width: usize) -> Result<Self> {
        let w = WindowSpec {
            width,
            edge_policy: EdgePolicy::Replicate,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width % 2 == 0 {
            return Err(Error::Config(format!("window width must be odd and positive, got {}", self.width)));
        }
        Ok(())
    }

    /// Frames on each side of the centre.
    pub fn radius(&self) -> usize {
        self.width / 2
    }
}

/// Writes the window around frame `t` into `out` (length `width * dim`).
pub fn fill_window(features: &[Vec<f32>], t: usize, spec: &WindowSpec, out: &mut [f32]) -> Result<()> {
    let n = features.len();
    if t >= n {
        return Err(Error::InvalidValue(format!("frame index {t} out of range for {n} frames")));
    }
    let dim = features[0].len();
    if out.len() != spec.width * dim {
        return Err(Error::shape("window buffer", spec.width * dim, out.len()));
    }
    let r = spec.radius() as isize;
    for (slot, offset) in (-r..=r).enumerate() {
        let src = match spec.edge_policy {
            EdgePolicy::Replicate => (t as isize + offset).clamp(0, n as isize - 1) as usize,
        };
        let frame = &features[src];
        if frame.len() != dim {
            return Err(Error::shape("feature frame", dim, frame.len()));
        }
        out[slot * dim..(slot + 1) * dim].copy_from_slice(frame);
    }
    Ok(())
}

/// Concatenation of frames `t - r ..= t + r` in temporal order.
pub fn assemble_window(features: &[Vec<f32>], t: usize, spec: &WindowSpec) -> Result<Vec<f32>> {
    let dim = features.first().map_or(0, Vec::len);
    let mut out = vec![0.0; spec.width * dim];
    fill_window(features, t, spec, &mut out)?;
    Ok(out)
}

/// Frame-synchronous features and target parameters of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelUtterance {
    pub features: Vec<Vec<f32>>,
    pub targets: Vec<MgcLspVector>,
}

impl ParallelUtterance {
    pub fn new(features: Vec<Vec<f32>>, targets: Vec<MgcLspVector>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::shape("utterance targets", features.len(), targets.len()));
        }
        if features.is_empty() {
            return Err(Error::EmptyDataset("utterance frames"));
        }
        let dim = features[0].len();
        if dim == 0 || features.iter().any(|f| f.len() != dim) {
            return Err(Error::shape("utterance features", dim, "ragged or empty frames"));
        }
        Ok(ParallelUtterance { features, targets })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn target_rows(&self) -> Vec<Vec<f64>> {
        self.targets.iter().map(MgcLspVector::to_row).collect()
    }
}

/// Source of the per-frame features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    /// Bottleneck activations of an autoencoder with `bottleneck` units.
    Encoded { bottleneck: usize },
    /// Raw preprocessed frames.
    Pixels,
}

impl FeatureKind {
    pub fn dim(&self) -> usize {
        match self {
            FeatureKind::Encoded { bottleneck } => *bottleneck,
            FeatureKind::Pixels => FRAME_LEN,
        }
    }

    /// Weights outside the estimator needed to produce the features.
    pub fn encoder_weights(&self) -> u64 {
        match self {
            FeatureKind::Encoded { bottleneck } => (FRAME_LEN * bottleneck) as u64,
            FeatureKind::Pixels => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub window: WindowSpec,
    pub train: TrainConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            hidden_width: 1024,
            hidden_layers: 5,
            window: WindowSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(Error::Config("estimator needs at least one non-empty hidden layer".into()));
        }
        self.window.validate()?;
        self.train.validate()
    }

    pub fn dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        dims.push(PARAM_DIM);
        dims
    }

    pub fn specs(&self, input_dim: usize) -> Vec<LayerSpec> {
        chain_specs(&self.dims(input_dim), Activation::SILU, Activation::Linear)
    }
}

pub fn build_estimator(input_dim: usize, cfg: &EstimatorConfig) -> Result<Mlp<f32>> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("estimator input dimension must be positive".into()));
    }
    Mlp::new(&cfg.specs(input_dim), cfg.train.seed)
}

/// Weights of the estimator plus, for encoded features, the encoder layer.
pub fn pipeline_weights(kind: FeatureKind, cfg: &EstimatorConfig) -> u64 {
    kind.encoder_weights() + count_weights(&cfg.dims(cfg.window.width * kind.dim()))
}

/// Per-dimension affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics of `rows`; constant dimensions keep scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || dim == 0 {
            return Err(Error::EmptyDataset("standardizer rows"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::shape("standardizer rows", dim, r.len()));
            }
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for (j, v) in r.iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| v * s + m).collect()
    }
}

/// Windowed samples over a set of utterances, assembled on demand.
pub struct WindowedDataset<'a> {
    utterances: &'a [ParallelUtterance],
    index: Vec<(usize, usize)>,
    spec: WindowSpec,
    dim: usize,
    targets: Vec<f32>,
}

impl<'a> WindowedDataset<'a> {
    pub fn new(utterances: &'a [ParallelUtterance], spec: WindowSpec, standardizer: &Standardizer) -> Result<Self> {
        spec.validate()?;
        let dim = utterances.first().map_or(0, ParallelUtterance::feature_dim);
        let mut index = Vec::new();
        let mut targets = Vec::new();
        for (u, utt) in utterances.iter().enumerate() {
            if utt.feature_dim() != dim {
                return Err(Error::shape(
                    "utterance feature dimension",
                    dim,
                    format!("{} in utterance {u}", utt.feature_dim()),
                ));
            }
            for (t, v) in utt.targets.iter().enumerate() {
                index.push((u, t));
                targets.extend(standardizer.apply(&v.to_row()).into_iter().map(|x| x as f32));
            }
        }
        Ok(WindowedDataset {
            utterances,
            index,
            spec,
            dim,
            targets,
        })
    }
}

impl Dataset<f32> for WindowedDataset<'_> {
    fn len(&self) -> usize {
        self.index.len()
    }
    fn input_dim(&self) -> usize {
        self.spec.width * self.dim
    }
    fn target_dim(&self) -> usize {
        PARAM_DIM
    }
    fn fill_input(&self, index: usize, out: &mut [f32]) {
        let (u, t) = self.index[index];
        fill_window(&self.utterances[u].features, t, &self.spec, out).expect("validated at construction");
    }
    fn fill_target(&self, index: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.targets[index * PARAM_DIM..(index + 1) * PARAM_DIM]);
    }
}

/// A trained regressor with everything needed to apply it.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub model: Mlp<f32>,
    pub standardizer: Standardizer,
    pub window: WindowSpec,
    pub features: FeatureKind,
}

#[derive(Serialize, Deserialize)]
struct EstimatorMeta {
    window: WindowSpec,
    features: FeatureKind,
    standardizer: Standardizer,
}

impl Estimator {
    pub fn feature_dim(&self) -> usize {
        self.model.input_dim() / self.window.width
    }

    /// Companion JSON file holding window, feature kind and target statistics.
    pub fn meta_path(model_path: &Path) -> PathBuf {
        let mut s = model_path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        nncore::save_model(&self.model, path)?;
        let meta = EstimatorMeta {
            window: self.window,
            features: self.features,
            standardizer: self.standardizer.clone(),
        };
        let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
        let meta_path = Self::meta_path(path);
        std::fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model = nncore::load_model(path)?;
        let meta_path = Self::meta_path(path);
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: EstimatorMeta =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;
        meta.window.validate()?;
        if model.input_dim() % meta.window.width != 0
            || model.output_dim() != PARAM_DIM
            || meta.standardizer.mean.len() != PARAM_DIM
            || meta.standardizer.std.len() != PARAM_DIM
        {
            return Err(Error::Format(format!("{}: model and metadata disagree", path.display())));
        }
        Ok(Estimator {
            model,
            standardizer: meta.standardizer,
            window: meta.window,
            features: meta.features,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Trains on frames pooled across `train`, keeping the snapshot with the
/// lowest standardized dev loss.
pub fn train_estimator(
    train: &[ParallelUtterance],
    dev: &[ParallelUtterance],
    features: FeatureKind,
    cfg: &EstimatorConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<EstimatorOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("estimator training utterances"));
    }
    if dev.is_empty() {
        return Err(Error::EmptyDataset("estimator dev utterances"));
    }
    let dim = train[0].feature_dim();
    if let Some(bad) = train.iter().chain(dev).find(|u| u.feature_dim() != dim) {
        return Err(Error::shape("utterance feature dimension", dim, bad.feature_dim()));
    }
    if dim != features.dim() {
        return Err(Error::shape("feature dimension", features.dim(), dim));
    }
    let rows: Vec<Vec<f64>> = train.iter().flat_map(ParallelUtterance::target_rows).collect();
    let standardizer = Standardizer::fit(&rows)?;
    let train_set = WindowedDataset::new(train, cfg.window, &standardizer)?;
    let dev_set = WindowedDataset::new(dev, cfg.window, &standardizer)?;
    let model = build_estimator(cfg.window.width * dim, cfg)?;
    let outcome = nncore::train_with_observer(model, &train_set, Some(&dev_set), &cfg.train, observer)?;
    Ok(EstimatorOutcome {
        estimator: Estimator {
            model: outcome.model,
            standardizer,
            window: cfg.window,
            features,
        },
        history: outcome.history,
        best_epoch: outcome.best_epoch,
    })
}

/// De-standardized network outputs, one 25-vector per frame, before repair.
pub fn predict_rows(est: &Estimator, features: &[Vec<f32>]) -> Result<Vec<Vec<f64>>> {
    if features.is_empty() {
        return Ok(Vec::new());
    }
    let dim = features[0].len();
    if dim * est.window.width != est.model.input_dim() {
        return Err(Error::shape(
            "estimator input",
            est.model.input_dim(),
            format!("{} x {dim}", est.window.width),
        ));
    }
    let width = est.window.width * dim;
    let mut out = Vec::with_capacity(features.len());
    let starts: Vec<usize> = (0..features.len()).step_by(256).collect();
    for start in starts {
        let end = (start + 256).min(features.len());
        let mut batch = vec![0.0f32; (end - start) * width];
        for t in start..end {
            let row = t - start;
            fill_window(features, t, &est.window, &mut batch[row * width..(row + 1) * width])?;
        }
        let y = est.model.forward_batch(&batch, end - start)?;
        for row in y.chunks_exact(PARAM_DIM) {
            let z: Vec<f64> = row.iter().map(|&v| v as f64).collect();
            out.push(est.standardizer.invert(&z));
        }
    }
    Ok(out)
}

/// Valid parameter vectors for every frame; LSP ordering is repaired.
pub fn predict(est: &Estimator, features: &[Vec<f32>]) -> Result<Vec<MgcLspVector>> {
    predict_rows(est, features)?
        .iter()
        .map(|r| MgcLspVector::repaired(r, REPAIR_MIN_GAP))
        .collect()
}
