//! Single-bottleneck autoencoder over flattened ultrasound frames.
//!
//! The network is `input_dim -> N (swish) -> input_dim (linear)`, trained to
//! reproduce its input under MSE. After training only the first layer (the
//! encoder) is used, as a feature extractor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{self, Activation, Dataset, LayerSpec, Mlp, TrainConfig, TrainOutcome};
use crate::sidecar::{meta_path, read_f32_le, write_f32_le, Sidecar};
use crate::uspre::FRAME_LEN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    pub input_dim: usize,
    pub bottleneck: usize,
    pub train: TrainConfig,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            input_dim: FRAME_LEN,
            bottleneck: 256,
            train: TrainConfig {
                learning_rate: 1e-3,
                batch_size: 16,
                max_epochs: 100,
                ..TrainConfig::default()
            },
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bottleneck == 0 || self.bottleneck >= self.input_dim {
            return Err(Error::Config(format!(
                "bottleneck must satisfy 0 < N < input_dim ({}), got {}",
                self.input_dim, self.bottleneck
            )));
        }
        self.train.validate()
    }

    /// Entries of the encoder weight matrix (`input_dim * N`).
    pub fn encoder_weights(&self) -> u64 {
        (self.input_dim * self.bottleneck) as u64
    }
}

/// Bottleneck activations of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    pub features: Vec<f32>,
}

pub fn build_autoencoder(cfg: &AutoencoderConfig) -> Result<Mlp<f32>> {
    cfg.validate()?;
    let specs = [
        LayerSpec::new(cfg.input_dim, cfg.bottleneck, Activation::SILU),
        LayerSpec::new(cfg.bottleneck, cfg.input_dim, Activation::Linear),
    ];
    Mlp::new(&specs, cfg.train.seed)
}

/// Frames used both as inputs and targets.
pub struct ReconstructionSet<'a> {
    frames: &'a [Vec<f32>],
    dim: usize,
}

impl<'a> ReconstructionSet<'a> {
    pub fn new(frames: &'a [Vec<f32>]) -> Result<Self> {
        let dim = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != dim) {
            return Err(Error::shape("autoencoder frames", dim, "ragged frame lengths"));
        }
        Ok(ReconstructionSet { frames, dim })
    }
}

impl Dataset<f32> for ReconstructionSet<'_> {
    fn len(&self) -> usize {
        self.frames.len()
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn target_dim(&self) -> usize {
        self.dim
    }
    fn fill_input(&self, index: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.frames[index]);
    }
    fn fill_target(&self, index: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.frames[index]);
    }
}

/// Trains on `train` frames (row-major flattened), early-stopping on `dev`
/// when given.
pub fn train_autoencoder(
    train: &[Vec<f32>],
    dev: Option<&[Vec<f32>]>,
    cfg: &AutoencoderConfig,
    observer: &mut dyn FnMut(&nncore::EpochRecord),
) -> Result<TrainOutcome<f32>> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("autoencoder training frames"));
    }
    let model = build_autoencoder(cfg)?;
    let train_set = ReconstructionSet::new(train)?;
    if train_set.dim != cfg.input_dim {
        return Err(Error::shape("autoencoder frames", cfg.input_dim, train_set.dim));
    }
    let dev_set = dev.filter(|d| !d.is_empty()).map(ReconstructionSet::new).transpose()?;
    if let Some(d) = &dev_set {
        if d.dim != cfg.input_dim {
            return Err(Error::shape("autoencoder dev frames", cfg.input_dim, d.dim));
        }
    }
    nncore::train_with_observer(
        model,
        &train_set,
        dev_set.as_ref().map(|d| d as &dyn Dataset<f32>),
        &cfg.train,
        observer,
    )
}

/// Bottleneck width of `model`, or an error if it is not a
/// `D -> N (swish) -> D (linear)` autoencoder.
pub fn bottleneck_of(model: &Mlp<f32>) -> Result<usize> {
    let l = model.layers();
    let ok = l.len() == 2
        && matches!(l[0].spec.activation, Activation::Swish { .. })
        && l[1].spec.activation == Activation::Linear
        && l[0].spec.input_dim == l[1].spec.output_dim
        && l[0].spec.output_dim < l[0].spec.input_dim;
    if !ok {
        return Err(Error::shape("autoencoder", "D -> N (swish) -> D (linear), N < D", format!("{:?}", model.dims())));
    }
    Ok(l[0].spec.output_dim)
}

pub fn encode(model: &Mlp<f32>, frame: &[f32]) -> Result<EncodedFrame> {
    bottleneck_of(model)?;
    Ok(EncodedFrame {
        features: model.forward_layers(0..1, frame, 1)?,
    })
}

/// Encodes many frames at once; returns one feature vector per frame.
pub fn encode_all(model: &Mlp<f32>, frames: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    let n = bottleneck_of(model)?;
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(256) {
        let flat = chunk.concat();
        let codes = model.forward_layers(0..1, &flat, chunk.len())?;
        out.extend(codes.chunks_exact(n).map(<[f32]>::to_vec));
    }
    Ok(out)
}

pub fn decode(model: &Mlp<f32>, code: &EncodedFrame) -> Result<Vec<f32>> {
    bottleneck_of(model)?;
    model.forward_layers(1..2, &code.features, 1)
}

pub fn reconstruct(model: &Mlp<f32>, frame: &[f32]) -> Result<Vec<f32>> {
    model.forward(frame)
}

/// Mean reconstruction MSE over frames.
pub fn reconstruction_mse(model: &Mlp<f32>, frames: &[Vec<f32>]) -> Result<f64> {
    nncore::dataset_loss(model, &ReconstructionSet::new(frames)?, 64)
}

/// Writes `path` (f32 LE, frame-major) and `path.meta` with `frames` and `dim`.
pub fn write_features(path: &Path, features: &[Vec<f32>]) -> Result<()> {
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::shape("feature rows", dim, "ragged rows"));
    }
    write_f32_le(path, features.iter().flatten().copied())?;
    let mut meta = Sidecar::new();
    meta.set("frames", features.len()).set("dim", dim);
    meta.write(&meta_path(path, false))
}

pub fn read_features(path: &Path) -> Result<Vec<Vec<f32>>> {
    let meta = Sidecar::read(&meta_path(path, false))?;
    let frames: usize = meta.get("frames")?;
    let dim: usize = meta.get("dim")?;
    let flat = read_f32_le(path)?;
    if flat.len() != frames * dim {
        return Err(Error::shape("feature file", frames * dim, flat.len()));
    }
    if dim == 0 {
        return Ok(vec![Vec::new(); frames]);
    }
    Ok(flat.chunks_exact(dim).map(<[f32]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(input_dim: usize, bottleneck: usize) -> AutoencoderConfig {
        AutoencoderConfig {
            input_dim,
            bottleneck,
            train: TrainConfig {
                learning_rate: 1e-2,
                l2_lambda: 0.0,
                batch_size: 8,
                max_epochs: 400,
                patience: 400,
                seed: 3,
                ..Default::default()
            },
        }
    }

    #[test]
    fn built_shapes_and_weight_counts() {
        let m = build_autoencoder(&cfg(8, 2)).unwrap();
        assert_eq!(m.dims(), vec![8, 2, 8]);
        let big = AutoencoderConfig {
            bottleneck: 256,
            ..Default::default()
        };
        assert_eq!(big.encoder_weights() * 2, 4_194_304);
        let small = AutoencoderConfig {
            bottleneck: 64,
            ..Default::default()
        };
        assert_eq!(small.encoder_weights(), 524_288);
        assert!(build_autoencoder(&cfg(8, 8)).is_err());
        assert!(build_autoencoder(&cfg(8, 0)).is_err());
    }

    #[test]
    fn encode_length_and_composition() {
        let m = build_autoencoder(&cfg(12, 4)).unwrap();
        let x: Vec<f32> = (0..12).map(|i| (i as f32 * 0.3).sin().abs()).collect();
        let code = encode(&m, &x).unwrap();
        assert_eq!(code.features.len(), 4);
        assert_eq!(decode(&m, &code).unwrap(), reconstruct(&m, &x).unwrap());
        assert_eq!(encode(&m, &x).unwrap(), code);
        assert_eq!(encode_all(&m, &[x.clone(), x.clone()]).unwrap()[1], code.features);
    }

    #[test]
    fn zero_frame_with_zero_bias_encodes_to_zero() {
        let m = build_autoencoder(&cfg(10, 3)).unwrap();
        assert_eq!(encode(&m, &[0.0; 10]).unwrap().features, vec![0.0; 3]);
    }

    #[test]
    fn non_autoencoder_is_rejected() {
        let m = Mlp::<f32>::new(
            &nncore::chain_specs(&[6, 3, 2], Activation::SILU, Activation::Linear),
            0,
        )
        .unwrap();
        assert!(encode(&m, &[0.0; 6]).is_err());
    }

    #[test]
    fn overfits_one_repeated_frame() {
        let frame: Vec<f32> = (0..16).map(|i| 0.1 + 0.05 * (i % 5) as f32).collect();
        let frames = vec![frame.clone(); 8];
        let out = train_autoencoder(&frames, None, &cfg(16, 4), &mut |_| {}).unwrap();
        let mse = reconstruction_mse(&out.model, &[frame]).unwrap();
        assert!(mse < 1e-4, "mse {mse}");
    }

    #[test]
    fn learns_a_low_rank_subspace() {
        // Rank-2 data in 12 dims: x = 0.5 + u * a + v * b.
        let a: Vec<f32> = (0..12).map(|i| ((i as f32) * 0.7).sin() * 0.3).collect();
        let b: Vec<f32> = (0..12).map(|i| ((i as f32) * 1.3).cos() * 0.3).collect();
        let frames: Vec<Vec<f32>> = (0..64)
            .map(|k| {
                let u = ((k as f32) * 0.37).sin();
                let v = ((k as f32) * 0.91).cos();
                (0..12).map(|i| 0.5 + u * a[i] + v * b[i]).collect()
            })
            .collect();
        let mut c = cfg(12, 3);
        c.train.max_epochs = 600;
        let out = train_autoencoder(&frames, None, &c, &mut |_| {}).unwrap();
        let mse = reconstruction_mse(&out.model, &frames).unwrap();
        assert!(mse < 1e-3, "mse {mse}");
        let initial = out.history[0].train_loss;
        assert!(mse < initial);
    }

    #[test]
    fn zero_learning_rate_returns_initialization() {
        let frames = vec![vec![0.5f32; 6]; 4];
        let mut c = cfg(6, 2);
        c.train.learning_rate = 0.0;
        c.train.max_epochs = 3;
        let out = train_autoencoder(&frames, None, &c, &mut |_| {}).unwrap();
        assert_eq!(out.model, build_autoencoder(&c).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let frames = vec![vec![0.5f32; 7]; 4];
        assert!(train_autoencoder(&frames, None, &cfg(6, 2), &mut |_| {}).is_err());
    }

    #[test]
    fn feature_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("utt000.feat");
        let feats = vec![vec![1.0f32, -2.5, 3.25], vec![0.0, 1e-7, -0.0]];
        write_features(&p, &feats).unwrap();
        assert_eq!(read_features(&p).unwrap(), feats);
        assert!(dir.path().join("utt000.feat.meta").exists());
    }
}
