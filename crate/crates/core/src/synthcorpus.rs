//! Deterministic synthetic parallel corpus.
//!
//! Each utterance starts from a smooth latent trajectory in `[-1, 1]^d`. The
//! latents of a frame shape a bright tongue-like contour in a raw ultrasound
//! frame, and the latents of a window of neighbouring frames determine the
//! target MGC-LSP vector through a fixed seeded map. An F0 track with voiced
//! and unvoiced stretches accompanies every utterance.
//!
//! On disk: `train/`, `dev/` and `test/` hold `uttNNN.ult` (+ `.meta`),
//! `uttNNN.param` and `uttNNN.f0`; a `manifest` lists the splits together with
//! the seed and a hash of the configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mgclsp::{read_f0, read_params, write_f0, write_params, MgcLspVector, LSP_ORDER};
use crate::sidecar::Sidecar;
use crate::uspre::{load_ult, resize_bicubic, save_ult, RawFrame, BEAMS, RAW_FRAME_LEN, RAW_SAMPLES};

/// Largest LSP displacement from the uniform grid.
pub const LSP_PERTURBATION: f64 = 0.045;
/// Minimum separation of target LSPs from each other and from 0 and pi.
pub const TARGET_MARGIN: f64 = 0.01;
const GAIN_BASE: f64 = -1.0;
const GAIN_SLOPE: f64 = 3.0;
const TANH_DRIVE: f64 = 2.0;
const BACKGROUND: f64 = 30.0;
const PEAK: f64 = 200.0;

/// Shape of the latent-window to target map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Gain from latent energy, LSP offsets through `tanh` of a mixing.
    #[default]
    Tanh,
    /// Gain and LSP offsets linear in the latents.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub latent_dim: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub frames_per_utterance: usize,
    /// Standard deviation of the multiplicative speckle.
    pub speckle_noise_sigma: f64,
    /// Frames on each side of the centre that influence a target.
    pub context_radius: usize,
    /// Length of the smoothing kernel applied to the latent innovations.
    pub smoothing_window: usize,
    pub step_sigma: f64,
    /// Largest change of any latent between adjacent frames.
    pub max_delta: f64,
    /// Standard deviation of the contour cross-section, in raw samples.
    pub contour_width: f64,
    pub target_map: TargetKind,
    pub fps: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            latent_dim: 8,
            n_train: 31,
            n_dev: 4,
            n_test: 9,
            frames_per_utterance: 100,
            speckle_noise_sigma: 0.3,
            context_radius: 2,
            smoothing_window: 5,
            step_sigma: 1.0,
            max_delta: 0.5,
            contour_width: 60.0,
            target_map: TargetKind::Tanh,
            fps: 82.0,
            seed: 1,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("corpus: {what}")));
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1");
        }
        if self.n_train == 0 || self.n_dev == 0 || self.n_test == 0 {
            return bad("every split needs at least one utterance");
        }
        if self.frames_per_utterance == 0 {
            return bad("frames_per_utterance must be at least 1");
        }
        if !(self.speckle_noise_sigma >= 0.0) || !(self.step_sigma >= 0.0) {
            return bad("noise levels must be non-negative");
        }
        if self.smoothing_window == 0 {
            return bad("smoothing_window must be at least 1");
        }
        if !(self.max_delta > 0.0) || !(self.contour_width > 0.0) || !(self.fps > 0.0) {
            return bad("max_delta, contour_width and fps must be positive");
        }
        Ok(())
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Dev => self.n_dev,
            Split::Test => self.n_test,
        }
    }

    /// Hex SHA-256 of the JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown split `{s}` (train, dev or test)")))
    }
}

/// One latent vector per frame, every component in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    pub frames: Vec<Vec<f64>>,
}

fn smoothing_kernel(len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=len).map(|j| (PI * j as f64 / (len + 1) as f64).sin().powi(2)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Gaussian innovations smoothed by a unit-sum raised-cosine kernel, then
/// rate limited to `max_delta` per frame and clipped to `[-1, 1]`.
pub fn sample_trajectory(cfg: &CorpusConfig, frames: usize, rng: &mut impl Rng) -> LatentTrajectory {
    let d = cfg.latent_dim;
    let kernel = smoothing_kernel(cfg.smoothing_window);
    let span = frames + kernel.len() - 1;
    let innovations: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            (0..span)
                .map(|_| {
                    let n: f64 = StandardNormal.sample(rng);
                    cfg.step_sigma * n
                })
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(frames);
    for t in 0..frames {
        let row = (0..d)
            .map(|k| {
                let smooth: f64 = kernel.iter().zip(&innovations[k][t..]).map(|(w, n)| w * n).sum();
                let v = match out.last() {
                    Some(prev) => prev[k] + (smooth - prev[k]).clamp(-cfg.max_delta, cfg.max_delta),
                    None => smooth,
                };
                v.clamp(-1.0, 1.0)
            })
            .collect();
        out.push(row);
    }
    LatentTrajectory { frames: out }
}

/// Depth of the contour (in raw samples) under beam position `x` in `[-1, 1]`.
pub fn contour_depth(latents: &[f64], x: f64) -> f64 {
    let z = |k: usize| latents.get(k).copied().unwrap_or(0.0);
    let mut y = 500.0 - 220.0 * x * x + 120.0 * z(0) + 60.0 * z(1) * x + 80.0 * z(2) * x * x;
    for k in 3..latents.len() {
        y += 30.0 * z(k) * ((k - 2) as f64 * PI * x).sin();
    }
    y
}

/// Contour of brightness 200 on a background of 30 with Gaussian cross
/// section, times `max(0, 1 + sigma * n)` speckle per sample.
pub fn render_frame(latents: &[f64], cfg: &CorpusConfig, rng: &mut impl Rng) -> RawFrame {
    let mut data = Vec::with_capacity(RAW_FRAME_LEN);
    let inv = 1.0 / (2.0 * cfg.contour_width * cfg.contour_width);
    for b in 0..BEAMS {
        let x = -1.0 + 2.0 * b as f64 / (BEAMS - 1) as f64;
        let y = contour_depth(latents, x);
        for s in 0..RAW_SAMPLES {
            let dist = s as f64 - y;
            let mut v = BACKGROUND + (PEAK - BACKGROUND) * (-dist * dist * inv).exp();
            if cfg.speckle_noise_sigma > 0.0 {
                let n: f64 = StandardNormal.sample(rng);
                v *= (1.0 + cfg.speckle_noise_sigma * n).max(0.0);
            }
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    RawFrame::new(data).expect("frame has the raw size")
}

/// Fixed map from a window of latent vectors to a target parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMap {
    kind: TargetKind,
    radius: usize,
    latent_dim: usize,
    /// `LSP_ORDER` rows over the flattened window.
    mixing: Vec<f64>,
}

impl TargetMap {
    /// Mixing weights are drawn from stream 0 of the corpus seed.
    pub fn new(cfg: &CorpusConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0);
        let cols = (2 * cfg.context_radius + 1) * cfg.latent_dim;
        let mut mixing: Vec<f64> = (0..LSP_ORDER * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        for row in mixing.chunks_exact_mut(cols) {
            let norm = match cfg.target_map {
                TargetKind::Tanh => (cols as f64).sqrt() / TANH_DRIVE,
                TargetKind::Linear => row.iter().map(|v: &f64| v.abs()).sum(),
            };
            row.iter_mut().for_each(|v| *v /= norm);
        }
        TargetMap {
            kind: cfg.target_map,
            radius: cfg.context_radius,
            latent_dim: cfg.latent_dim,
            mixing,
        }
    }

    pub fn window_len(&self) -> usize {
        2 * self.radius + 1
    }

    /// Target for a window of `2r + 1` latent vectors in temporal order.
    pub fn latents_to_target(&self, window: &[&[f64]]) -> Result<MgcLspVector> {
        if window.len() != self.window_len() || window.iter().any(|z| z.len() != self.latent_dim) {
            return Err(Error::shape(
                "latent window",
                format!("{} x {}", self.window_len(), self.latent_dim),
                format!("{} frames", window.len()),
            ));
        }
        let flat: Vec<f64> = window.iter().flat_map(|z| z.iter().copied()).collect();
        let mean = |f: fn(f64) -> f64| flat.iter().map(|&v| f(v)).sum::<f64>() / flat.len() as f64;
        let gain = match self.kind {
            TargetKind::Tanh => GAIN_BASE + GAIN_SLOPE * mean(|v| v * v),
            TargetKind::Linear => GAIN_BASE + GAIN_SLOPE * mean(|v| v),
        };
        let cols = flat.len();
        let lsp: Vec<f64> = (0..LSP_ORDER)
            .map(|k| {
                let drive: f64 = self.mixing[k * cols..(k + 1) * cols].iter().zip(&flat).map(|(m, z)| m * z).sum();
                let offset = match self.kind {
                    TargetKind::Tanh => drive.tanh(),
                    TargetKind::Linear => drive,
                };
                (k + 1) as f64 * PI / (LSP_ORDER + 1) as f64 + LSP_PERTURBATION * offset
            })
            .collect();
        let v = MgcLspVector::repaired(&std::iter::once(gain).chain(lsp).collect::<Vec<_>>(), TARGET_MARGIN)?;
        Ok(v)
    }

    /// Targets of every frame, replicating the first and last latent vectors
    /// beyond the edges.
    pub fn trajectory_targets(&self, traj: &LatentTrajectory) -> Result<Vec<MgcLspVector>> {
        let n = traj.frames.len() as isize;
        let r = self.radius as isize;
        (0..n)
            .map(|t| {
                let window: Vec<&[f64]> = (t - r..=t + r)
                    .map(|i| traj.frames[i.clamp(0, n - 1) as usize].as_slice())
                    .collect();
                self.latents_to_target(&window)
            })
            .collect()
    }
}

/// Alternating voiced stretches (150 +- 30 Hz sinusoidal contour) and
/// unvoiced stretches (0).
pub fn f0_track(frames: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(frames);
    let mut voiced = rng.random_bool(0.7);
    while out.len() < frames {
        let len = if voiced { rng.random_range(15..=40) } else { rng.random_range(5..=15) };
        let phase = rng.random_range(0.0..2.0 * PI);
        let period = rng.random_range(20.0..60.0);
        for i in 0..len.min(frames - out.len()) {
            out.push(if voiced {
                150.0 + 30.0 * (2.0 * PI * i as f64 / period + phase).sin()
            } else {
                0.0
            });
        }
        voiced = !voiced;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub name: String,
    pub latents: LatentTrajectory,
    pub frames: Vec<RawFrame>,
    pub targets: Vec<MgcLspVector>,
    pub f0: Vec<f64>,
}

pub fn utterance_name(index: usize) -> String {
    format!("utt{index:03}")
}

/// Utterance `index` of `split`, drawn from its own stream of the corpus seed.
pub fn generate_utterance(cfg: &CorpusConfig, map: &TargetMap, split: Split, index: usize) -> Result<SyntheticUtterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1 + split.index() * (1 << 32) + index as u64);
    let latents = sample_trajectory(cfg, cfg.frames_per_utterance, &mut rng);
    let f0 = f0_track(cfg.frames_per_utterance, &mut rng);
    let frames = latents.frames.iter().map(|z| render_frame(z, cfg, &mut rng)).collect();
    let targets = map.trajectory_targets(&latents)?;
    Ok(SyntheticUtterance {
        name: utterance_name(index),
        latents,
        frames,
        targets,
        f0,
    })
}

pub fn generate_split(cfg: &CorpusConfig, split: Split) -> Result<Vec<SyntheticUtterance>> {
    cfg.validate()?;
    let map = TargetMap::new(cfg);
    (0..cfg.count(split)).map(|i| generate_utterance(cfg, &map, split, i)).collect()
}

/// Writes the whole corpus under `dir` and returns the manifest.
pub fn generate_corpus(cfg: &CorpusConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let map = TargetMap::new(cfg);
    let mut manifest = Manifest {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        fps: cfg.fps,
        splits: Default::default(),
    };
    for split in Split::ALL {
        let sub = dir.join(split.name());
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let mut names = Vec::new();
        for i in 0..cfg.count(split) {
            let utt = generate_utterance(cfg, &map, split, i)?;
            let stem = sub.join(&utt.name);
            save_ult(&stem.with_extension("ult"), &utt.frames, cfg.fps)?;
            write_params(&stem.with_extension("param"), &utt.targets)?;
            write_f0(&stem.with_extension("f0"), &utt.f0)?;
            names.push(utt.name);
        }
        manifest.splits[split.index() as usize] = names;
    }
    manifest.write(&dir.join("manifest"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub fps: f64,
    /// Utterance names of train, dev and test.
    pub splits: [Vec<String>; 3],
}

impl Manifest {
    pub fn names(&self, split: Split) -> &[String] {
        &self.splits[split.index() as usize]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = Sidecar::new();
        s.set("seed", self.seed).set("config_sha256", &self.config_hash).set("fps", self.fps);
        for split in Split::ALL {
            s.set(split.name(), self.names(split).join(","));
        }
        s.write(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let s = Sidecar::read(&dir.join("manifest"))?;
        let list = |split: Split| -> Result<Vec<String>> {
            let raw: String = s.get(split.name())?;
            Ok(raw.split(',').filter(|n| !n.is_empty()).map(str::to_string).collect())
        };
        Ok(Manifest {
            seed: s.get("seed")?,
            config_hash: s.get("config_sha256")?,
            fps: s.get("fps")?,
            splits: [list(Split::Train)?, list(Split::Dev)?, list(Split::Test)?],
        })
    }
}

/// Path stem (`dir/split/name`) of an utterance; append extensions to it.
pub fn utterance_stem(dir: &Path, split: Split, name: &str) -> PathBuf {
    dir.join(split.name()).join(name)
}

/// An utterance read back from disk with preprocessed frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusUtterance {
    pub name: String,
    pub pixels: Vec<Vec<f32>>,
    pub targets: Vec<MgcLspVector>,
    pub f0: Vec<f64>,
}

/// Loads frames (resized and normalized), targets and F0 of one utterance and
/// checks that their frame counts agree.
pub fn load_utterance(dir: &Path, split: Split, name: &str) -> Result<CorpusUtterance> {
    let stem = utterance_stem(dir, split, name);
    let ult = load_ult(&stem.with_extension("ult"))?;
    let targets = read_params(&stem.with_extension("param"), LSP_ORDER)?;
    let f0 = read_f0(&stem.with_extension("f0"))?;
    if targets.len() != ult.frames.len() || f0.len() != ult.frames.len() {
        return Err(Error::shape(
            "utterance frame counts",
            ult.frames.len(),
            format!("{} params, {} f0", targets.len(), f0.len()),
        ));
    }
    Ok(CorpusUtterance {
        name: name.to_string(),
        pixels: ult.frames.iter().map(|f| resize_bicubic(f).into_pixels()).collect(),
        targets,
        f0,
    })
}

pub fn load_split(dir: &Path, split: Split) -> Result<Vec<CorpusUtterance>> {
    let manifest = Manifest::read(dir)?;
    manifest.names(split).iter().map(|n| load_utterance(dir, split, n)).collect()
}
