//! The pipeline configuration file (TOML) and the artifact layout derived from it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use ssi_core::autoenc::AutoencoderConfig;
use ssi_core::estimator::{EstimatorConfig, WindowSpec};
use ssi_core::mgclsp::LSP_ORDER;
use ssi_core::synthcorpus::{CorpusConfig, Split};
use ssi_core::uspre::FRAME_LEN;
use ssi_core::vocoder::VocoderConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: CorpusConfig,
    pub autoencoder: AutoencoderConfig,
    pub estimator: EstimatorConfig,
    pub vocoder: VocoderConfig,
    pub synth: SynthConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Seed of the unvoiced-noise generator; utterance `i` uses `seed + i`.
    pub seed: u64,
    pub peak_normalize: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            peak_normalize: true,
        }
    }
}

/// Where the NMSE denominators come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerSource {
    /// Variance of the split being scored.
    #[default]
    Evaluation,
    /// Variance of the training split targets.
    Training,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub normalizer: NormalizerSource,
}

/// One row of the sweep table. Without a bottleneck the raw pixels are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottleneck: Option<usize>,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub points: Vec<SweepPoint>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let point = |bottleneck, window| SweepPoint { bottleneck, window };
        SweepConfig {
            points: vec![
                point(None, 1),
                point(None, 5),
                point(Some(64), 1),
                point(Some(64), 9),
                point(Some(256), 1),
                point(Some(256), 9),
                point(Some(256), 13),
                point(Some(512), 1),
                point(Some(512), 5),
                point(Some(512), 9),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Corpus root holding `manifest` and the split directories.
    pub corpus: PathBuf,
    /// Directory for models, features, predictions, audio and reports.
    pub work: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: PathBuf::from("corpus"),
            work: PathBuf::from("work"),
        }
    }
}

impl Paths {
    pub fn autoencoder(&self) -> PathBuf {
        self.work.join("autoencoder.model")
    }
    pub fn features(&self) -> PathBuf {
        self.work.join("features")
    }
    pub fn estimator(&self) -> PathBuf {
        self.work.join("estimator.model")
    }
    pub fn predictions(&self) -> PathBuf {
        self.work.join("predictions")
    }
    pub fn audio(&self) -> PathBuf {
        self.work.join("wav")
    }
    pub fn report(&self, json: bool) -> PathBuf {
        self.work.join(if json { "report.json" } else { "report.txt" })
    }
    pub fn sweep(&self, json: bool) -> PathBuf {
        self.work.join(if json { "sweep.json" } else { "sweep.tsv" })
    }
}

/// `dir/split/name.ext`.
pub fn split_file(dir: &Path, split: Split, name: &str, ext: &str) -> PathBuf {
    dir.join(split.name()).join(format!("{name}.{ext}"))
}

impl PipelineConfig {
    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Uses `seed` for corpus generation, both trainings and synthesis noise.
    pub fn apply_seed(&mut self, seed: u64) {
        self.corpus.seed = seed;
        self.autoencoder.train.seed = seed;
        self.estimator.train.seed = seed;
        self.synth.seed = seed;
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.corpus.validate()?;
        self.autoencoder.validate()?;
        self.estimator.validate()?;
        self.vocoder.validate()?;
        if self.autoencoder.input_dim != FRAME_LEN {
            bail!(ssi_core::Error::Config(format!(
                "autoencoder.input_dim must be the frame size {FRAME_LEN}, got {}",
                self.autoencoder.input_dim
            )));
        }
        if self.vocoder.order != LSP_ORDER {
            bail!(ssi_core::Error::Config(format!(
                "vocoder.order must be {LSP_ORDER} to match the parameter files, got {}",
                self.vocoder.order
            )));
        }
        if self.vocoder.fps != self.corpus.fps {
            bail!(ssi_core::Error::Config(format!(
                "vocoder.fps {} differs from corpus.fps {}",
                self.vocoder.fps, self.corpus.fps
            )));
        }
        for p in &self.sweep.points {
            WindowSpec::new(p.window)?;
            if let Some(n) = p.bottleneck {
                AutoencoderConfig {
                    bottleneck: n,
                    ..self.autoencoder.clone()
                }
                .validate()?;
            }
        }
        Ok(())
    }
}
