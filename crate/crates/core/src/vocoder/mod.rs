//! MGC-LSP synthesis: parameter conversion, excitation, the MGLSA filter and
//! WAV output.

mod excitation;
mod filter;
mod lsp;
mod mgc;
mod wav;

pub use excitation::{frame_bounds, make_excitation};
pub use filter::MglsaFilter;
pub use lsp::{coeff_to_lsp, lsp_to_coeff};
pub use mgc::{b2mc, gnorm, ignorm, mc2b, FilterCoefficients};
pub use wav::{read_wav, write_wav, WavStats};

pub use crate::mgclsp::MgcLspVector;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocoderConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub order: usize,
    pub sample_rate: f64,
    pub fps: f64,
}

impl Default for VocoderConfig {
    fn default() -> Self {
        VocoderConfig {
            alpha: 0.42,
            gamma: -1.0 / 3.0,
            order: 24,
            sample_rate: 22050.0,
            fps: 82.0,
        }
    }
}

impl VocoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.abs() < 1.0) {
            return Err(Error::Config(format!("alpha {} must satisfy |alpha| < 1", self.alpha)));
        }
        if self.order < 1 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Config(format!("sample rate {} must be positive", self.sample_rate)));
        }
        if !(self.fps > 0.0 && self.fps < self.sample_rate) {
            return Err(Error::Config(format!("fps {} must be in (0, sample_rate)", self.fps)));
        }
        self.stage().map(|_| ())
    }

    /// Number of cascaded sections, `-1 / gamma`.
    pub fn stage(&self) -> Result<usize> {
        let s = -1.0 / self.gamma;
        let rounded = s.round();
        if !(rounded >= 1.0 && (s - rounded).abs() < 1e-9) {
            return Err(Error::Config(format!(
                "gamma {} is not -1/stage for a positive integer stage",
                self.gamma
            )));
        }
        Ok(rounded as usize)
    }

    pub fn nominal_frame_len(&self) -> f64 {
        self.sample_rate / self.fps
    }
}

/// Per-frame filter state: overall amplitude and `gamma`-scaled normalized
/// coefficients (`coeffs[0]` is zero).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFilter {
    pub amplitude: f64,
    pub coeffs: Vec<f64>,
}

/// LSP vector to filter: `[gain, a]` becomes the generalized cepstrum
/// `a / gamma`, then warped (`mc2b`) and gain-normalized (`gnorm`).
/// The amplitude is `exp(gain) * K`.
pub fn frame_filter(v: &MgcLspVector, cfg: &VocoderConfig) -> Result<FrameFilter> {
    if v.order() != cfg.order {
        return Err(Error::shape("LSP vector", format!("order {}", cfg.order), v.order()));
    }
    let coeffs = lsp_to_coeff(v)?;
    let mut c = vec![0.0; cfg.order + 1];
    for m in 1..=cfg.order {
        c[m] = coeffs[m] / cfg.gamma;
    }
    let norm = gnorm(&mc2b(&c, cfg.alpha), cfg.gamma)?;
    let amplitude = coeffs[0].exp() * norm.gain;
    let scaled: Vec<f64> = norm.coeffs.iter().map(|b| b * cfg.gamma).collect();
    if !amplitude.is_finite() || scaled.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidValue("non-finite filter coefficients".into()));
    }
    Ok(FrameFilter {
        amplitude,
        coeffs: scaled,
    })
}

/// Runs `excitation` through the cascade with one filter per frame. Inside a
/// frame, amplitude and coefficients move linearly towards the next frame's
/// values; the last frame is held.
pub fn filter_excitation(excitation: &[f64], frames: &[FrameFilter], cfg: &VocoderConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let bounds = frame_bounds(frames.len(), cfg);
    let total = *bounds.last().unwrap_or(&0);
    if excitation.len() != total {
        return Err(Error::shape("excitation", format!("{total} samples"), excitation.len()));
    }
    for f in frames {
        if f.coeffs.len() != cfg.order + 1 {
            return Err(Error::shape("frame filter", format!("{} coefficients", cfg.order + 1), f.coeffs.len()));
        }
        if !f.amplitude.is_finite() || f.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidValue("non-finite filter coefficients".into()));
        }
    }
    let mut filter = MglsaFilter::new(cfg.order, cfg.alpha, cfg.stage()?);
    let mut out = Vec::with_capacity(total);
    let mut coeffs = vec![0.0; cfg.order + 1];
    for (k, cur) in frames.iter().enumerate() {
        let next = frames.get(k + 1).unwrap_or(cur);
        let (start, end) = (bounds[k], bounds[k + 1]);
        let len = (end - start) as f64;
        for (i, &x) in excitation[start..end].iter().enumerate() {
            let t = i as f64 / len;
            for (c, (a, b)) in coeffs.iter_mut().zip(cur.coeffs.iter().zip(&next.coeffs)) {
                *c = a + t * (b - a);
            }
            let amp = cur.amplitude + t * (next.amplitude - cur.amplitude);
            out.push(filter.process(amp * x, &coeffs));
        }
    }
    Ok(out)
}

/// Full synthesis of one utterance from parameter frames and an F0 track.
/// `seed` drives the noise excitation of unvoiced frames.
pub fn mglsa_synthesize(params: &[MgcLspVector], f0: &[f64], cfg: &VocoderConfig, seed: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    if params.len() != f0.len() {
        return Err(Error::shape("F0 track", format!("{} frames", params.len()), f0.len()));
    }
    let frames = params
        .iter()
        .enumerate()
        .map(|(k, v)| frame_filter(v, cfg).map_err(|e| Error::InvalidValue(format!("frame {k}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let excitation = make_excitation(f0, cfg, seed)?;
    filter_excitation(&excitation, &frames, cfg)
}
