use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::VocoderConfig;
use crate::error::{Error, Result};

/// Sample index at which each frame starts, plus the end of the last frame.
/// Boundaries are `round(k * fs / fps)`, so the total never drifts by more
/// than half a sample however many frames are rendered.
pub fn frame_bounds(frames: usize, cfg: &VocoderConfig) -> Vec<usize> {
    let hop = cfg.sample_rate / cfg.fps;
    (0..=frames).map(|k| (k as f64 * hop).round() as usize).collect()
}

/// Pulse train for voiced frames (`f0 > 0`), white Gaussian noise otherwise.
///
/// Pulses are unit impulses spaced `fs / f0` samples apart; the fractional
/// distance to the next pulse carries over frame boundaries. A voiced run
/// starts with a pulse on its first sample.
pub fn make_excitation(f0: &[f64], cfg: &VocoderConfig, seed: u64) -> Result<Vec<f64>> {
    let nyquist = cfg.sample_rate / 2.0;
    if let Some((i, v)) = f0.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v < nyquist)) {
        return Err(Error::InvalidValue(format!(
            "f0[{i}] = {v} outside [0, {nyquist})"
        )));
    }
    let bounds = frame_bounds(f0.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(*bounds.last().unwrap_or(&0));
    let mut to_next_pulse: Option<f64> = None;
    for (k, &hz) in f0.iter().enumerate() {
        let len = bounds[k + 1] - bounds[k];
        if hz > 0.0 {
            let period = cfg.sample_rate / hz;
            let mut remaining = to_next_pulse.map_or(0.0, |r| r.min(period));
            for _ in 0..len {
                if remaining <= 0.0 {
                    out.push(1.0);
                    remaining += period;
                } else {
                    out.push(0.0);
                }
                remaining -= 1.0;
            }
            to_next_pulse = Some(remaining);
        } else {
            to_next_pulse = None;
            out.extend((0..len).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        }
    }
    Ok(out)
}
