//! 16-bit PCM mono RIFF files.

use std::path::Path;

use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32767.0;
const PEAK_TARGET: f64 = 0.99;
const MAX_CLIP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavStats {
    pub samples: usize,
    pub clipped: usize,
    /// Factor applied before quantization (1 without peak normalization).
    pub scale: f64,
}

/// Writes `samples` (nominal range `[-1, 1]`). With `peak_normalize` the
/// signal is scaled so its peak sits just below full scale. Refuses to write
/// when more than 1% of samples would clip.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32, peak_normalize: bool) -> Result<WavStats> {
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!("sample {i} is not finite")));
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak_normalize && peak > 0.0 { PEAK_TARGET / peak } else { 1.0 };
    let clipped = samples.iter().filter(|v| (*v * scale).abs() > 1.0).count();
    if !samples.is_empty() && clipped as f64 / samples.len() as f64 > MAX_CLIP_FRACTION {
        return Err(Error::Clipping {
            fraction: clipped as f64 / samples.len() as f64,
        });
    }

    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in samples {
        let q = (v * scale * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
    Ok(WavStats {
        samples: samples.len(),
        clipped,
        scale,
    })
}

/// Returns the samples scaled to `[-1, 1]` and the sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Format(format!("{}: {what}", path.display()));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = bytes
            .get(pos + 8..pos + 8 + len)
            .ok_or_else(|| Error::Truncated(format!("{}: chunk overruns file", path.display())))?;
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(bad("short fmt chunk"));
                }
                let u16_at = |o: usize| u16::from_le_bytes(body[o..o + 2].try_into().unwrap());
                if u16_at(0) != 1 || u16_at(2) != 1 || u16_at(14) != 16 {
                    return Err(bad("only 16-bit PCM mono is supported"));
                }
                rate = Some(u32::from_le_bytes(body[4..8].try_into().unwrap()));
            }
            b"data" => {
                let rate = rate.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                let samples = body
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / FULL_SCALE)
                    .collect();
                return Ok((samples, rate));
            }
            _ => {}
        }
        pos += 8 + len + (len & 1);
    }
    Err(bad("no data chunk"))
}
