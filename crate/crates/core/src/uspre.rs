//! Ultrasound frame preprocessing.
//!
//! A raw frame holds 64 beams of 946 echo samples each (bytes, beam-major).
//! Each beam is resampled to 128 samples with a separable Catmull-Rom cubic
//! (half-pixel-centred coordinates, clamp-to-edge), clamped to `[0, 255]`,
//! and divided by 255. Beams are not resampled: 64 already matches the
//! target height.
//!
//! On disk a sequence is a headerless `.ult` byte file (frame-major, then
//! beam-major) next to a `.meta` sidecar with `frames`, `beams`, `samples`
//! and `fps` keys.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sidecar::{meta_path, Sidecar};

pub const BEAMS: usize = 64;
pub const RAW_SAMPLES: usize = 946;
pub const SAMPLES: usize = 128;
pub const RAW_FRAME_LEN: usize = BEAMS * RAW_SAMPLES;
pub const FRAME_LEN: usize = BEAMS * SAMPLES;
pub const DEFAULT_FPS: f64 = 82.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    data: Vec<u8>,
}

impl RawFrame {
    pub fn new(data: Vec<u8>) -> Result<Self> {
        if data.len() != RAW_FRAME_LEN {
            return Err(Error::shape("raw frame", format!("{BEAMS} x {RAW_SAMPLES}"), data.len()));
        }
        Ok(RawFrame { data })
    }

    pub fn zeros() -> Self {
        RawFrame {
            data: vec![0; RAW_FRAME_LEN],
        }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn beam(&self, b: usize) -> &[u8] {
        &self.data[b * RAW_SAMPLES..(b + 1) * RAW_SAMPLES]
    }

    pub fn get(&self, beam: usize, sample: usize) -> u8 {
        self.data[beam * RAW_SAMPLES + sample]
    }
}

/// Normalized 64x128 image, beam-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UltrasoundFrame {
    pixels: Vec<f32>,
}

impl UltrasoundFrame {
    pub fn new(pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != FRAME_LEN {
            return Err(Error::shape("ultrasound frame", format!("{BEAMS} x {SAMPLES}"), pixels.len()));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!("pixel {v} outside [0, 1]")));
        }
        Ok(UltrasoundFrame { pixels })
    }

    /// Row-major (beam-major) flattening used as network input.
    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<UltrasoundFrame>,
    pub fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<UltrasoundFrame>, fps: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyDataset("frame sequence"));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        Ok(FrameSequence { frames, fps })
    }

    pub fn from_raw(raw: &[RawFrame], fps: f64) -> Result<Self> {
        Self::new(raw.iter().map(resize_bicubic).collect(), fps)
    }
}

const CATMULL_ROM_A: f64 = -0.5;

fn cubic_kernel(x: f64) -> f64 {
    let a = CATMULL_ROM_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Resamples one line to `out_len` points; output `i` sits at source
/// coordinate `(i + 0.5) * in_len / out_len - 0.5`.
pub fn resample_line(src: &[f64], out_len: usize) -> Vec<f64> {
    let n = src.len();
    if n == 0 {
        return vec![0.0; out_len];
    }
    let scale = n as f64 / out_len as f64;
    let last = n as isize - 1;
    (0..out_len)
        .map(|i| {
            let x = (i as f64 + 0.5) * scale - 0.5;
            let base = x.floor();
            let frac = x - base;
            let base = base as isize;
            (-1..=2)
                .map(|k| {
                    let idx = (base + k).clamp(0, last) as usize;
                    src[idx] * cubic_kernel(frac - k as f64)
                })
                .sum()
        })
        .collect()
}

/// Resamples every beam of a `BEAMS x RAW_SAMPLES` intensity grid to
/// `SAMPLES` points; no clamping.
pub fn resize_intensities(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() != RAW_FRAME_LEN {
        return Err(Error::shape("resize input", RAW_FRAME_LEN, raw.len()));
    }
    Ok(raw
        .chunks_exact(RAW_SAMPLES)
        .flat_map(|beam| resample_line(beam, SAMPLES))
        .collect())
}

/// Divides intensities in `[0, 255]` by 255.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if (0.0..=255.0).contains(&v) {
                Ok(v / 255.0)
            } else {
                Err(Error::InvalidValue(format!("intensity {v} outside [0, 255]")))
            }
        })
        .collect()
}

pub fn resize_bicubic(raw: &RawFrame) -> UltrasoundFrame {
    let intensities: Vec<f64> = raw.data.iter().map(|&b| b as f64).collect();
    let resized = resize_intensities(&intensities).expect("raw frame has fixed shape");
    let clamped: Vec<f64> = resized.into_iter().map(|v| v.clamp(0.0, 255.0)).collect();
    let pixels = normalize(&clamped)
        .expect("clamped")
        .into_iter()
        .map(|v| v as f32)
        .collect();
    UltrasoundFrame { pixels }
}

/// Frames of one `.ult` file with its sidecar frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct UltFile {
    pub frames: Vec<RawFrame>,
    pub fps: f64,
}

pub fn save_ult(path: &Path, frames: &[RawFrame], fps: f64) -> Result<()> {
    let bytes: Vec<u8> = frames.iter().flat_map(|f| f.data.iter().copied()).collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let mut meta = Sidecar::new();
    meta.set("frames", frames.len())
        .set("beams", BEAMS)
        .set("samples", RAW_SAMPLES)
        .set("fps", fps);
    meta.write(&meta_path(path, true))
}

pub fn load_ult(path: &Path) -> Result<UltFile> {
    let meta = Sidecar::read(&meta_path(path, true))?;
    let frames: usize = meta.get("frames")?;
    let beams: usize = meta.get("beams")?;
    let samples: usize = meta.get("samples")?;
    let fps: f64 = meta.get("fps")?;
    if beams != BEAMS || samples != RAW_SAMPLES {
        return Err(Error::shape("ult metadata", format!("{BEAMS} x {RAW_SAMPLES}"), format!("{beams} x {samples}")));
    }
    if !(fps > 0.0) {
        return Err(Error::InvalidValue(format!("fps {fps} in {}", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % RAW_FRAME_LEN != 0 {
        return Err(Error::shape(
            "ult file size",
            format!("multiple of {RAW_FRAME_LEN} bytes"),
            bytes.len(),
        ));
    }
    if bytes.len() / RAW_FRAME_LEN != frames {
        return Err(Error::shape("ult frame count", frames, bytes.len() / RAW_FRAME_LEN));
    }
    Ok(UltFile {
        frames: bytes
            .chunks_exact(RAW_FRAME_LEN)
            .map(|c| RawFrame { data: c.to_vec() })
            .collect(),
        fps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_from_fn(f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(RAW_FRAME_LEN);
        for b in 0..BEAMS {
            for s in 0..RAW_SAMPLES {
                v.push(f(b, s));
            }
        }
        v
    }

    fn target_coord(i: usize) -> f64 {
        (i as f64 + 0.5) * RAW_SAMPLES as f64 / SAMPLES as f64 - 0.5
    }

    #[test]
    fn kernel_is_interpolating_partition_of_unity() {
        assert_eq!(cubic_kernel(0.0), 1.0);
        for k in 1..3 {
            assert!(cubic_kernel(k as f64).abs() < 1e-15);
        }
        for i in 0..100 {
            let t = i as f64 / 100.0;
            let s: f64 = (-1..=2).map(|k| cubic_kernel(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_white_frame_maps_to_ones() {
        let f = resize_bicubic(&RawFrame::new(vec![255; RAW_FRAME_LEN]).unwrap());
        assert!(f.pixels().iter().all(|&p| p == 1.0));
        assert_eq!(f.pixels().len(), FRAME_LEN);
    }

    #[test]
    fn linear_ramp_is_exact() {
        let raw = raw_from_fn(|b, s| 3.0 + 0.2 * s as f64 + b as f64);
        let out = resize_intensities(&raw).unwrap();
        for b in 0..BEAMS {
            for i in 0..SAMPLES {
                let want = 3.0 + 0.2 * target_coord(i) + b as f64;
                assert!((out[b * SAMPLES + i] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_profile_is_exact() {
        let q = |x: f64| 7.0 - 0.03 * x + 2e-4 * x * x;
        let out = resize_intensities(&raw_from_fn(|_, s| q(s as f64))).unwrap();
        for i in 0..SAMPLES {
            assert!((out[i] - q(target_coord(i))).abs() < 1e-9, "i = {i}");
        }
    }

    #[test]
    fn cubic_profile_matches_analytic_value_plus_kernel_error_term() {
        // Catmull-Rom reproduces polynomials up to degree 2. For x^3 the
        // central-difference tangents are off by exactly 1, so the
        // interpolant exceeds the cubic by t(1-t)(1-2t) at fraction t.
        let c3 = 1e-6;
        let cubic = |x: f64| 5.0 + 0.1 * x - 1e-4 * x * x + c3 * x * x * x;
        let out = resize_intensities(&raw_from_fn(|_, s| cubic(s as f64))).unwrap();
        for i in 0..SAMPLES {
            let x = target_coord(i);
            let t = x - x.floor();
            let want = cubic(x) + c3 * t * (1.0 - t) * (1.0 - 2.0 * t);
            assert!((out[i] - want).abs() < 1e-9, "i = {i}");
        }
    }

    #[test]
    fn monotone_ramp_stays_monotone() {
        let raw = RawFrame::new(
            (0..RAW_FRAME_LEN).map(|i| ((i % RAW_SAMPLES) * 255 / (RAW_SAMPLES - 1)) as u8).collect(),
        )
        .unwrap();
        let f = resize_bicubic(&raw);
        for beam in f.pixels().chunks(SAMPLES) {
            assert!(beam.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn normalize_values() {
        assert_eq!(normalize(&[0.0, 255.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(normalize(&[128.0]).unwrap()[0], 128.0 / 255.0);
        assert!((normalize(&[128.0]).unwrap()[0] - 0.501_960_784).abs() < 1e-9);
        assert!(normalize(&[256.0]).is_err());
        assert!(normalize(&[-0.5]).is_err());
    }

    #[test]
    fn wrong_shapes_are_rejected() {
        assert!(RawFrame::new(vec![0; 10]).is_err());
        assert!(resize_intensities(&[0.0; 10]).is_err());
        assert!(UltrasoundFrame::new(vec![0.5; 3]).is_err());
        assert!(UltrasoundFrame::new(vec![1.5; FRAME_LEN]).is_err());
    }

    #[test]
    fn ult_single_zero_frame_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ult");
        save_ult(&p, &[RawFrame::zeros()], 82.0).unwrap();
        let back = load_ult(&p).unwrap();
        assert_eq!(back.frames, vec![RawFrame::zeros()]);
        assert_eq!(back.fps, 82.0);

        let frames: Vec<RawFrame> = (0..3u8)
            .map(|k| RawFrame::new((0..RAW_FRAME_LEN).map(|i| (i as u8).wrapping_mul(k + 1)).collect()).unwrap())
            .collect();
        save_ult(&p, &frames, 60.5).unwrap();
        assert_eq!(load_ult(&p).unwrap().frames, frames);
    }

    #[test]
    fn ult_size_and_metadata_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.ult");
        save_ult(&p, &[RawFrame::zeros()], 82.0).unwrap();
        std::fs::write(&p, vec![0u8; RAW_FRAME_LEN + 7]).unwrap();
        assert!(matches!(load_ult(&p), Err(Error::Shape { .. })));

        let q = dir.path().join("c.ult");
        std::fs::write(&q, vec![0u8; RAW_FRAME_LEN]).unwrap();
        assert!(matches!(load_ult(&q), Err(Error::Metadata { .. })));
    }
}
