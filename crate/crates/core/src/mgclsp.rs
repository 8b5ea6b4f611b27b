//! MGC-LSP parameter vectors and their SPTK-style float files.
//!
//! A parameter file is headerless little-endian f32, frame-major, `1 + M`
//! values per frame: log gain first, then `M` LSP frequencies in radians.
//! An F0 file holds one f32 per frame in Hz, 0 marking unvoiced frames.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sidecar::{read_f32_le, write_f32_le};

pub const LSP_ORDER: usize = 24;
pub const PARAM_DIM: usize = LSP_ORDER + 1;

/// Gap enforced between neighbouring frequencies when repairing predictions.
pub const REPAIR_MIN_GAP: f64 = 1e-4;

/// Log-domain gain plus strictly increasing LSP frequencies in `(0, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MgcLspVector {
    pub gain: f64,
    pub lsp: Vec<f64>,
}

impl MgcLspVector {
    pub fn new(gain: f64, lsp: Vec<f64>) -> Result<Self> {
        let v = MgcLspVector { gain, lsp };
        v.validate()?;
        Ok(v)
    }

    pub fn order(&self) -> usize {
        self.lsp.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() {
            return Err(Error::InvalidValue(format!("gain {} is not finite", self.gain)));
        }
        if self.lsp.is_empty() {
            return Err(Error::InvalidValue("empty LSP vector".into()));
        }
        for (i, &w) in self.lsp.iter().enumerate() {
            if !(w > 0.0 && w < PI) {
                return Err(Error::InvalidValue(format!("lsp[{i}] = {w} outside (0, pi)")));
            }
        }
        if let Some(i) = self.lsp.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::InvalidValue(format!(
                "lsp not strictly increasing at {i}: {} >= {}",
                self.lsp[i],
                self.lsp[i + 1]
            )));
        }
        Ok(())
    }

    /// `[gain, lsp...]`
    pub fn to_row(&self) -> Vec<f64> {
        std::iter::once(self.gain).chain(self.lsp.iter().copied()).collect()
    }

    pub fn from_row(row: &[f64]) -> Result<Self> {
        if row.len() < 2 {
            return Err(Error::shape("parameter row", ">= 2 values", row.len()));
        }
        Self::new(row[0], row[1..].to_vec())
    }

    /// Builds a valid vector from raw regression output: frequencies are
    /// sorted, kept inside `(0, pi)` and separated by at least `min_gap`.
    pub fn repaired(row: &[f64], min_gap: f64) -> Result<Self> {
        if row.len() < 2 {
            return Err(Error::shape("parameter row", ">= 2 values", row.len()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite predicted parameter".into()));
        }
        let m = row.len() - 1;
        if (m + 1) as f64 * min_gap >= PI {
            return Err(Error::Config(format!("gap {min_gap} too large for order {m}")));
        }
        let mut lsp = row[1..].to_vec();
        lsp.sort_by(f64::total_cmp);
        let lo = min_gap;
        let hi = PI - min_gap;
        let mut prev = lo - min_gap;
        for w in lsp.iter_mut() {
            *w = w.clamp(lo, hi).max(prev + min_gap);
            prev = *w;
        }
        let mut next = hi + min_gap;
        for w in lsp.iter_mut().rev() {
            *w = w.min(next - min_gap);
            next = *w;
        }
        Self::new(row[0], lsp)
    }
}

pub fn write_params(path: &Path, frames: &[MgcLspVector]) -> Result<()> {
    write_f32_le(path, frames.iter().flat_map(|v| v.to_row()).map(|x| x as f32))
}

/// Reads a parameter file with `order` LSPs per frame, validating every frame.
pub fn read_params(path: &Path, order: usize) -> Result<Vec<MgcLspVector>> {
    let flat = read_f32_le(path)?;
    let dim = order + 1;
    if flat.len() % dim != 0 {
        return Err(Error::shape("parameter file", format!("multiple of {dim} floats"), flat.len()));
    }
    flat.chunks_exact(dim)
        .enumerate()
        .map(|(i, c)| {
            let row: Vec<f64> = c.iter().map(|&x| x as f64).collect();
            MgcLspVector::from_row(&row).map_err(|e| Error::InvalidValue(format!("{} frame {i}: {e}", path.display())))
        })
        .collect()
}

pub fn write_f0(path: &Path, f0: &[f64]) -> Result<()> {
    write_f32_le(path, f0.iter().map(|&x| x as f32))
}

pub fn read_f0(path: &Path) -> Result<Vec<f64>> {
    let f0: Vec<f64> = read_f32_le(path)?.into_iter().map(f64::from).collect();
    if let Some(v) = f0.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidValue(format!("f0 value {v} in {}", path.display())));
    }
    Ok(f0)
}
