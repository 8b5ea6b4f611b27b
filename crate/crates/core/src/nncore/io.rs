//! Binary model file.
//!
//! ```text
//! "AESSI"            5 bytes magic
//! version            u8 (= 1)
//! layer count        u32
//! per layer          input_dim u32, output_dim u32, activation u8 (0 linear, 1 swish), beta f64
//! per layer          weights (output_dim * input_dim, row-major) then biases, f32
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use super::mlp::{Activation, Dense, LayerSpec, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"AESSI";
pub const VERSION: u8 = 1;

pub fn encode_model(model: &Mlp<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for l in model.layers() {
        out.extend_from_slice(&(l.spec.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&(l.spec.output_dim as u32).to_le_bytes());
        let (tag, beta) = match l.spec.activation {
            Activation::Linear => (0u8, 0.0f64),
            Activation::Swish { beta } => (1u8, beta),
        };
        out.push(tag);
        out.extend_from_slice(&beta.to_le_bytes());
    }
    for l in model.layers() {
        for v in l.weights.iter().chain(&l.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!(
                "model file ends at byte {} while reading {what}",
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Mlp<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Format("bad magic (expected \"AESSI\")".into()));
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = r.u32("layer count")? as usize;
    if n == 0 || n > 4096 {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let mut specs = Vec::with_capacity(n);
    for i in 0..n {
        let input_dim = r.u32("layer table")? as usize;
        let output_dim = r.u32("layer table")? as usize;
        let tag = r.take(1, "layer table")?[0];
        let beta = f64::from_le_bytes(r.take(8, "layer table")?.try_into().unwrap());
        let activation = match tag {
            0 => Activation::Linear,
            1 => Activation::Swish { beta },
            t => return Err(Error::Format(format!("layer {i}: unknown activation tag {t}"))),
        };
        specs.push(LayerSpec::new(input_dim, output_dim, activation));
    }
    let mut layers = Vec::with_capacity(n);
    for spec in specs {
        let mut floats = |count: usize| -> Result<Vec<f32>> {
            let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Format("layer too large".into()))?, "parameters")?;
            Ok(raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let weights = floats(spec.input_dim * spec.output_dim)?;
        let biases = floats(spec.output_dim)?;
        layers.push(Dense { spec, weights, biases });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Mlp::from_layers(layers)
}

pub fn save_model(model: &Mlp<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Mlp<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
