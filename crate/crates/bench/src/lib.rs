//! Deterministic inputs shared by the benchmarks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssi_core::mgclsp::{MgcLspVector, LSP_ORDER};
use ssi_core::uspre::{RawFrame, RAW_FRAME_LEN};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in `[-1, 1)`.
pub fn uniform(n: usize, seed: u64) -> Vec<f32> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn raw_frame(seed: u64) -> RawFrame {
    let mut r = rng(seed);
    RawFrame::new((0..RAW_FRAME_LEN).map(|_| r.random()).collect()).expect("raw frame size")
}

/// `frames` parameter vectors wobbling around a flat spectrum.
pub fn params(frames: usize) -> Vec<MgcLspVector> {
    (0..frames)
        .map(|t| {
            let phase = t as f64 * 0.1;
            let lsp = (1..=LSP_ORDER)
                .map(|k| k as f64 * PI / 25.0 + 0.04 * (phase + k as f64).sin())
                .collect();
            MgcLspVector::new(-1.0 + 0.5 * phase.cos(), lsp).expect("valid lsp")
        })
        .collect()
}

/// Alternating voiced and unvoiced stretches of 20 frames.
pub fn f0(frames: usize) -> Vec<f64> {
    (0..frames).map(|t| if (t / 20) % 2 == 0 { 140.0 } else { 0.0 }).collect()
}
