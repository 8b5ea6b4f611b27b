//! Ultrasound-to-speech mapping through autoencoder bottleneck features.
//!
//! The pipeline: raw ultrasound frames are resized and normalized ([`uspre`]),
//! compressed by an autoencoder ([`autoenc`]), windowed and regressed onto
//! 25-dimensional MGC-LSP vocoder parameters ([`estimator`]), and rendered to
//! audio with an MGLSA filter ([`vocoder`]). [`evalmetrics`] scores predictions,
//! and [`synthcorpus`] produces a deterministic parallel corpus for experiments.

pub mod autoenc;
pub mod error;
pub mod estimator;
pub mod evalmetrics;
pub mod mgclsp;
pub mod nncore;
pub mod sidecar;
pub mod synthcorpus;
pub mod uspre;
pub mod vocoder;

pub use error::{Error, Result};
