//! Command-line orchestration of the ultrasound-to-speech pipeline.
//!
//! The `ssi` binary drives corpus generation, autoencoder training, feature
//! extraction, estimator training, prediction, synthesis, scoring and the
//! bottleneck/window sweep from one TOML configuration file.

pub mod app;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod sweep;

pub use config::PipelineConfig;
