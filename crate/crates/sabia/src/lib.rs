//! Five-class opioid-behavior classification of social-media posts, end to
//! end: ingestion, lexicon normalization, preprocessing, classical and
//! neural baselines, the encoder + BiLSTM + convolution hybrid, annotation
//! agreement and evaluation.
//!
//! The heavy lifting lives in [`core`] (data, text, classical models,
//! metrics) and [`nn`] (tensor models). This crate adds the run
//! configuration, a uniform train/save/load/predict layer and the
//! command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;

pub use sabia_core as core;
pub use sabia_nn as nn;

pub use config::{ModelChoice, RunConfig};
pub use error::Failure;
pub use pipeline::{train_model, TrainedModel};
