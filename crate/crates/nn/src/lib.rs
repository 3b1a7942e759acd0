//! Neural text classifiers on a CPU tensor backend: the hybrid
//! transformer + BiLSTM + multi-kernel CNN classifier, an encoder-only
//! baseline, and CNN / BiLSTM baselines over frozen word embeddings.

pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod layers;
pub mod neural;
pub mod params;
pub mod sabia;
pub mod tokenizer;
pub mod training;

pub use error::{Error, Result};
