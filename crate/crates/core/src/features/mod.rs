//! Document features: sparse TF-IDF vectors for the classical models and
//! pretrained word-embedding tables for the neural baselines.

mod embeddings;
mod sparse;
mod tfidf;

pub use embeddings::{load_embeddings, parse_embeddings, toy_embeddings, EmbeddingTable, OovPolicy, TOY_DIM};
pub use sparse::SparseVector;
pub use tfidf::{fit_tfidf, transform_tfidf, TfidfModel};
