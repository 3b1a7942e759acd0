//! Data handling, text processing, classical baselines and evaluation for
//! five-class opioid-behavior classification of social-media posts.
//!
//! The neural models live in `sabia-nn`; everything here is plain Rust with
//! no tensor backend.

pub mod annotate;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod lexicon;
pub mod preprocess;

pub use corpus::{AnnotatedPost, Corpus, CorpusFormat, CorpusStats, Label, SplitSpec};
pub use error::{Error, Result};
pub use lexicon::{EntryKind, Lexicon, LexiconEntry};

/// Seeded generator used everywhere randomness is involved.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Index of the largest score; ties resolve to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}
