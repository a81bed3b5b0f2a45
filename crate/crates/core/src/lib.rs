//! Compositional character-to-word (C2W) word representations, with an LSTM
//! language model and a bidirectional LSTM part-of-speech tagger built on a
//! small reverse-mode differentiation core.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod langmodel;
pub mod nncore;
pub mod persist;
pub mod synthetic;
pub mod tagger;
pub mod training;

pub use error::{Error, Result};

/// The generator behind every seeded draw (initialization, shuffling, OOV
/// replacement).
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
