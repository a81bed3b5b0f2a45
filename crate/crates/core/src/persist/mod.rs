//! Checkpoints (JSON manifest plus little-endian `f64` blob) and pretrained
//! word-vector import.

mod checkpoint;
mod pretrained;

pub use checkpoint::{
    checkpoint_paths, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
    Model, ModelKind, FORMAT_VERSION,
};
pub use pretrained::{load_pretrained_embeddings, Coverage, PretrainedVectors};
