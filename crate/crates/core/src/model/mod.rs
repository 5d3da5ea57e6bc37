//! Encoder-decoder Transformer whose decoder is conditioned on a discrete latent
//! class, with the uniform-prior mixture likelihood over classes.
//!
//! Latent classes are 0-based internally (`z in 0..k`); files and reports print
//! them 1-based.

mod checkpoint;
mod config;
mod incremental;
mod ops;
mod params;
mod transformer;
mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION};
pub use config::ModelConfig;
pub use incremental::{DecoderState, IncrementalDecoder};
pub use ops::log_sum_exp;
pub use params::{init_params, Gradients, Layout, ModelParams, TensorInfo};
pub use transformer::{
    accumulate_gradient, backward, encode, forward, mixture_log_likelihood, per_latent_log_probs, sequence_log_prob,
    sequence_log_prob_encoded, DropoutMode, Encoded, LogProbs,
};
pub use vocab::{decoder_input, target_ids, Vocab, BOS, EOS, PAD};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("sequence of length {len} exceeds max_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("latent class {z} out of range for k={k}")]
    LatentOutOfRange { z: usize, k: usize },
    #[error("source sequence is empty")]
    EmptySource,
    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
