//! Retrosynthesis prediction at desk scale.
//!
//! * [`chem`]: molecular graphs, SMILES parsing, writing, canonical forms, tokens.
//! * [`augment`]: pre-training corpora (bond breaking, templates), SMILES variants,
//!   template-disjoint splits and rare-reaction subsets.
//! * [`model`]: encoder-decoder Transformer with discrete latent classes.
//! * [`training`]: online hard-EM training and the pre-train/fine-tune schedule.
//! * [`decode`]: per-latent beam search and cross-latent merging.
//! * [`eval`]: top-k accuracy, diversity statistics and latent/class tables.

pub mod augment;
pub mod chem;
pub mod model;
pub mod training;
pub mod decode;
pub mod eval;
