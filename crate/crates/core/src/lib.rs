//! Training dialogue models on a source language so they transfer to a
//! target language, by swapping attention-mined keywords for translations.
//!
//! The crate is split into:
//!
//! * [`numeric`]: tensors, a reverse-mode tape, BiLSTM cells, SGD/Adam and a
//!   finite-difference gradient checker.
//! * [`embeddings`]: word2vec text tables, bilingual lexicons and
//!   subword-to-word aggregation.
//! * [`codeswitch`]: attention-based keyword mining and the code-switching
//!   sentence generator.
//! * [`dst`] and [`nlu`]: the dialogue state tracker and the joint
//!   intent/slot model.
//! * [`metrics`]: slot, joint goal, request and intent accuracy and BIO F1.
//! * [`checkpoint`]: task-tagged JSON model files.

pub mod checkpoint;
pub mod codeswitch;
pub mod dst;
pub mod embeddings;
mod error;
pub mod metrics;
pub mod nlu;
pub mod numeric;
pub mod rng;
pub mod text;

pub use checkpoint::{Checkpoint, Task};
pub use error::{Error, Result};
