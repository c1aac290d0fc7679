//! Joint intent detection and slot filling.

pub mod crf;
mod data;
mod model;
mod train;

pub use crf::{crf_log_partition, crf_marginals, crf_nll, crf_path_score, crf_viterbi, CrfScores, TransitionMask};
pub use data::{is_bio_tag, label_sets, load_nlu, parse_nlu, read_nlu, write_nlu, NluExample};
pub use model::{attention_records, NluCheckpoint, NluDims, NluForward, NluLayout, NluModel, NluPrediction};
pub use train::{train_nlu, train_nlu_model, NluTrainConfig, NluTrained};
