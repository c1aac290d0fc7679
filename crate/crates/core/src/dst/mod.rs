//! Dialogue state tracking.

mod data;
mod model;
mod track;
mod train;

pub use data::{
    dialogues_from_json, gold_beliefs, load_dialogues, parse_dialogues, read_dialogues, write_dialogues, Dialogue,
    DialogueSet, DialogueTurn, Ontology, SystemActs,
};
pub use model::{
    act_embeddings, candidate_embedding, ActVars, DstCheckpoint, DstDims, DstLayout, DstModel, ScoringMode,
    SlotCandidate, MATCH, NO_MATCH,
};
pub use track::{attention_records, track_all, track_dialogue, ModelScorer, SlotScorer, TrackConfig};
pub use train::{train_dst, train_dst_model, DstTrainConfig, DstTrained};
