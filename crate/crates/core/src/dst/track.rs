use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::data::{DialogueTurn, Ontology};
use super::model::{DstModel, ScoringMode, SlotCandidate};
use crate::codeswitch::AttentionRecord;
use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::metrics::{BeliefState, NONE_VALUE};

/// Match probabilities for the candidates of one turn.
pub trait SlotScorer {
    /// One probability per value of `slot`, in ontology order.
    fn goal_probs(&self, turn: &DialogueTurn, slot: &str, values: &[String]) -> Result<Vec<f64>>;
    /// One probability per requestable slot.
    fn request_probs(&self, turn: &DialogueTurn, requestable: &[String]) -> Result<Vec<f64>>;
}

/// A trained model paired with the embedding table it reads.
pub struct ModelScorer<'a> {
    pub model: &'a DstModel,
    pub embeddings: &'a EmbeddingTable,
}

impl SlotScorer for ModelScorer<'_> {
    fn goal_probs(&self, turn: &DialogueTurn, slot: &str, values: &[String]) -> Result<Vec<f64>> {
        let cands: Vec<SlotCandidate> = values.iter().map(|v| SlotCandidate::new(slot, v)).collect();
        self.model
            .match_probs(self.embeddings, &turn.utterance, &turn.acts, &cands)
    }

    fn request_probs(&self, turn: &DialogueTurn, requestable: &[String]) -> Result<Vec<f64>> {
        let cands: Vec<SlotCandidate> = requestable.iter().map(|r| SlotCandidate::request(r)).collect();
        self.model
            .match_probs(self.embeddings, &turn.utterance, &turn.acts, &cands)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    /// A goal value must score above this to replace the previous value.
    pub threshold: f64,
    pub mode: ScoringMode,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            threshold: 0.5,
            mode: ScoringMode::Binary,
        }
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// The value to set for one slot this turn, if any.
fn pick_value(probs: &[f64], cfg: &TrackConfig) -> Option<usize> {
    if probs.is_empty() {
        return None;
    }
    let best = crate::numeric::argmax(probs);
    match cfg.mode {
        ScoringMode::Binary => (probs[best] > cfg.threshold).then_some(best),
        ScoringMode::SlotSoftmax => {
            // the implicit `none` option has logit 0, i.e. p = 0.5
            let mut logits: Vec<f64> = probs.iter().map(|&p| logit(p)).collect();
            logits.push(0.0);
            let winner = crate::numeric::argmax(&logits);
            (winner < probs.len()).then_some(winner)
        }
    }
}

/// Belief state after every turn. Goal values carry over when no candidate
/// wins; requests are predicted afresh each turn.
pub fn track_dialogue<S: SlotScorer + ?Sized>(
    scorer: &S,
    dialogue: &[DialogueTurn],
    ontology: &Ontology,
    cfg: &TrackConfig,
) -> Result<Vec<BeliefState>> {
    let mut state = BeliefState {
        goal: ontology
            .slots()
            .map(|s| (s.to_string(), NONE_VALUE.to_string()))
            .collect(),
        requests: BTreeSet::new(),
    };
    let mut out = Vec::with_capacity(dialogue.len());
    for turn in dialogue {
        for slot in ontology.slots() {
            let values = ontology.values(slot)?;
            let probs = scorer.goal_probs(turn, slot, values)?;
            if let Some(i) = pick_value(&probs, cfg) {
                state.goal.insert(slot.to_string(), values[i].clone());
            }
        }
        let req = ontology.requestable();
        let probs = scorer.request_probs(turn, req)?;
        state.requests = req
            .iter()
            .zip(&probs)
            .filter(|(_, &p)| p > 0.5)
            .map(|(r, _)| r.clone())
            .collect();
        out.push(state.clone());
    }
    Ok(out)
}

/// Track every dialogue with a trained model and return the flattened
/// per-turn predictions.
pub fn track_all(
    model: &DstModel,
    emb: &EmbeddingTable,
    dialogues: &[Vec<DialogueTurn>],
    ontology: &Ontology,
    cfg: &TrackConfig,
) -> Result<Vec<BeliefState>> {
    let scorer = ModelScorer { model, embeddings: emb };
    let mut out = Vec::new();
    for d in dialogues {
        out.extend(track_dialogue(&scorer, d, ontology, cfg)?);
    }
    Ok(out)
}

/// Encoder attention over every user utterance, with ids `d{i}-t{j}`.
pub fn attention_records(
    model: &DstModel,
    emb: &EmbeddingTable,
    dialogues: &[Vec<DialogueTurn>],
) -> Result<Vec<AttentionRecord>> {
    let mut out = Vec::new();
    for (i, d) in dialogues.iter().enumerate() {
        for (j, turn) in d.iter().enumerate() {
            let (_, scores) = model.encode_utterance(emb, &turn.utterance)?;
            out.push(AttentionRecord {
                utterance_id: format!("d{i}-t{j}"),
                tokens: turn.utterance.clone(),
                scores,
            });
        }
    }
    Ok(out)
}
