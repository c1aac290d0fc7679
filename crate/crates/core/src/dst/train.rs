use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::data::{DialogueTurn, Ontology};
use super::model::{
    act_embeddings, candidate_embedding, DstDims, DstModel, ScoringMode, SlotCandidate, MATCH, NO_MATCH,
};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::metrics::NONE_VALUE;
use crate::numeric::{Bound, Optimizer, OptimizerKind, Tape, Tensor, Var};
use crate::rng::{self, Rng, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DstTrainConfig {
    pub hidden_dim: usize,
    /// Add the bilinear match term to the output head.
    pub bilinear: bool,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    /// Negative values sampled per gold (slot, value).
    pub negatives: usize,
    /// Negative values sampled for each goal slot the turn does not label.
    pub unlabelled_negatives: usize,
    pub mode: ScoringMode,
    pub seed: u64,
}

impl Default for DstTrainConfig {
    fn default() -> Self {
        DstTrainConfig {
            hidden_dim: 16,
            bilinear: true,
            epochs: 20,
            lr: 0.05,
            optimizer: OptimizerKind::Sgd,
            momentum: 0.0,
            clip_norm: Some(5.0),
            negatives: 3,
            unlabelled_negatives: 1,
            mode: ScoringMode::Binary,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DstTrained {
    pub model: DstModel,
    /// Mean loss per training term, per epoch.
    pub losses: Vec<f64>,
}

/// Up to `k` indices from `0..n` other than `exclude`, in sampled order.
fn sample_except(rng: &mut Rng, n: usize, exclude: &[usize], k: usize) -> Vec<usize> {
    let pool: Vec<usize> = (0..n).filter(|i| !exclude.contains(i)).collect();
    let take = k.min(pool.len());
    index::sample(rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

/// Training terms for one turn: `(candidate, label)` pairs for binary
/// scoring and, in softmax mode, `(slot, target)` where `target == values.len()`
/// means `none`.
struct TurnPlan {
    binary: Vec<(SlotCandidate, usize)>,
    softmax: Vec<(String, usize)>,
}

fn plan_turn(turn: &DialogueTurn, ontology: &Ontology, cfg: &DstTrainConfig, rng: &mut Rng) -> Result<TurnPlan> {
    let mut plan = TurnPlan {
        binary: Vec::new(),
        softmax: Vec::new(),
    };
    for slot in ontology.slots() {
        let values = ontology.values(slot)?;
        let gold = turn
            .gold_slots
            .get(slot)
            .filter(|v| v.as_str() != NONE_VALUE)
            .and_then(|v| values.iter().position(|x| x == v));
        match cfg.mode {
            ScoringMode::Binary => {
                let exclude: Vec<usize> = gold.into_iter().collect();
                if let Some(g) = gold {
                    plan.binary.push((SlotCandidate::new(slot, &values[g]), MATCH));
                }
                let k = if gold.is_some() {
                    cfg.negatives
                } else {
                    cfg.unlabelled_negatives
                };
                for i in sample_except(rng, values.len(), &exclude, k) {
                    plan.binary.push((SlotCandidate::new(slot, &values[i]), NO_MATCH));
                }
            }
            ScoringMode::SlotSoftmax => plan.softmax.push((slot.to_string(), gold.unwrap_or(values.len()))),
        }
    }
    let req = ontology.requestable();
    let asked: Vec<usize> = (0..req.len())
        .filter(|&i| turn.gold_requests.contains(&req[i]))
        .collect();
    for &i in &asked {
        plan.binary.push((SlotCandidate::request(&req[i]), MATCH));
    }
    let k = if asked.is_empty() {
        cfg.unlabelled_negatives
    } else {
        cfg.negatives * asked.len()
    };
    for i in sample_except(rng, req.len(), &asked, k) {
        plan.binary.push((SlotCandidate::request(&req[i]), NO_MATCH));
    }
    Ok(plan)
}

/// Loss terms for one turn, recorded on `tape`.
fn turn_terms(
    model: &DstModel,
    tape: &mut Tape,
    b: &Bound,
    emb: &EmbeddingTable,
    turn: &DialogueTurn,
    plan: &TurnPlan,
    ontology: &Ontology,
) -> Result<Vec<Var>> {
    let layout = &model.layout;
    let xs = model.embed(tape, emb, &turn.utterance)?;
    let (r, _) = layout.encode(tape, b, &xs)?;
    let (er, ec) = act_embeddings(emb, &turn.acts);
    let (er, ec) = (tape.constant(er), tape.constant(ec));
    let acts = layout.acts(tape, b, er, ec)?;
    let logits_for = |tape: &mut Tape, cand: &SlotCandidate| -> Result<Var> {
        let e = tape.constant(candidate_embedding(emb, cand));
        let g = layout.gate(tape, e, acts)?;
        layout.logits(tape, b, r, g)
    };

    let mut terms = Vec::new();
    for (cand, label) in &plan.binary {
        let logits = logits_for(tape, cand)?;
        let lp = tape.log_softmax(logits)?;
        let picked = tape.pick(lp, *label)?;
        terms.push(tape.scale(picked, -1.0));
    }
    for (slot, target) in &plan.softmax {
        let mut scores = Vec::new();
        for v in ontology.values(slot)? {
            let logits = logits_for(tape, &SlotCandidate::new(slot, v))?;
            let m = tape.pick(logits, MATCH)?;
            let n = tape.pick(logits, NO_MATCH)?;
            scores.push(tape.sub(m, n)?);
        }
        scores.push(tape.constant(Tensor::scalar(0.0)));
        let all = tape.concat(&scores)?;
        let lp = tape.log_softmax(all)?;
        let picked = tape.pick(lp, *target)?;
        terms.push(tape.scale(picked, -1.0));
    }
    Ok(terms)
}

/// Train a fresh tracker over every turn of `turns`.
pub fn train_dst(
    turns: &[DialogueTurn],
    ontology: &Ontology,
    emb: &EmbeddingTable,
    cfg: &DstTrainConfig,
) -> Result<DstTrained> {
    let dims = DstDims {
        embed_dim: emb.dim(),
        hidden_dim: cfg.hidden_dim,
        bilinear: cfg.bilinear,
    };
    let mut model = DstModel::new(dims, cfg.mode, cfg.seed)?;
    let losses = train_dst_model(&mut model, turns, ontology, emb, cfg)?;
    Ok(DstTrained { model, losses })
}

/// Per-turn SGD on the mean cross-entropy of the turn's sampled candidates.
pub fn train_dst_model(
    model: &mut DstModel,
    turns: &[DialogueTurn],
    ontology: &Ontology,
    emb: &EmbeddingTable,
    cfg: &DstTrainConfig,
) -> Result<Vec<f64>> {
    if turns.is_empty() {
        return Err(Error::Data("empty DST training set".into()));
    }
    if ontology.num_slots() == 0 && ontology.requestable().is_empty() {
        return Err(Error::Config("ontology has no slots".into()));
    }
    for (i, t) in turns.iter().enumerate() {
        t.validate(ontology)
            .map_err(|e| Error::Data(format!("turn {i}: {e}")))?;
    }
    let mut shuffle = rng::derived(cfg.seed, Stream::Shuffle);
    let mut negatives = rng::derived(cfg.seed, Stream::Negatives);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, cfg.momentum, cfg.clip_norm);
    let mut order: Vec<usize> = (0..turns.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let (mut total, mut count) = (0.0, 0usize);
        for &i in &order {
            let turn = &turns[i];
            let plan = plan_turn(turn, ontology, cfg, &mut negatives)?;
            let mut tape = Tape::new();
            let b = tape.bind(&model.params);
            let terms = turn_terms(model, &mut tape, &b, emb, turn, &plan, ontology)?;
            if terms.is_empty() {
                continue;
            }
            let loss = tape.mean_n(&terms)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "DST loss {value} at epoch {epoch}, turn {i} (`{}`)",
                    turn.utterance.join(" ")
                )));
            }
            total += value * terms.len() as f64;
            count += terms.len();
            let grads = tape.backward(loss, &model.params)?;
            opt.step(&mut model.params, &grads);
        }
        let mean = if count == 0 { 0.0 } else { total / count as f64 };
        log::debug!("dst epoch {epoch}: loss {mean:.6}");
        losses.push(mean);
    }
    Ok(losses)
}
