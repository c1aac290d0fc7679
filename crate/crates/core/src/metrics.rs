//! Dialogue state tracking and NLU evaluation metrics.
//!
//! Every metric keeps its numerator and denominator. A zero denominator
//! yields a value of 0 with `undefined` set instead of an error.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel value for a goal slot the user has not constrained.
pub const NONE_VALUE: &str = "none";

/// Predicted or gold dialogue state at one turn.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefState {
    pub goal: BTreeMap<String, String>,
    pub requests: BTreeSet<String>,
}

impl BeliefState {
    pub fn goal_value(&self, slot: &str) -> &str {
        self.goal.get(slot).map(String::as_str).unwrap_or(NONE_VALUE)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub numerator: usize,
    pub denominator: usize,
    pub undefined: bool,
}

impl Ratio {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        if denominator == 0 {
            Ratio {
                value: 0.0,
                numerator,
                denominator,
                undefined: true,
            }
        } else {
            Ratio {
                value: numerator as f64 / denominator as f64,
                numerator,
                denominator,
                undefined: false,
            }
        }
    }
}

fn check_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Data(format!("{what}: {a} predictions for {b} references")));
    }
    Ok(())
}

/// Goal slots named by any gold state. Every turn is scored over all of
/// them, with a missing slot read as `none`.
fn goal_slots(gold: &[BeliefState]) -> BTreeSet<&str> {
    gold.iter().flat_map(|g| g.goal.keys().map(String::as_str)).collect()
}

/// Fraction of (turn, goal slot) pairs whose predicted value equals the gold
/// value.
pub fn slot_accuracy(pred: &[BeliefState], gold: &[BeliefState]) -> Result<Ratio> {
    check_len("slot accuracy", pred.len(), gold.len())?;
    let slots = goal_slots(gold);
    let mut correct = 0;
    for (p, g) in pred.iter().zip(gold) {
        correct += slots.iter().filter(|s| p.goal_value(s) == g.goal_value(s)).count();
    }
    Ok(Ratio::new(correct, slots.len() * gold.len()))
}

/// Fraction of turns where every goal slot matches. Undefined when the gold
/// states name no goal slot.
pub fn joint_goal_accuracy(pred: &[BeliefState], gold: &[BeliefState]) -> Result<Ratio> {
    check_len("joint goal accuracy", pred.len(), gold.len())?;
    let slots = goal_slots(gold);
    if slots.is_empty() {
        return Ok(Ratio::new(0, 0));
    }
    let correct = pred
        .iter()
        .zip(gold)
        .filter(|(p, g)| slots.iter().all(|s| p.goal_value(s) == g.goal_value(s)))
        .count();
    Ok(Ratio::new(correct, gold.len()))
}

/// Fraction of turns whose predicted request set equals the gold set.
pub fn request_accuracy(pred: &[BeliefState], gold: &[BeliefState]) -> Result<Ratio> {
    check_len("request accuracy", pred.len(), gold.len())?;
    let correct = pred.iter().zip(gold).filter(|(p, g)| p.requests == g.requests).count();
    Ok(Ratio::new(correct, gold.len()))
}

pub fn intent_accuracy<S: AsRef<str>>(pred: &[S], gold: &[S]) -> Result<Ratio> {
    check_len("intent accuracy", pred.len(), gold.len())?;
    let correct = pred.iter().zip(gold).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(Ratio::new(correct, gold.len()))
}

/// A labelled span `[start, end]` (inclusive).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chunk {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// Maximal BIO chunks. An `I-x` that does not continue an `x` chunk opens a
/// new one; tags without a `B-`/`I-` prefix are treated as outside.
pub fn bio_chunks<S: AsRef<str>>(tags: &[S]) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut open: Option<Chunk> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (prefix, label) = match tag.split_once('-') {
            Some((p @ ("B" | "I"), l)) if !l.is_empty() => (p, l),
            _ => ("O", ""),
        };
        let continues = prefix == "I" && open.as_ref().is_some_and(|c| c.label == label);
        if continues {
            open.as_mut().expect("checked").end = i;
            continue;
        }
        if let Some(c) = open.take() {
            chunks.push(c);
        }
        if prefix != "O" {
            open = Some(Chunk {
                label: label.to_string(),
                start: i,
                end: i,
            });
        }
    }
    chunks.extend(open);
    chunks
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub value: f64,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
    pub undefined: bool,
}

/// Micro-averaged exact-match chunk F1 over aligned tag sequences.
pub fn bio_f1<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<F1Report> {
    check_len("bio f1", pred.len(), gold.len())?;
    let (mut correct, mut n_pred, mut n_gold) = (0, 0, 0);
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Data(format!(
                "bio f1: sequence {i} has {} predicted and {} gold tags",
                p.len(),
                g.len()
            )));
        }
        let pc: BTreeSet<Chunk> = bio_chunks(p).into_iter().collect();
        let gc: BTreeSet<Chunk> = bio_chunks(g).into_iter().collect();
        correct += pc.intersection(&gc).count();
        n_pred += pc.len();
        n_gold += gc.len();
    }
    let precision = if n_pred > 0 {
        correct as f64 / n_pred as f64
    } else {
        0.0
    };
    let recall = if n_gold > 0 {
        correct as f64 / n_gold as f64
    } else {
        0.0
    };
    let value = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(F1Report {
        precision,
        recall,
        value,
        correct,
        predicted: n_pred,
        gold: n_gold,
        undefined: n_pred == 0 && n_gold == 0,
    })
}

/// All metrics of one evaluation run; absent entries do not apply to the task.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_acc: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_goal_acc: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_acc: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent_acc: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_f1: Option<F1Report>,
}

impl MetricsReport {
    pub fn dst(pred: &[BeliefState], gold: &[BeliefState]) -> Result<Self> {
        Ok(MetricsReport {
            slot_acc: Some(slot_accuracy(pred, gold)?),
            joint_goal_acc: Some(joint_goal_accuracy(pred, gold)?),
            request_acc: Some(request_accuracy(pred, gold)?),
            ..Default::default()
        })
    }

    pub fn nlu<S: AsRef<str>>(
        pred_intents: &[S],
        gold_intents: &[S],
        pred_tags: &[Vec<S>],
        gold_tags: &[Vec<S>],
    ) -> Result<Self> {
        Ok(MetricsReport {
            intent_acc: Some(intent_accuracy(pred_intents, gold_intents)?),
            slot_f1: Some(bio_f1(pred_tags, gold_tags)?),
            ..Default::default()
        })
    }
}
