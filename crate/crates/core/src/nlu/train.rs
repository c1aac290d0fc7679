use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{label_sets, NluExample};
use super::model::{NluDims, NluModel};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numeric::{Optimizer, OptimizerKind, Tape};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NluTrainConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    /// Weight of the intent cross-entropy term.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for NluTrainConfig {
    fn default() -> Self {
        NluTrainConfig {
            hidden_dim: 16,
            epochs: 20,
            lr: 0.05,
            optimizer: OptimizerKind::Sgd,
            momentum: 0.0,
            clip_norm: Some(5.0),
            lambda: 1.0,
            seed: 0,
        }
    }
}

/// A trained model and its mean loss per epoch.
#[derive(Clone, Debug)]
pub struct NluTrained {
    pub model: NluModel,
    pub losses: Vec<f64>,
}

/// Build a model over the labels seen in `data` and train it.
pub fn train_nlu(data: &[NluExample], emb: &EmbeddingTable, cfg: &NluTrainConfig) -> Result<NluTrained> {
    if data.is_empty() {
        return Err(Error::Data("empty NLU training set".into()));
    }
    let (tags, intents) = label_sets(data);
    let dims = NluDims {
        embed_dim: emb.dim(),
        hidden_dim: cfg.hidden_dim,
    };
    let mut model = NluModel::new(dims, tags, intents, cfg.seed)?;
    let losses = train_nlu_model(&mut model, data, emb, cfg)?;
    Ok(NluTrained { model, losses })
}

/// Per-example SGD on `crf_nll + λ·CE`, in a seeded shuffled order.
pub fn train_nlu_model(
    model: &mut NluModel,
    data: &[NluExample],
    emb: &EmbeddingTable,
    cfg: &NluTrainConfig,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Data("empty NLU training set".into()));
    }
    let mut encoded = Vec::with_capacity(data.len());
    for (i, ex) in data.iter().enumerate() {
        ex.validate().map_err(|e| Error::Data(format!("example {i}: {e}")))?;
        let tags = model
            .tag_ids(&ex.tags)
            .map_err(|e| Error::Data(format!("example {i}: {e}")))?;
        let intent = model
            .intent_id(&ex.intent)
            .map_err(|e| Error::Data(format!("example {i}: {e}")))?;
        encoded.push((tags, intent));
    }

    let mut rng = rng::derived(cfg.seed, Stream::Shuffle);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, cfg.momentum, cfg.clip_norm);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let layout = model.layout.clone();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let mut tape = Tape::new();
            let b = tape.bind(&model.params);
            let xs = model.embed(&mut tape, emb, &data[i].tokens)?;
            let (tags, intent) = &encoded[i];
            let loss = layout.loss(&mut tape, &b, &xs, tags, *intent, cfg.lambda)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "NLU loss {value} at epoch {epoch}, example {i} (`{}`)",
                    data[i].tokens.join(" ")
                )));
            }
            total += value;
            let grads = tape.backward(loss, &model.params)?;
            opt.step(&mut model.params, &grads);
        }
        let mean = total / data.len() as f64;
        log::debug!("nlu epoch {epoch}: loss {mean:.6}");
        losses.push(mean);
    }
    Ok(losses)
}
