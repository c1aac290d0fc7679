use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::crf::{crf_nll_on_tape, crf_viterbi, CrfScores, TransitionMask};
use crate::codeswitch::AttentionRecord;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numeric::lstm::uniform;
use crate::numeric::{attention_pool, bilstm_encode, BiLstmParams, Bound, ParamId, ParamSet, Tape, Tensor, Var};
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NluDims {
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

/// Parameter handles and the forward computation of the joint model.
#[derive(Clone, Debug, PartialEq)]
pub struct NluLayout {
    pub dims: NluDims,
    pub num_tags: usize,
    pub num_intents: usize,
    pub bilstm: BiLstmParams,
    pub emission_weight: ParamId,
    pub emission_bias: ParamId,
    pub transitions: ParamId,
    pub start: ParamId,
    pub stop: ParamId,
    pub intent_attention: ParamId,
    pub intent_weight: ParamId,
    pub intent_bias: ParamId,
}

/// Everything computed by one forward pass.
pub struct NluForward {
    /// `[N × tags]`
    pub emissions: Var,
    pub intent_logits: Var,
    pub alphas: Var,
}

impl NluLayout {
    fn build(params: &mut ParamSet, dims: NluDims, num_tags: usize, num_intents: usize, seed: u64) -> Self {
        let mut rng = rng::derived(seed, Stream::Init);
        let h2 = 2 * dims.hidden_dim;
        let bound = 1.0 / (h2 as f64).sqrt();
        let bilstm = BiLstmParams::new(params, "encoder", dims.embed_dim, dims.hidden_dim, &mut rng);
        NluLayout {
            dims,
            num_tags,
            num_intents,
            bilstm,
            emission_weight: params.add("emission.weight", uniform(&[num_tags, h2], bound, &mut rng)),
            emission_bias: params.add("emission.bias", Tensor::zeros(&[num_tags])),
            transitions: params.add("crf.transitions", Tensor::zeros(&[num_tags, num_tags])),
            start: params.add("crf.start", Tensor::zeros(&[num_tags])),
            stop: params.add("crf.stop", Tensor::zeros(&[num_tags])),
            intent_attention: params.add("intent.attention", uniform(&[h2], bound, &mut rng)),
            intent_weight: params.add("intent.weight", uniform(&[num_intents, h2], bound, &mut rng)),
            intent_bias: params.add("intent.bias", Tensor::zeros(&[num_intents])),
        }
    }

    pub fn forward(&self, tape: &mut Tape, b: &Bound, xs: &[Var]) -> Result<NluForward> {
        let hs = bilstm_encode(tape, b, &self.bilstm, xs)?;
        let rows = hs
            .iter()
            .map(|&h| tape.affine(h, b[self.emission_weight], b[self.emission_bias]))
            .collect::<Result<Vec<_>>>()?;
        let emissions = tape.stack(&rows)?;
        let (pooled, alphas) = attention_pool(tape, &hs, b[self.intent_attention])?;
        let intent_logits = tape.affine(pooled, b[self.intent_weight], b[self.intent_bias])?;
        Ok(NluForward {
            emissions,
            intent_logits,
            alphas,
        })
    }

    /// `crf_nll + λ·CE(intent)`. With `λ = 0` the intent head is not recorded.
    pub fn loss(
        &self,
        tape: &mut Tape,
        b: &Bound,
        xs: &[Var],
        tags: &[usize],
        intent: usize,
        lambda: f64,
    ) -> Result<Var> {
        let hs = bilstm_encode(tape, b, &self.bilstm, xs)?;
        let rows = hs
            .iter()
            .map(|&h| tape.affine(h, b[self.emission_weight], b[self.emission_bias]))
            .collect::<Result<Vec<_>>>()?;
        let emissions = tape.stack(&rows)?;
        let nll = crf_nll_on_tape(tape, emissions, b[self.transitions], b[self.start], b[self.stop], tags)?;
        if lambda == 0.0 {
            return Ok(nll);
        }
        if intent >= self.num_intents {
            return Err(Error::Data(format!(
                "intent index {intent} outside {} intents",
                self.num_intents
            )));
        }
        let (pooled, _) = attention_pool(tape, &hs, b[self.intent_attention])?;
        let logits = tape.affine(pooled, b[self.intent_weight], b[self.intent_bias])?;
        let logp = tape.log_softmax(logits)?;
        let picked = tape.pick(logp, intent)?;
        let ce = tape.scale(picked, -lambda);
        tape.add(nll, ce)
    }
}

/// Per-utterance prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct NluPrediction {
    pub tags: Vec<String>,
    pub intent: String,
    pub intent_probs: Vec<f64>,
    pub attention: Vec<f64>,
}

/// Joint BiLSTM-CRF slot tagger and attention intent classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct NluModel {
    pub params: ParamSet,
    pub layout: NluLayout,
    tags: Vec<String>,
    intents: Vec<String>,
    tag_index: HashMap<String, usize>,
    intent_index: HashMap<String, usize>,
    seed: u64,
}

/// Serializable form of an [`NluModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NluCheckpoint {
    pub dims: NluDims,
    pub seed: u64,
    pub tags: Vec<String>,
    pub intents: Vec<String>,
    pub params: ParamSet,
}

impl NluModel {
    pub fn new(dims: NluDims, tags: Vec<String>, intents: Vec<String>, seed: u64) -> Result<Self> {
        if dims.embed_dim == 0 || dims.hidden_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if tags.is_empty() || intents.is_empty() {
            return Err(Error::Config("tag and intent inventories must be non-empty".into()));
        }
        let index = |v: &[String]| -> Result<HashMap<String, usize>> {
            let m: HashMap<String, usize> = v.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
            if m.len() != v.len() {
                return Err(Error::Config("duplicate label in inventory".into()));
            }
            Ok(m)
        };
        let tag_index = index(&tags)?;
        let intent_index = index(&intents)?;
        let mut params = ParamSet::new();
        let layout = NluLayout::build(&mut params, dims, tags.len(), intents.len(), seed);
        Ok(NluModel {
            params,
            layout,
            tags,
            intents,
            tag_index,
            intent_index,
            seed,
        })
    }

    pub fn dims(&self) -> NluDims {
        self.layout.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn tag_ids(&self, tags: &[String]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.tag_index
                    .get(t)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("tag `{t}` is not in the model's tag set")))
            })
            .collect()
    }

    pub fn intent_id(&self, intent: &str) -> Result<usize> {
        self.intent_index
            .get(intent)
            .copied()
            .ok_or_else(|| Error::Data(format!("intent `{intent}` is not in the model's intent set")))
    }

    /// Frozen embedding lookups recorded as tape constants.
    pub fn embed(&self, tape: &mut Tape, emb: &EmbeddingTable, tokens: &[String]) -> Result<Vec<Var>> {
        if emb.dim() != self.layout.dims.embed_dim {
            return Err(Error::dim(
                "embedding table",
                &[self.layout.dims.embed_dim],
                &[emb.dim()],
            ));
        }
        if tokens.is_empty() {
            return Err(Error::Domain("cannot encode an empty utterance".into()));
        }
        Ok(tokens.iter().map(|t| tape.constant(emb.lookup(t))).collect())
    }

    fn run(&self, emb: &EmbeddingTable, tokens: &[String]) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let xs = self.embed(&mut tape, emb, tokens)?;
        let f = self.layout.forward(&mut tape, &b, &xs)?;
        Ok((
            tape.value(f.emissions).clone(),
            tape.value(f.intent_logits).data().to_vec(),
            tape.value(f.alphas).data().to_vec(),
        ))
    }

    /// `[N × tags]` emission scores.
    pub fn emissions(&self, emb: &EmbeddingTable, tokens: &[String]) -> Result<Tensor> {
        Ok(self.run(emb, tokens)?.0)
    }

    pub fn intent_logits(&self, emb: &EmbeddingTable, tokens: &[String]) -> Result<Vec<f64>> {
        Ok(self.run(emb, tokens)?.1)
    }

    /// Probability of every intent, in [`NluModel::intents`] order.
    pub fn predict_intent(&self, emb: &EmbeddingTable, tokens: &[String]) -> Result<Vec<f64>> {
        crate::numeric::ops::softmax(&self.run(emb, tokens)?.1)
    }

    /// Intent attention weights over the tokens.
    pub fn attention(&self, emb: &EmbeddingTable, tokens: &[String]) -> Result<Vec<f64>> {
        Ok(self.run(emb, tokens)?.2)
    }

    pub fn crf(&self) -> CrfScores<'_> {
        CrfScores::new(
            self.params.get(self.layout.transitions),
            self.params.get(self.layout.start),
            self.params.get(self.layout.stop),
        )
    }

    pub fn predict(
        &self,
        emb: &EmbeddingTable,
        tokens: &[String],
        mask: Option<&TransitionMask>,
    ) -> Result<NluPrediction> {
        let (em, logits, attention) = self.run(emb, tokens)?;
        let path = crf_viterbi(&em, &self.crf(), mask)?;
        let intent_probs = crate::numeric::ops::softmax(&logits)?;
        Ok(NluPrediction {
            tags: path.into_iter().map(|i| self.tags[i].clone()).collect(),
            intent: self.intents[crate::numeric::argmax(&logits)].clone(),
            intent_probs,
            attention,
        })
    }

    pub fn to_checkpoint(&self) -> NluCheckpoint {
        NluCheckpoint {
            dims: self.layout.dims,
            seed: self.seed,
            tags: self.tags.clone(),
            intents: self.intents.clone(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: &NluCheckpoint) -> Result<Self> {
        let mut model = NluModel::new(ck.dims, ck.tags.clone(), ck.intents.clone(), ck.seed)?;
        if ck.params.len() != model.params.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} parameter blocks, model needs {}",
                ck.params.len(),
                model.params.len()
            )));
        }
        model.params.copy_from(&ck.params)?;
        Ok(model)
    }
}

/// Intent attention over every example, with ids `u{i}`.
pub fn attention_records(
    model: &NluModel,
    emb: &EmbeddingTable,
    examples: &[super::NluExample],
) -> Result<Vec<AttentionRecord>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            Ok(AttentionRecord {
                utterance_id: format!("u{i}"),
                tokens: ex.tokens.clone(),
                scores: model.attention(emb, &ex.tokens)?,
            })
        })
        .collect()
}
