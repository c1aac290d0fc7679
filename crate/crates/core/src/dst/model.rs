use serde::{Deserialize, Serialize};

use super::data::SystemActs;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numeric::lstm::uniform;
use crate::numeric::{attention_pool, bilstm_encode, BiLstmParams, Bound, ParamId, ParamSet, Tape, Tensor, Var};
use crate::rng::{self, Stream};

/// Index of the match logit; the no-match logit is at 1.
pub const MATCH: usize = 0;
pub const NO_MATCH: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DstDims {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Add the bilinear term `Gᵀ·U·R` to the match logit.
    pub bilinear: bool,
}

/// How slot values compete at tracking time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Independent match/no-match decision per candidate.
    #[default]
    Binary,
    /// Softmax over a slot's values plus `none`.
    SlotSoftmax,
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(ScoringMode::Binary),
            "slot_softmax" | "slot-softmax" => Ok(ScoringMode::SlotSoftmax),
            other => Err(Error::Config(format!("unknown scoring mode `{other}`"))),
        }
    }
}

/// A slot paired with a value (or with nothing, for request candidates).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotCandidate {
    pub slot: String,
    pub value: Vec<String>,
}

impl SlotCandidate {
    pub fn new(slot: &str, value: &str) -> Self {
        SlotCandidate {
            slot: slot.to_string(),
            value: value.split_whitespace().map(String::from).collect(),
        }
    }

    pub fn request(slot: &str) -> Self {
        SlotCandidate {
            slot: slot.to_string(),
            value: Vec::new(),
        }
    }
}

/// Tokens of a slot name; underscores count as spaces.
fn name_tokens(name: &str) -> impl Iterator<Item = &str> {
    name.split(|c: char| c.is_whitespace() || c == '_')
        .filter(|t| !t.is_empty())
}

fn mean_of(emb: &EmbeddingTable, tokens: &[&str]) -> Tensor {
    let mut out = vec![0.0; emb.dim()];
    if tokens.is_empty() {
        return Tensor::vector(out);
    }
    for t in tokens {
        for (o, v) in out.iter_mut().zip(emb.lookup_slice(t)) {
            *o += v;
        }
    }
    let n = tokens.len() as f64;
    Tensor::vector(out.into_iter().map(|v| v / n).collect())
}

/// Mean embedding of the slot-name tokens and the value tokens.
pub fn candidate_embedding(emb: &EmbeddingTable, cand: &SlotCandidate) -> Tensor {
    let mut toks: Vec<&str> = name_tokens(&cand.slot).collect();
    toks.extend(cand.value.iter().map(String::as_str));
    mean_of(emb, &toks)
}

/// `E(r_t)` and `E(s_t) + E(v_t)`; absent acts give zero vectors.
pub fn act_embeddings(emb: &EmbeddingTable, acts: &SystemActs) -> (Tensor, Tensor) {
    let request = match &acts.request {
        Some(r) => mean_of(emb, &name_tokens(r).collect::<Vec<_>>()),
        None => Tensor::zeros(&[emb.dim()]),
    };
    let confirm = match &acts.confirm {
        Some((s, v)) => {
            let es = mean_of(emb, &name_tokens(s).collect::<Vec<_>>());
            let ev = mean_of(emb, &v.split_whitespace().collect::<Vec<_>>());
            Tensor::vector(es.data().iter().zip(ev.data()).map(|(a, b)| a + b).collect())
        }
        None => Tensor::zeros(&[emb.dim()]),
    };
    (request, confirm)
}

/// Parameter handles and the forward computation of the tracker.
#[derive(Clone, Debug, PartialEq)]
pub struct DstLayout {
    pub dims: DstDims,
    pub bilstm: BiLstmParams,
    pub attention: ParamId,
    pub w1: ParamId,
    pub w2: ParamId,
    /// `U` in the optional bilinear match term, `[embed × 2·hidden]`.
    pub bilinear: Option<ParamId>,
    pub fc_weight: ParamId,
    pub fc_bias: ParamId,
}

/// Per-turn act projections `W1·E(r_t)` and `W2·(E(s_t)+E(v_t))`.
#[derive(Clone, Copy, Debug)]
pub struct ActVars {
    pub request: Var,
    pub confirm: Var,
}

impl DstLayout {
    fn build(params: &mut ParamSet, dims: DstDims, seed: u64) -> Self {
        let mut rng = rng::derived(seed, Stream::Init);
        let (d, h2) = (dims.embed_dim, 2 * dims.hidden_dim);
        let bilstm = BiLstmParams::new(params, "encoder", d, dims.hidden_dim, &mut rng);
        let bd = 1.0 / (d as f64).sqrt();
        let bfc = 1.0 / ((h2 + d) as f64).sqrt();
        let attention = params.add("attention", uniform(&[h2], 1.0 / (h2 as f64).sqrt(), &mut rng));
        let w1 = params.add("gate.w1", uniform(&[d, d], bd, &mut rng));
        let w2 = params.add("gate.w2", uniform(&[d, d], bd, &mut rng));
        let fc_weight = params.add("fc.weight", uniform(&[2, h2 + d], bfc, &mut rng));
        let fc_bias = params.add("fc.bias", Tensor::zeros(&[2]));
        let bilinear = dims
            .bilinear
            .then(|| params.add("fc.bilinear", uniform(&[d, h2], bfc, &mut rng)));
        DstLayout {
            dims,
            bilstm,
            attention,
            w1,
            w2,
            bilinear,
            fc_weight,
            fc_bias,
        }
    }

    /// `(R, α)` for the embedded utterance.
    pub fn encode(&self, tape: &mut Tape, b: &Bound, xs: &[Var]) -> Result<(Var, Var)> {
        let hs = bilstm_encode(tape, b, &self.bilstm, xs)?;
        attention_pool(tape, &hs, b[self.attention])
    }

    pub fn acts(&self, tape: &mut Tape, b: &Bound, request: Var, confirm: Var) -> Result<ActVars> {
        Ok(ActVars {
            request: tape.matvec(b[self.w1], request)?,
            confirm: tape.matvec(b[self.w2], confirm)?,
        })
    }

    /// `G = E(s_c) + σ(E(s_c) ⊙ W1·E(r_t)) + σ(E(s_c) ⊙ W2·(E(s_t)+E(v_t)))`.
    pub fn gate(&self, tape: &mut Tape, cand: Var, acts: ActVars) -> Result<Var> {
        let r = tape.mul(cand, acts.request)?;
        let g2 = tape.sigmoid(r);
        let c = tape.mul(cand, acts.confirm)?;
        let g3 = tape.sigmoid(c);
        tape.add_n(&[cand, g2, g3])
    }

    /// Logits `[match, no-match]`: `FC_s·concat(R, G)`, plus `Gᵀ·U·R` on the
    /// match logit when the bilinear term is enabled.
    pub fn logits(&self, tape: &mut Tape, b: &Bound, r: Var, g: Var) -> Result<Var> {
        let x = tape.concat(&[r, g])?;
        let linear = tape.affine(x, b[self.fc_weight], b[self.fc_bias])?;
        let Some(u) = self.bilinear else {
            return Ok(linear);
        };
        let ur = tape.matvec(b[u], r)?;
        let m = tape.dot(g, ur)?;
        let zero = tape.constant(Tensor::scalar(0.0));
        let extra = tape.concat(&[m, zero])?;
        tape.add(linear, extra)
    }
}

/// Dialogue state tracker: BiLSTM attention encoder, context gate and a
/// match/no-match head.
#[derive(Clone, Debug, PartialEq)]
pub struct DstModel {
    pub params: ParamSet,
    pub layout: DstLayout,
    pub mode: ScoringMode,
    seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DstCheckpoint {
    pub dims: DstDims,
    pub seed: u64,
    pub mode: ScoringMode,
    pub params: ParamSet,
}

impl DstModel {
    pub fn new(dims: DstDims, mode: ScoringMode, seed: u64) -> Result<Self> {
        if dims.embed_dim == 0 || dims.hidden_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        let mut params = ParamSet::new();
        let layout = DstLayout::build(&mut params, dims, seed);
        Ok(DstModel {
            params,
            layout,
            mode,
            seed,
        })
    }

    pub fn dims(&self) -> DstDims {
        self.layout.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_table(&self, emb: &EmbeddingTable) -> Result<()> {
        if emb.dim() != self.layout.dims.embed_dim {
            return Err(Error::dim(
                "embedding table",
                &[self.layout.dims.embed_dim],
                &[emb.dim()],
            ));
        }
        Ok(())
    }

    pub fn embed(&self, tape: &mut Tape, emb: &EmbeddingTable, tokens: &[String]) -> Result<Vec<Var>> {
        self.check_table(emb)?;
        if tokens.is_empty() {
            return Err(Error::Domain("cannot encode an empty utterance".into()));
        }
        Ok(tokens.iter().map(|t| tape.constant(emb.lookup(t))).collect())
    }

    /// Utterance representation `R` and attention weights `α`.
    pub fn encode_utterance(&self, emb: &EmbeddingTable, tokens: &[String]) -> Result<(Tensor, Vec<f64>)> {
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let xs = self.embed(&mut tape, emb, tokens)?;
        let (r, a) = self.layout.encode(&mut tape, &b, &xs)?;
        Ok((tape.value(r).clone(), tape.value(a).data().to_vec()))
    }

    pub fn context_gate(&self, emb: &EmbeddingTable, cand: &SlotCandidate, acts: &SystemActs) -> Result<Tensor> {
        self.check_table(emb)?;
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let (r, c) = act_embeddings(emb, acts);
        let (r, c) = (tape.constant(r), tape.constant(c));
        let av = self.layout.acts(&mut tape, &b, r, c)?;
        let e = tape.constant(candidate_embedding(emb, cand));
        let g = self.layout.gate(&mut tape, e, av)?;
        Ok(tape.value(g).clone())
    }

    /// `(p_match, p_no_match)`.
    pub fn score_candidate(&self, r: &Tensor, g: &Tensor) -> Result<(f64, f64)> {
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let (rv, gv) = (tape.constant(r.clone()), tape.constant(g.clone()));
        let logits = self.layout.logits(&mut tape, &b, rv, gv)?;
        let p = crate::numeric::ops::softmax(tape.value(logits).data())?;
        Ok((p[MATCH], p[NO_MATCH]))
    }

    /// Match probability of every candidate for one turn, sharing the
    /// utterance encoding and act projections.
    pub fn match_probs(
        &self,
        emb: &EmbeddingTable,
        tokens: &[String],
        acts: &SystemActs,
        cands: &[SlotCandidate],
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let xs = self.embed(&mut tape, emb, tokens)?;
        let (r, _) = self.layout.encode(&mut tape, &b, &xs)?;
        let (er, ec) = act_embeddings(emb, acts);
        let (er, ec) = (tape.constant(er), tape.constant(ec));
        let av = self.layout.acts(&mut tape, &b, er, ec)?;
        cands
            .iter()
            .map(|c| {
                let e = tape.constant(candidate_embedding(emb, c));
                let g = self.layout.gate(&mut tape, e, av)?;
                let logits = self.layout.logits(&mut tape, &b, r, g)?;
                Ok(crate::numeric::ops::softmax(tape.value(logits).data())?[MATCH])
            })
            .collect()
    }

    pub fn to_checkpoint(&self) -> DstCheckpoint {
        DstCheckpoint {
            dims: self.layout.dims,
            seed: self.seed,
            mode: self.mode,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: &DstCheckpoint) -> Result<Self> {
        let mut model = DstModel::new(ck.dims, ck.mode, ck.seed)?;
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
