//! Composing subword vectors into word vectors.
//!
//! Two schemes: an elementwise sum over each word's subwords, and a small
//! transformer encoder layer, shared by every word, whose outputs are
//! mean-pooled per word.

use rand::Rng;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numeric::lstm::uniform;
use crate::numeric::{Bound, ParamId, ParamSet, Tape, Tensor, Var};

/// The subword vectors belonging to one word.
#[derive(Clone, Debug, PartialEq)]
pub struct SubwordSpan {
    pub word_index: usize,
    pub subword_vectors: Vec<Tensor>,
}

pub trait SubwordSplitter {
    fn split(&self, word: &str) -> Vec<String>;
}

/// Fixed-size character chunks; the last chunk may be shorter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkSplitter {
    pub size: usize,
}

impl Default for ChunkSplitter {
    fn default() -> Self {
        ChunkSplitter { size: 3 }
    }
}

impl SubwordSplitter for ChunkSplitter {
    fn split(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        chars.chunks(self.size.max(1)).map(|c| c.iter().collect()).collect()
    }
}

/// Split every word and look its pieces up in a subword table.
pub fn spans_for_words<S: SubwordSplitter + ?Sized>(
    words: &[String],
    splitter: &S,
    subwords: &EmbeddingTable,
) -> Vec<SubwordSpan> {
    words
        .iter()
        .enumerate()
        .map(|(i, w)| SubwordSpan {
            word_index: i,
            subword_vectors: splitter.split(w).iter().map(|p| subwords.lookup(p)).collect(),
        })
        .collect()
}

/// Elementwise sum of each span's subword vectors.
pub fn aggregate_sum(spans: &[SubwordSpan]) -> Result<Vec<Tensor>> {
    if spans.is_empty() {
        return Err(Error::Domain("no spans to aggregate".into()));
    }
    spans
        .iter()
        .map(|span| {
            let first = span
                .subword_vectors
                .first()
                .ok_or_else(|| Error::Domain(format!("word {} has no subwords", span.word_index)))?;
            let mut acc = first.clone();
            for v in &span.subword_vectors[1..] {
                if v.shape() != acc.shape() {
                    return Err(Error::dim("aggregate_sum", acc.shape(), v.shape()));
                }
                acc.add_assign(v);
            }
            Ok(acc)
        })
        .collect()
}

/// Sinusoidal position code for position `pos` in a `dim`-wide space.
pub fn position_encoding(pos: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let angle = pos as f64 / rate;
            if i % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformerIds {
    pub query: (ParamId, ParamId),
    pub key: (ParamId, ParamId),
    pub value: (ParamId, ParamId),
    pub output: (ParamId, ParamId),
    pub norm1: (ParamId, ParamId),
    pub ffn_in: (ParamId, ParamId),
    pub ffn_out: (ParamId, ParamId),
    pub norm2: (ParamId, ParamId),
}

/// One post-norm transformer encoder layer applied to each word's subwords,
/// followed by mean pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerAggregator {
    pub params: ParamSet,
    pub ids: TransformerIds,
    dim: usize,
    heads: usize,
}

impl TransformerAggregator {
    pub fn new<R: Rng>(dim: usize, heads: usize, ffn_dim: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::Config(format!("{heads} heads do not divide dimension {dim}")));
        }
        let mut p = ParamSet::new();
        let b_in = 1.0 / (dim as f64).sqrt();
        let b_ffn = 1.0 / (ffn_dim as f64).sqrt();
        let linear = |p: &mut ParamSet, name: &str, rows: usize, cols: usize, bound: f64, rng: &mut R| {
            (
                p.add(format!("{name}.weight"), uniform(&[rows, cols], bound, rng)),
                p.add(format!("{name}.bias"), uniform(&[rows], bound, rng)),
            )
        };
        let query = linear(&mut p, "query", dim, dim, b_in, rng);
        let key = linear(&mut p, "key", dim, dim, b_in, rng);
        let value = linear(&mut p, "value", dim, dim, b_in, rng);
        let output = linear(&mut p, "output", dim, dim, b_in, rng);
        let ffn_in = linear(&mut p, "ffn_in", ffn_dim, dim, b_in, rng);
        let ffn_out = linear(&mut p, "ffn_out", dim, ffn_dim, b_ffn, rng);
        let norm1 = (
            p.add("norm1.gain", Tensor::filled(&[dim], 1.0)),
            p.add("norm1.bias", Tensor::zeros(&[dim])),
        );
        let norm2 = (
            p.add("norm2.gain", Tensor::filled(&[dim], 1.0)),
            p.add("norm2.bias", Tensor::zeros(&[dim])),
        );
        Ok(TransformerAggregator {
            params: p,
            ids: TransformerIds {
                query,
                key,
                value,
                output,
                norm1,
                ffn_in,
                ffn_out,
                norm2,
            },
            dim,
            heads,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    fn norm(&self, tape: &mut Tape, b: &Bound, x: Var, (gain, bias): (ParamId, ParamId)) -> Result<Var> {
        let n = tape.layer_norm(x);
        let scaled = tape.mul(n, b[gain])?;
        tape.add(scaled, b[bias])
    }

    /// Encode one word's subword vectors and mean-pool them.
    pub fn encode_span(&self, tape: &mut Tape, b: &Bound, subwords: &[Var]) -> Result<Var> {
        if subwords.is_empty() {
            return Err(Error::Domain("word has no subwords".into()));
        }
        let ids = &self.ids;
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut xs = Vec::with_capacity(subwords.len());
        for (pos, &v) in subwords.iter().enumerate() {
            if tape.value(v).len() != self.dim {
                return Err(Error::dim("aggregate_transformer", &[self.dim], tape.value(v).shape()));
            }
            let pe = tape.constant(Tensor::vector(position_encoding(pos, self.dim)));
            xs.push(tape.add(v, pe)?);
        }
        let mut q = Vec::new();
        let mut k = Vec::new();
        let mut v = Vec::new();
        for &x in &xs {
            q.push(tape.affine(x, b[ids.query.0], b[ids.query.1])?);
            k.push(tape.affine(x, b[ids.key.0], b[ids.key.1])?);
            v.push(tape.affine(x, b[ids.value.0], b[ids.value.1])?);
        }

        // Per-head keys and values, stacked for weighted pooling.
        let mut head_keys = Vec::with_capacity(self.heads);
        let mut head_values = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let ks: Vec<Var> = k.iter().map(|&kj| tape.slice(kj, h * dh, dh)).collect::<Result<_>>()?;
            let vs: Vec<Var> = v.iter().map(|&vj| tape.slice(vj, h * dh, dh)).collect::<Result<_>>()?;
            head_keys.push(tape.stack(&ks)?);
            head_values.push(tape.stack(&vs)?);
        }

        let mut outputs = Vec::with_capacity(xs.len());
        for (i, &x) in xs.iter().enumerate() {
            let mut heads_out = Vec::with_capacity(self.heads);
            for h in 0..self.heads {
                let qi = tape.slice(q[i], h * dh, dh)?;
                let scores = tape.matvec(head_keys[h], qi)?;
                let scores = tape.scale(scores, scale);
                let weights = tape.softmax(scores)?;
                heads_out.push(tape.tmatvec(head_values[h], weights)?);
            }
            let joined = tape.concat(&heads_out)?;
            let attn = tape.affine(joined, b[ids.output.0], b[ids.output.1])?;
            let res1 = tape.add(x, attn)?;
            let y = self.norm(tape, b, res1, ids.norm1)?;
            let hidden = tape.affine(y, b[ids.ffn_in.0], b[ids.ffn_in.1])?;
            let hidden = tape.relu(hidden);
            let ffn = tape.affine(hidden, b[ids.ffn_out.0], b[ids.ffn_out.1])?;
            let res2 = tape.add(y, ffn)?;
            outputs.push(self.norm(tape, b, res2, ids.norm2)?);
        }
        tape.mean_n(&outputs)
    }

    /// Word vectors for every span, recorded on `tape`.
    pub fn aggregate_on_tape(&self, tape: &mut Tape, b: &Bound, spans: &[SubwordSpan]) -> Result<Vec<Var>> {
        if spans.is_empty() {
            return Err(Error::Domain("no spans to aggregate".into()));
        }
        spans
            .iter()
            .map(|span| {
                let vars: Vec<Var> = span.subword_vectors.iter().map(|t| tape.constant(t.clone())).collect();
                self.encode_span(tape, b, &vars)
            })
            .collect()
    }

    pub fn aggregate(&self, spans: &[SubwordSpan]) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let vars = self.aggregate_on_tape(&mut tape, &b, spans)?;
        Ok(vars.into_iter().map(|v| tape.value(v).clone()).collect())
    }
}

/// Word-level table built by summing subword vectors over word boundaries.
pub fn word_table_by_sum<S: SubwordSplitter + ?Sized>(
    words: &[String],
    splitter: &S,
    subwords: &EmbeddingTable,
) -> Result<EmbeddingTable> {
    let spans = spans_for_words(words, splitter, subwords);
    let vectors = aggregate_sum(&spans)?;
    EmbeddingTable::from_entries(
        subwords.dim(),
        words.iter().zip(vectors).map(|(w, v)| (w.as_str(), v.into_data())),
    )
}
