//! Linear-chain CRF: log partition, gold-path likelihood, marginals and
//! Viterbi decoding. All scores are in log space.

use crate::error::{Error, Result};
use crate::numeric::ops::log_sum_exp;
use crate::numeric::{CustomOp, Tape, Tensor, Var};

/// Borrowed CRF scores: `transitions[i, j]` scores tag `i` followed by `j`.
#[derive(Clone, Copy, Debug)]
pub struct CrfScores<'a> {
    pub transitions: &'a Tensor,
    pub start: &'a Tensor,
    pub stop: &'a Tensor,
}

impl<'a> CrfScores<'a> {
    pub fn new(transitions: &'a Tensor, start: &'a Tensor, stop: &'a Tensor) -> Self {
        CrfScores {
            transitions,
            start,
            stop,
        }
    }

    fn check(&self, emissions: &Tensor) -> Result<(usize, usize)> {
        if emissions.rank() != 2 {
            return Err(Error::Domain(format!(
                "emissions must be a matrix, got shape {:?}",
                emissions.shape()
            )));
        }
        let (n, k) = (emissions.rows(), emissions.cols());
        if self.transitions.shape() != [k, k] {
            return Err(Error::dim(
                "crf transitions",
                emissions.shape(),
                self.transitions.shape(),
            ));
        }
        if self.start.shape() != [k] || self.stop.shape() != [k] {
            return Err(Error::dim("crf start/stop", emissions.shape(), self.start.shape()));
        }
        Ok((n, k))
    }

    fn t(&self, from: usize, to: usize) -> f64 {
        self.transitions.get(from, to)
    }
}

fn check_tags(tags: &[usize], n: usize, k: usize) -> Result<()> {
    if tags.len() != n {
        return Err(Error::dim("crf tags", &[n], &[tags.len()]));
    }
    if let Some(&bad) = tags.iter().find(|&&t| t >= k) {
        return Err(Error::Data(format!("tag index {bad} outside a {k}-tag vocabulary")));
    }
    Ok(())
}

/// Forward log-potentials `alpha[t][j]`.
fn forward(emissions: &Tensor, crf: &CrfScores, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut alpha = Vec::with_capacity(n);
    alpha.push(
        (0..k)
            .map(|j| crf.start.data()[j] + emissions.get(0, j))
            .collect::<Vec<_>>(),
    );
    let mut buf = vec![0.0; k];
    for t in 1..n {
        let prev = &alpha[t - 1];
        let row = (0..k)
            .map(|j| {
                for i in 0..k {
                    buf[i] = prev[i] + crf.t(i, j);
                }
                log_sum_exp(&buf) + emissions.get(t, j)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// Backward log-potentials `beta[t][i]`, including the stop score.
fn backward(emissions: &Tensor, crf: &CrfScores, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut beta = vec![vec![0.0; k]; n];
    beta[n - 1] = crf.stop.data().to_vec();
    let mut buf = vec![0.0; k];
    for t in (0..n - 1).rev() {
        for i in 0..k {
            for j in 0..k {
                buf[j] = crf.t(i, j) + emissions.get(t + 1, j) + beta[t + 1][j];
            }
            beta[t][i] = log_sum_exp(&buf);
        }
    }
    beta
}

/// `log Σ_paths exp(score(path))` by the forward algorithm.
pub fn crf_log_partition(emissions: &Tensor, crf: &CrfScores) -> Result<f64> {
    let (n, k) = crf.check(emissions)?;
    let alpha = forward(emissions, crf, n, k);
    let last: Vec<f64> = (0..k).map(|j| alpha[n - 1][j] + crf.stop.data()[j]).collect();
    Ok(log_sum_exp(&last))
}

/// Unnormalised score of one tag path.
pub fn crf_path_score(emissions: &Tensor, crf: &CrfScores, tags: &[usize]) -> Result<f64> {
    let (n, k) = crf.check(emissions)?;
    check_tags(tags, n, k)?;
    let mut s = crf.start.data()[tags[0]] + crf.stop.data()[tags[n - 1]];
    for (t, &tag) in tags.iter().enumerate() {
        s += emissions.get(t, tag);
        if t > 0 {
            s += crf.t(tags[t - 1], tag);
        }
    }
    Ok(s)
}

/// Negative log-likelihood of the gold path; never negative.
pub fn crf_nll(emissions: &Tensor, crf: &CrfScores, gold: &[usize]) -> Result<f64> {
    let score = crf_path_score(emissions, crf, gold)?;
    let log_z = crf_log_partition(emissions, crf)?;
    Ok((log_z - score).max(0.0))
}

/// Posterior tag and transition marginals.
#[derive(Clone, Debug)]
pub struct CrfMarginals {
    pub log_partition: f64,
    /// `[N×K]` probabilities of each tag at each position.
    pub nodes: Tensor,
    /// `[K×K]` expected transition counts summed over positions.
    pub edges: Tensor,
}

pub fn crf_marginals(emissions: &Tensor, crf: &CrfScores) -> Result<CrfMarginals> {
    let (n, k) = crf.check(emissions)?;
    let alpha = forward(emissions, crf, n, k);
    let beta = backward(emissions, crf, n, k);
    let last: Vec<f64> = (0..k).map(|j| alpha[n - 1][j] + crf.stop.data()[j]).collect();
    let log_z = log_sum_exp(&last);

    let mut nodes = vec![0.0; n * k];
    for t in 0..n {
        for j in 0..k {
            nodes[t * k + j] = (alpha[t][j] + beta[t][j] - log_z).exp();
        }
    }
    let mut edges = vec![0.0; k * k];
    for t in 1..n {
        for i in 0..k {
            for j in 0..k {
                edges[i * k + j] += (alpha[t - 1][i] + crf.t(i, j) + emissions.get(t, j) + beta[t][j] - log_z).exp();
            }
        }
    }
    Ok(CrfMarginals {
        log_partition: log_z,
        nodes: Tensor::matrix(n, k, nodes)?,
        edges: Tensor::matrix(k, k, edges)?,
    })
}

/// Allowed transitions for constrained decoding.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMask {
    pub allowed: Vec<bool>,
    pub start_allowed: Vec<bool>,
}

impl TransitionMask {
    /// BIO well-formedness: `I-x` may only follow `B-x` or `I-x`, and may not start a sequence.
    pub fn bio(tags: &[String]) -> Self {
        let k = tags.len();
        let inside = |t: &str| t.strip_prefix("I-").map(str::to_string);
        let label = |t: &str| t.split_once('-').map(|(_, l)| l.to_string());
        let mut allowed = vec![true; k * k];
        let mut start_allowed = vec![true; k];
        for (j, to) in tags.iter().enumerate() {
            if let Some(l) = inside(to) {
                start_allowed[j] = false;
                for (i, from) in tags.iter().enumerate() {
                    allowed[i * k + j] = label(from).as_deref() == Some(l.as_str()) && from != "O";
                }
            }
        }
        TransitionMask { allowed, start_allowed }
    }
}

/// Highest-scoring tag path. Ties go to the lowest tag index.
pub fn crf_viterbi(emissions: &Tensor, crf: &CrfScores, mask: Option<&TransitionMask>) -> Result<Vec<usize>> {
    let (n, k) = crf.check(emissions)?;
    let ok = |i: usize, j: usize| mask.is_none_or(|m| m.allowed[i * k + j]);
    let start_ok = |j: usize| mask.is_none_or(|m| m.start_allowed[j]);

    let mut score: Vec<f64> = (0..k)
        .map(|j| {
            if start_ok(j) {
                crf.start.data()[j] + emissions.get(0, j)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut back = vec![vec![0usize; k]; n];
    for t in 1..n {
        let mut next = vec![f64::NEG_INFINITY; k];
        for j in 0..k {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for i in 0..k {
                let s = if ok(i, j) {
                    score[i] + crf.t(i, j)
                } else {
                    f64::NEG_INFINITY
                };
                if s > best_score {
                    best_score = s;
                    best = i;
                }
            }
            back[t][j] = best;
            next[j] = best_score + emissions.get(t, j);
        }
        score = next;
    }
    let final_scores: Vec<f64> = (0..k).map(|j| score[j] + crf.stop.data()[j]).collect();
    let mut tag = crate::numeric::argmax(&final_scores);
    let mut path = vec![0; n];
    for t in (0..n).rev() {
        path[t] = tag;
        tag = back[t][tag];
    }
    Ok(path)
}

/// Tape node for the CRF negative log-likelihood.
/// Inputs: emissions `[N×K]`, transitions `[K×K]`, start `[K]`, stop `[K]`.
struct CrfNllOp {
    gold: Vec<usize>,
}

impl CustomOp for CrfNllOp {
    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
        let (em, tr, st, sp) = (inputs[0], inputs[1], inputs[2], inputs[3]);
        let crf = CrfScores::new(tr, st, sp);
        let m = crf_marginals(em, &crf).expect("shapes validated when recorded");
        let g = grad.item();
        let (n, k) = (em.rows(), em.cols());

        let mut d_em = m.nodes.clone();
        for (t, &tag) in self.gold.iter().enumerate() {
            d_em.data_mut()[t * k + tag] -= 1.0;
        }
        let mut d_tr = m.edges.clone();
        for w in self.gold.windows(2) {
            d_tr.data_mut()[w[0] * k + w[1]] -= 1.0;
        }
        let mut d_st = Tensor::vector(m.nodes.row(0).to_vec());
        d_st.data_mut()[self.gold[0]] -= 1.0;
        let mut d_sp = Tensor::vector(m.nodes.row(n - 1).to_vec());
        d_sp.data_mut()[self.gold[n - 1]] -= 1.0;
        [d_em, d_tr, d_st, d_sp].into_iter().map(|t| t.map(|v| v * g)).collect()
    }
}

/// Record `crf_nll` on a tape.
pub fn crf_nll_on_tape(
    tape: &mut Tape,
    emissions: Var,
    transitions: Var,
    start: Var,
    stop: Var,
    gold: &[usize],
) -> Result<Var> {
    let value = {
        let crf = CrfScores::new(tape.value(transitions), tape.value(start), tape.value(stop));
        let em = tape.value(emissions);
        let score = crf_path_score(em, &crf, gold)?;
        crf_log_partition(em, &crf)? - score
    };
    Ok(tape.custom(
        &[emissions, transitions, start, stop],
        Tensor::scalar(value),
        Box::new(CrfNllOp { gold: gold.to_vec() }),
    ))
}
