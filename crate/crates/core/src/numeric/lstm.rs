use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::params::{ParamId, ParamSet};
use crate::numeric::tape::{Bound, Tape, Var};
use crate::numeric::Tensor;

/// `U(-bound, bound)` tensor.
pub fn uniform<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// One LSTM cell. Gate rows are stacked as input, forget, candidate, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_weights: ParamId,
    pub hidden_weights: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmParams {
    pub fn new<R: Rng>(params: &mut ParamSet, prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let gates = 4 * hidden_dim;
        LstmParams {
            input_weights: params.add(format!("{prefix}.w_input"), uniform(&[gates, input_dim], bound, rng)),
            hidden_weights: params.add(format!("{prefix}.w_hidden"), uniform(&[gates, hidden_dim], bound, rng)),
            bias: params.add(format!("{prefix}.bias"), uniform(&[gates], bound, rng)),
            input_dim,
            hidden_dim,
        }
    }
}

/// Single LSTM update `(h, c) -> (h', c')`.
pub fn lstm_step(
    tape: &mut Tape,
    bound: &Bound,
    params: &LstmParams,
    x: Var,
    (h, c): (Var, Var),
) -> Result<(Var, Var)> {
    let hd = params.hidden_dim;
    if tape.value(x).len() != params.input_dim {
        return Err(Error::dim("lstm input", &[params.input_dim], tape.value(x).shape()));
    }
    if tape.value(h).len() != hd || tape.value(c).len() != hd {
        return Err(Error::dim("lstm state", &[hd], tape.value(h).shape()));
    }
    let wx = tape.matvec(bound[params.input_weights], x)?;
    let uh = tape.matvec(bound[params.hidden_weights], h)?;
    let z = tape.add_n(&[wx, uh, bound[params.bias]])?;

    let zi = tape.slice(z, 0, hd)?;
    let zf = tape.slice(z, hd, hd)?;
    let zg = tape.slice(z, 2 * hd, hd)?;
    let zo = tape.slice(z, 3 * hd, hd)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let g = tape.tanh(zg);
    let o = tape.sigmoid(zo);

    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_next = tape.add(fc, ig)?;
    let tc = tape.tanh(c_next);
    let h_next = tape.mul(o, tc)?;
    Ok((h_next, c_next))
}

/// Run an LSTM over `xs` from a zero state and return every hidden state.
pub fn lstm_run<'a>(
    tape: &mut Tape,
    bound: &Bound,
    params: &LstmParams,
    xs: impl Iterator<Item = &'a Var>,
) -> Result<Vec<Var>> {
    let zero = Tensor::zeros(&[params.hidden_dim]);
    let mut state = (tape.constant(zero.clone()), tape.constant(zero));
    let mut out = Vec::new();
    for &x in xs {
        state = lstm_step(tape, bound, params, x, state)?;
        out.push(state.0);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstmParams {
    pub fn new<R: Rng>(params: &mut ParamSet, prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        BiLstmParams {
            forward: LstmParams::new(params, &format!("{prefix}.fwd"), input_dim, hidden_dim, rng),
            backward: LstmParams::new(params, &format!("{prefix}.bwd"), input_dim, hidden_dim, rng),
        }
    }

    /// Width of each encoded position: forward and backward states concatenated.
    pub fn output_dim(&self) -> usize {
        self.forward.hidden_dim + self.backward.hidden_dim
    }
}

/// Encode a sequence; output `i` is `[forward_i ; backward_i]`.
pub fn bilstm_encode(tape: &mut Tape, bound: &Bound, params: &BiLstmParams, xs: &[Var]) -> Result<Vec<Var>> {
    if xs.is_empty() {
        return Err(Error::Domain("cannot encode an empty sequence".into()));
    }
    let fwd = lstm_run(tape, bound, &params.forward, xs.iter())?;
    let mut bwd = lstm_run(tape, bound, &params.backward, xs.iter().rev())?;
    bwd.reverse();
    fwd.into_iter().zip(bwd).map(|(f, b)| tape.concat(&[f, b])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gradcheck::{grad_check, GradCheckConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inputs(tape: &mut Tape, xs: &[Vec<f64>]) -> Vec<Var> {
        xs.iter().map(|x| tape.constant(Tensor::vector(x.clone()))).collect()
    }

    #[test]
    fn zero_params_give_zero_hidden_state() {
        let mut p = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lstm = LstmParams::new(&mut p, "l", 3, 4, &mut rng);
        for id in [lstm.input_weights, lstm.hidden_weights, lstm.bias] {
            let shape = p.get(id).shape().to_vec();
            *p.get_mut(id) = Tensor::zeros(&shape);
        }
        let mut tape = Tape::new();
        let b = tape.bind(&p);
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 0.5]));
        let z = tape.constant(Tensor::zeros(&[4]));
        let (h, c) = lstm_step(&mut tape, &b, &lstm, x, (z, z)).unwrap();
        assert_eq!(tape.value(h).data(), &[0.0; 4]);
        assert_eq!(tape.value(c).data(), &[0.0; 4]);
    }

    #[test]
    fn lstm_step_is_deterministic() {
        let mut p = ParamSet::new();
        let lstm = LstmParams::new(&mut p, "l", 3, 2, &mut ChaCha8Rng::seed_from_u64(5));
        let run = || {
            let mut tape = Tape::new();
            let b = tape.bind(&p);
            let x = tape.constant(Tensor::vector(vec![0.2, -0.4, 0.9]));
            let h = tape.constant(Tensor::vector(vec![0.1, -0.3]));
            let c = tape.constant(Tensor::vector(vec![0.5, 0.2]));
            let (h, c) = lstm_step(&mut tape, &b, &lstm, x, (h, c)).unwrap();
            (tape.value(h).clone(), tape.value(c).clone())
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.0.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.0.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn lstm_step_dimension_mismatch() {
        let mut p = ParamSet::new();
        let lstm = LstmParams::new(&mut p, "l", 3, 2, &mut ChaCha8Rng::seed_from_u64(5));
        let mut tape = Tape::new();
        let b = tape.bind(&p);
        let x = tape.constant(Tensor::vector(vec![0.2, -0.4]));
        let z = tape.constant(Tensor::zeros(&[2]));
        assert!(lstm_step(&mut tape, &b, &lstm, x, (z, z)).is_err());
    }

    #[test]
    fn lstm_step_gradients_match_finite_differences() {
        let mut p = ParamSet::new();
        let lstm = LstmParams::new(&mut p, "l", 3, 2, &mut ChaCha8Rng::seed_from_u64(11));
        let h0 = p.add("h0", Tensor::vector(vec![0.3, -0.6]));
        let c0 = p.add("c0", Tensor::vector(vec![-0.2, 0.8]));
        let x = p.add("x", Tensor::vector(vec![0.7, -1.1, 0.4]));
        let f = |tape: &mut Tape, b: &Bound| {
            let (h, c) = lstm_step(tape, b, &lstm, b[x], (b[h0], b[c0]))?;
            let s = tape.add(h, c)?;
            let sq = tape.mul(s, s)?;
            Ok(tape.sum_all(sq))
        };
        let report = grad_check(f, &mut p, &GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{report:#?}");
    }

    #[test]
    fn bilstm_preserves_length_and_rejects_empty() {
        let mut p = ParamSet::new();
        let bi = BiLstmParams::new(&mut p, "bi", 2, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let mut tape = Tape::new();
        let b = tape.bind(&p);
        let xs = inputs(&mut tape, &[vec![1.0, 0.0]]);
        let hs = bilstm_encode(&mut tape, &b, &bi, &xs).unwrap();
        assert_eq!(hs.len(), 1);
        assert_eq!(tape.value(hs[0]).len(), 6);
        assert!(bilstm_encode(&mut tape, &b, &bi, &[]).is_err());
    }

    #[test]
    fn reversed_input_swaps_directions() {
        // With the two directions' parameters exchanged, reversing the input
        // reverses the output and swaps its halves.
        let mut p = ParamSet::new();
        let bi = BiLstmParams::new(&mut p, "bi", 2, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let swapped = BiLstmParams {
            forward: bi.backward.clone(),
            backward: bi.forward.clone(),
        };
        let xs = vec![vec![0.5, -1.0], vec![0.1, 0.2], vec![-0.7, 0.9], vec![1.2, 0.3]];
        let rev: Vec<_> = xs.iter().rev().cloned().collect();

        let mut tape = Tape::new();
        let b = tape.bind(&p);
        let a_in = inputs(&mut tape, &xs);
        let r_in = inputs(&mut tape, &rev);
        let a = bilstm_encode(&mut tape, &b, &bi, &a_in).unwrap();
        let r = bilstm_encode(&mut tape, &b, &swapped, &r_in).unwrap();
        let n = xs.len();
        for i in 0..n {
            let ai = tape.value(a[i]).data();
            let ri = tape.value(r[n - 1 - i]).data();
            assert_eq!(&ai[..3], &ri[3..]);
            assert_eq!(&ai[3..], &ri[..3]);
        }
    }

    #[test]
    fn bilstm_gradients_match_finite_differences() {
        let mut p = ParamSet::new();
        let bi = BiLstmParams::new(&mut p, "bi", 2, 2, &mut ChaCha8Rng::seed_from_u64(3));
        let xs = vec![vec![0.5, -1.0], vec![0.1, 0.2], vec![-0.7, 0.9]];
        let f = |tape: &mut Tape, b: &Bound| {
            let xv = inputs(tape, &xs);
            let hs = bilstm_encode(tape, b, &bi, &xv)?;
            let mut terms = Vec::new();
            for (k, h) in hs.into_iter().enumerate() {
                let s = tape.sum_all(h);
                let w = tape.scale(s, 1.0 + k as f64);
                terms.push(tape.mul(w, w)?);
            }
            tape.add_n(&terms)
        };
        let report = grad_check(f, &mut p, &GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{report:#?}");
    }
}
