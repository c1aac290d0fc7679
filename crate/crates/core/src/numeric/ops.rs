//! Plain (untraced) kernels. The tape reuses these for its forward values.

use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Variance floor used by layer normalisation.
pub const LAYER_NORM_EPS: f64 = 1e-5;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_tensor(x: &Tensor) -> Tensor {
    x.map(sigmoid)
}

/// `W·x` for `W: [m×n]`, `x: [n]`.
pub fn matvec(w: &Tensor, x: &Tensor) -> Result<Tensor> {
    if w.rank() != 2 || x.rank() != 1 || w.cols() != x.len() {
        return Err(Error::dim("matvec", w.shape(), x.shape()));
    }
    let n = w.cols();
    let out = w.data().chunks_exact(n).map(|row| dot(row, x.data())).collect();
    Ok(Tensor::vector(out))
}

/// `Mᵀ·y` for `M: [m×n]`, `y: [m]`.
pub fn tmatvec(m: &Tensor, y: &Tensor) -> Result<Tensor> {
    if m.rank() != 2 || y.rank() != 1 || m.rows() != y.len() {
        return Err(Error::dim("tmatvec", m.shape(), y.shape()));
    }
    let mut out = vec![0.0; m.cols()];
    for (row, &yi) in m.data().chunks_exact(m.cols()).zip(y.data()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += yi * v;
        }
    }
    Ok(Tensor::vector(out))
}

/// `W·x + b`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut y = matvec(w, x)?;
    if b.shape() != y.shape() {
        return Err(Error::dim("affine bias", w.shape(), b.shape()));
    }
    y.add_assign(b);
    Ok(y)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-shifted `log Σ exp(v)`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Max-subtracted softmax.
pub fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn log_softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Domain("log-softmax of an empty vector".into()));
    }
    let lse = log_sum_exp(values);
    Ok(values.iter().map(|v| v - lse).collect())
}

/// Zero-mean, unit-variance normalisation (no affine part).
pub fn layer_norm(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    values.iter().map(|v| (v - mean) * inv).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_identity_and_zero_weight() {
        let x = Tensor::vector(vec![3.0, -1.0]);
        let y = affine(&x, &Tensor::identity(2), &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.data(), &[3.0, -1.0]);

        let y = affine(&x, &Tensor::zeros(&[2, 2]), &Tensor::vector(vec![5.0, 5.0])).unwrap();
        assert_eq!(y.data(), &[5.0, 5.0]);
    }

    #[test]
    fn affine_random_matches_hand_multiply() {
        // 4×3 weights, hand-expanded products.
        let w = Tensor::matrix(
            4,
            3,
            vec![0.3, -1.2, 0.5, 2.0, 0.1, -0.7, -0.4, 0.9, 1.1, 0.05, 0.6, -0.25],
        )
        .unwrap();
        let x = Tensor::vector(vec![1.5, -0.5, 2.0]);
        let b = Tensor::vector(vec![0.1, 0.2, 0.3, 0.4]);
        let expected = [
            0.3 * 1.5 + (-1.2) * (-0.5) + 0.5 * 2.0 + 0.1,
            2.0 * 1.5 + 0.1 * (-0.5) + (-0.7) * 2.0 + 0.2,
            (-0.4) * 1.5 + 0.9 * (-0.5) + 1.1 * 2.0 + 0.3,
            0.05 * 1.5 + 0.6 * (-0.5) + (-0.25) * 2.0 + 0.4,
        ];
        let y = affine(&x, &w, &b).unwrap();
        for (a, e) in y.data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let err = affine(
            &Tensor::vector(vec![1.0, 2.0, 3.0]),
            &Tensor::zeros(&[2, 2]),
            &Tensor::zeros(&[2]),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn softmax_cases() {
        let s = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(softmax(&[7.2]).unwrap(), vec![1.0]);
        assert!(softmax(&[]).is_err());

        // direct exp-normalise
        let raw: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).collect();
        let z: f64 = raw.iter().sum();
        let s = softmax(&[1.0, 2.0, 3.0]).unwrap();
        for (a, r) in s.iter().zip(&raw) {
            assert!((a - r / z).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let s = softmax(&[1000.0, 999.0]).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-9);
        for x in [-30.0, -2.5, 0.3, 4.0, 700.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn layer_norm_is_standardised() {
        let y = layer_norm(&[1.0, 2.0, 3.0, 6.0]);
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }
}
