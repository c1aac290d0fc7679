use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::params::{Gradients, ParamSet};
use crate::numeric::Tensor;

/// Stochastic gradient descent with optional momentum and global-norm clipping.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, clip_norm: Option<f64>) -> Self {
        Sgd {
            lr,
            momentum,
            clip_norm,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) {
        let mut scale = 1.0;
        if let Some(max) = self.clip_norm {
            let norm = grads.norm();
            if norm > max {
                scale = max / norm;
            }
        }
        if self.momentum == 0.0 {
            for id in params.ids() {
                params.get_mut(id).add_scaled(grads.get(id), -self.lr * scale);
            }
            return;
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        }
        for id in params.ids() {
            let v = &mut self.velocity[id.index()];
            for x in v.data_mut() {
                *x *= self.momentum;
            }
            v.add_scaled(grads.get(id), scale);
            params.get_mut(id).add_scaled(v, -self.lr);
        }
    }
}

/// Adam with bias correction and the same optional global-norm clipping.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64, clip_norm: Option<f64>) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) {
        let mut scale = 1.0;
        if let Some(max) = self.clip_norm {
            let norm = grads.norm();
            if norm > max {
                scale = max / norm;
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for id in params.ids() {
            let g = grads.get(id).data();
            let m = self.m[id.index()].data_mut();
            let v = self.v[id.index()].data_mut();
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                let gk = g[k] * scale;
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                p[k] -= self.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Optimizer named in a training configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd(Sgd),
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64, clip_norm: Option<f64>) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd::new(lr, momentum, clip_norm)),
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(lr, clip_norm)),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) {
        match self {
            Optimizer::Sgd(o) => o.step(params, grads),
            Optimizer::Adam(o) => o.step(params, grads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_step_and_zero_lr() {
        let mut p = ParamSet::new();
        let w = p.add("w", Tensor::vector(vec![1.0, 2.0]));
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(w).data_mut().copy_from_slice(&[0.5, -1.0]);

        let mut frozen = p.clone();
        Sgd::new(0.0, 0.9, None).step(&mut frozen, &g);
        assert_eq!(frozen, p);

        Sgd::new(0.1, 0.0, None).step(&mut p, &g);
        assert_eq!(p.get(w).data(), &[1.0 - 0.05, 2.0 + 0.1]);
    }

    #[test]
    fn clipping_bounds_the_update() {
        let mut p = ParamSet::new();
        let w = p.add("w", Tensor::vector(vec![0.0, 0.0]));
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(w).data_mut().copy_from_slice(&[30.0, 40.0]);
        Sgd::new(1.0, 0.0, Some(5.0)).step(&mut p, &g);
        assert!((p.get(w).data()[0] + 3.0).abs() < 1e-12);
        assert!((p.get(w).data()[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = ParamSet::new();
        let w = p.add("w", Tensor::vector(vec![1.0, 1.0]));
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(w).data_mut().copy_from_slice(&[0.3, -2.0]);
        let mut frozen = p.clone();
        Adam::new(0.0, None).step(&mut frozen, &g);
        assert_eq!(frozen, p);
        Adam::new(0.1, None).step(&mut p, &g);
        assert!((p.get(w).data()[0] - 0.9).abs() < 1e-6);
        assert!((p.get(w).data()[1] - 1.1).abs() < 1e-6);
    }
}
