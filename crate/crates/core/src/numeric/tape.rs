//! Reverse-mode differentiation over vector-valued nodes.
//!
//! Values are computed eagerly as operations are recorded. [`Tape::backward`]
//! walks the nodes in exact reverse registration order and returns the
//! gradients of every bound parameter.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::numeric::ops;
use crate::numeric::params::{Gradients, ParamId, ParamSet};
use crate::numeric::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// An operation with a hand-written backward rule, for compositions that are
/// cheaper to differentiate as a whole (e.g. a CRF likelihood).
pub trait CustomOp {
    /// Gradients with respect to each input, in input order.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor>;
}

enum Op {
    Constant,
    Param(ParamId),
    MatVec(Var, Var),
    TMatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm(Var),
    Dot(Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Stack(Vec<Var>),
    SumAll(Var),
    Pick(Var, usize),
    AddN(Vec<Var>),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Parameters registered on a tape, indexable by [`ParamId`].
pub struct Bound {
    vars: Vec<Var>,
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Register every tensor of `params` as a differentiable leaf.
    pub fn bind(&mut self, params: &ParamSet) -> Bound {
        let vars = params
            .iter()
            .map(|(id, p)| self.push(p.value.clone(), Op::Param(id), true))
            .collect();
        Bound { vars }
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let value = ops::matvec(self.value(w), self.value(x))?;
        let rg = self.rg(w) || self.rg(x);
        Ok(self.push(value, Op::MatVec(w, x), rg))
    }

    /// `Mᵀ·y`; with `M` holding one vector per row this is the `y`-weighted sum of rows.
    pub fn tmatvec(&mut self, m: Var, y: Var) -> Result<Var> {
        let value = ops::tmatvec(self.value(m), self.value(y))?;
        let rg = self.rg(m) || self.rg(y);
        Ok(self.push(value, Op::TMatVec(m, y), rg))
    }

    /// `W·x + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let wx = self.matvec(w, x)?;
        self.add(wx, b)
            .map_err(|_| Error::dim("affine bias", self.shape(w), self.shape(b)))
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(name, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add")?;
        let value = self.zip_with(a, b, |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub")?;
        let value = self.zip_with(a, b, |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul")?;
        let value = self.zip_with(a, b, |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).map(|v| v * factor);
        let rg = self.rg(x);
        self.push(value, Op::Scale(x, factor), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = ops::sigmoid_tensor(self.value(x));
        let rg = self.rg(x);
        self.push(value, Op::Sigmoid(x), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::tanh);
        let rg = self.rg(x);
        self.push(value, Op::Tanh(x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        let rg = self.rg(x);
        self.push(value, Op::Relu(x), rg)
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), ops::softmax(t.data())?)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Softmax(x), rg))
    }

    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), ops::log_softmax(t.data())?)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::LogSoftmax(x), rg))
    }

    pub fn layer_norm(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), ops::layer_norm(t.data())).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::LayerNorm(x), rg)
    }

    /// Inner product, as a one-element tensor.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "dot")?;
        let value = Tensor::scalar(ops::dot(self.value(a).data(), self.value(b).data()));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Dot(a, b), rg))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Domain("concat of zero parts".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), rg))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        if len == 0 || start + len > t.len() {
            return Err(Error::dim("slice", t.shape(), &[start, len]));
        }
        let value = Tensor::vector(t.data()[start..start + len].to_vec());
        let rg = self.rg(x);
        Ok(self.push(value, Op::Slice(x, start), rg))
    }

    /// Stack equal-length vectors into a `[rows × len]` matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let tensors: Vec<Tensor> = rows.iter().map(|&r| self.value(r).clone()).collect();
        let value = Tensor::from_rows(&tensors)?;
        let rg = rows.iter().any(|&r| self.rg(r));
        Ok(self.push(value, Op::Stack(rows.to_vec()), rg))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        let rg = self.rg(x);
        self.push(value, Op::SumAll(x), rg)
    }

    /// Element `index` of a flattened tensor, as a one-element tensor.
    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var> {
        let t = self.value(x);
        if index >= t.len() {
            return Err(Error::dim("pick", t.shape(), &[index]));
        }
        let value = Tensor::scalar(t.data()[index]);
        let rg = self.rg(x);
        Ok(self.push(value, Op::Pick(x, index), rg))
    }

    /// Sum of same-shaped tensors.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or_else(|| Error::Domain("sum of zero tensors".into()))?;
        let mut value = self.value(first).clone();
        for &x in &xs[1..] {
            if self.shape(x) != value.shape() {
                return Err(Error::dim("add_n", value.shape(), self.shape(x)));
            }
            value.add_assign(self.value(x));
        }
        let rg = xs.iter().any(|&x| self.rg(x));
        Ok(self.push(value, Op::AddN(xs.to_vec()), rg))
    }

    pub fn mean_n(&mut self, xs: &[Var]) -> Result<Var> {
        let total = self.add_n(xs)?;
        Ok(self.scale(total, 1.0 / xs.len() as f64))
    }

    /// Record a node whose value was computed by the caller.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Var {
        let rg = inputs.iter().any(|&x| self.rg(x));
        self.push(value, Op::Custom(inputs.to_vec(), op), rg)
    }

    /// Gradients of the scalar `loss` with respect to every bound parameter.
    ///
    /// Accumulators start at zero on every call; parameters never bound on
    /// this tape get zero gradients.
    pub fn backward(&self, loss: Var, params: &ParamSet) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::dim("backward", lv.shape(), &[1]));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite(format!("loss = {}", lv.item())));
        }
        let mut out = Gradients::zeros_like(params);
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads, &mut out);
        }
        Ok(out)
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>], out: &mut Gradients) {
        let mut acc = |v: Var, t: Tensor| {
            if !self.rg(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        let like = |v: Var, data: Vec<f64>| Tensor::new(self.shape(v).to_vec(), data).expect("gradient shape");
        let gd = g.data();
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => out.get_mut(*id).add_assign(g),
            Op::MatVec(w, x) => {
                let (tw, tx) = (self.value(*w), self.value(*x));
                if self.rg(*w) {
                    let n = tx.len();
                    let mut gw = vec![0.0; tw.len()];
                    for (i, &gi) in gd.iter().enumerate() {
                        for (j, &xj) in tx.data().iter().enumerate() {
                            gw[i * n + j] = gi * xj;
                        }
                    }
                    acc(*w, like(*w, gw));
                }
                if self.rg(*x) {
                    acc(*x, ops::tmatvec(tw, g).expect("shape"));
                }
            }
            Op::TMatVec(m, y) => {
                let (tm, ty) = (self.value(*m), self.value(*y));
                if self.rg(*m) {
                    let n = tm.cols();
                    let mut gm = vec![0.0; tm.len()];
                    for (i, &yi) in ty.data().iter().enumerate() {
                        for (j, &gj) in gd.iter().enumerate() {
                            gm[i * n + j] = yi * gj;
                        }
                    }
                    acc(*m, like(*m, gm));
                }
                if self.rg(*y) {
                    acc(*y, ops::matvec(tm, g).expect("shape"));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    acc(*a, like(*a, gd.iter().zip(tb.data()).map(|(g, b)| g * b).collect()));
                }
                if self.rg(*b) {
                    acc(*b, like(*b, gd.iter().zip(ta.data()).map(|(g, a)| g * a).collect()));
                }
            }
            Op::Scale(x, c) => acc(*x, g.map(|v| v * c)),
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(*x, like(*x, gd.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect()));
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                acc(*x, like(*x, gd.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect()));
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                acc(
                    *x,
                    like(
                        *x,
                        gd.iter()
                            .zip(xv)
                            .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                            .collect(),
                    ),
                );
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let gy = ops::dot(gd, y);
                acc(*x, like(*x, gd.iter().zip(y).map(|(g, y)| y * (g - gy)).collect()));
            }
            Op::LogSoftmax(x) => {
                let y = node.value.data();
                let total: f64 = gd.iter().sum();
                acc(
                    *x,
                    like(*x, gd.iter().zip(y).map(|(g, y)| g - y.exp() * total).collect()),
                );
            }
            Op::LayerNorm(x) => {
                let xv = self.value(*x).data();
                let y = node.value.data();
                let n = xv.len() as f64;
                let mean = xv.iter().sum::<f64>() / n;
                let var = xv.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let inv = 1.0 / (var + ops::LAYER_NORM_EPS).sqrt();
                let g_mean = gd.iter().sum::<f64>() / n;
                let gy_mean = ops::dot(gd, y) / n;
                acc(
                    *x,
                    like(
                        *x,
                        gd.iter()
                            .zip(y)
                            .map(|(g, y)| inv * (g - g_mean - y * gy_mean))
                            .collect(),
                    ),
                );
            }
            Op::Dot(a, b) => {
                let g0 = gd[0];
                if self.rg(*a) {
                    acc(*a, self.value(*b).map(|v| v * g0));
                }
                if self.rg(*b) {
                    acc(*b, self.value(*a).map(|v| v * g0));
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    acc(p, like(p, gd[offset..offset + n].to_vec()));
                    offset += n;
                }
            }
            Op::Slice(x, start) => {
                let mut gx = vec![0.0; self.value(*x).len()];
                gx[*start..*start + gd.len()].copy_from_slice(gd);
                acc(*x, like(*x, gx));
            }
            Op::Stack(rows) => {
                for (i, &r) in rows.iter().enumerate() {
                    acc(r, like(r, g.row(i).to_vec()));
                }
            }
            Op::SumAll(x) => acc(*x, Tensor::filled(self.shape(*x), gd[0])),
            Op::Pick(x, i) => {
                let mut gx = vec![0.0; self.value(*x).len()];
                gx[*i] = gd[0];
                acc(*x, like(*x, gx));
            }
            Op::AddN(xs) => {
                for &x in xs {
                    acc(x, g.clone());
                }
            }
            Op::Custom(inputs, op) => {
                let values: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
                for (&v, gi) in inputs.iter().zip(op.backward(&values, &node.value, g)) {
                    acc(v, gi);
                }
            }
        }
    }
}
