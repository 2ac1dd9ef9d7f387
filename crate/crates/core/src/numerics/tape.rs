//! Reverse-mode differentiation over whole-tensor primitives.
//!
//! Every primitive appends a node holding its forward value. `backward`
//! walks the recorded nodes from the output back to the first one and only
//! propagates adjoints through nodes that depend on a trainable leaf.

use crate::error::{Error, Result};
use crate::numerics::ops::{self, Strided};
use crate::numerics::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Conv1d { x: Var, w: Var, b: Var, dilation: usize },
    NodeMix { x: Var, adj: Tensor },
    Reshape(Var),
    ScaledSigmoid { x: Var, scales: Vec<f64> },
    WeightedAbs { x: Var, target: Tensor, weights: Tensor },
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

/// Ordered record of primitive evaluations. One tape per forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`; `None` when `v` is constant or the output
    /// does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
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

    pub fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Result<Var> {
        value.ensure_finite("forward value")?;
        self.nodes.push(Node { value, op, tracked });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input. Gradients are kept only for trainable leaves.
    pub fn leaf(&mut self, value: Tensor, trainable: bool) -> Result<Var> {
        self.push(value, Op::Leaf, trainable)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        let tracked = self.tracked(&[a, b]);
        self.push(value, Op::MatMul(a, b), tracked)
    }

    /// Adds a bias vector to every row.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(b);
        let width = *bv.shape().last().unwrap_or(&0);
        if bv.ndim() != 1 || xv.shape().last() != Some(&width) {
            return Err(Error::dim(format!(
                "bias {:?} does not fit rows of {:?}",
                bv.shape(),
                xv.shape()
            )));
        }
        let mut value = xv.clone();
        for row in value.data_mut().chunks_exact_mut(width.max(1)) {
            ops::add_bias_row(row, bv.data());
        }
        let tracked = self.tracked(&[x, b]);
        self.push(value, Op::AddBias(x, b), tracked)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim(format!("add {:?} + {:?}", av.shape(), bv.shape())));
        }
        let mut value = av.clone();
        value.add_assign(bv);
        let tracked = self.tracked(&[a, b]);
        self.push(value, Op::Add(a, b), tracked)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(ops::relu);
        let tracked = self.tracked(&[x]);
        self.push(value, Op::Relu(x), tracked)
    }

    pub fn conv1d_causal(&mut self, x: Var, w: Var, b: Var, dilation: usize) -> Result<Var> {
        let value = ops::conv1d_causal(self.value(x), self.value(w), self.value(b), dilation)?;
        let tracked = self.tracked(&[x, w, b]);
        self.push(value, Op::Conv1d { x, w, b, dilation }, tracked)
    }

    /// Applies a fixed `N × N` node-mixing matrix to every frame of `x`,
    /// where `x` is `(frames·N) × C`.
    pub fn node_mix(&mut self, x: Var, adj: &Tensor) -> Result<Var> {
        let (n, n2) = adj.dims2()?;
        let xv = self.value(x);
        let (rows, c) = xv.dims2()?;
        if n != n2 || n == 0 || rows % n != 0 {
            return Err(Error::dim(format!(
                "node mixing {:?} does not divide rows of {:?}",
                adj.shape(),
                xv.shape()
            )));
        }
        let mut value = Tensor::zeros(&[rows, c]);
        let frame = n * c;
        if frame > 0 {
            for (src, dst) in xv.data().chunks_exact(frame).zip(value.data_mut().chunks_exact_mut(frame)) {
                ops::node_mix_frame(adj.data(), src, dst);
            }
        }
        let tracked = self.tracked(&[x]);
        self.push(value, Op::NodeMix { x, adj: adj.clone() }, tracked)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let tracked = self.tracked(&[x]);
        self.push(value, Op::Reshape(x), tracked)
    }

    /// `y[.., j] = scales[j] · sigmoid(x[.., j])` over the last dimension.
    pub fn scaled_sigmoid(&mut self, x: Var, scales: Vec<f64>) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape().last() != Some(&scales.len()) {
            return Err(Error::dim(format!(
                "{} scales for last dimension of {:?}",
                scales.len(),
                xv.shape()
            )));
        }
        let mut value = xv.clone();
        if !scales.is_empty() {
            for row in value.data_mut().chunks_exact_mut(scales.len()) {
                for (v, s) in row.iter_mut().zip(&scales) {
                    *v = s * ops::sigmoid(*v);
                }
            }
        }
        let tracked = self.tracked(&[x]);
        self.push(value, Op::ScaledSigmoid { x, scales }, tracked)
    }

    /// Scalar `Σ weights · |x − target|`. Weights and target are constants.
    pub fn weighted_abs(&mut self, x: Var, target: Tensor, weights: Tensor) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape() != target.shape() || xv.shape() != weights.shape() {
            return Err(Error::dim(format!(
                "weighted abs over {:?}, target {:?}, weights {:?}",
                xv.shape(),
                target.shape(),
                weights.shape()
            )));
        }
        let total = xv
            .data()
            .iter()
            .zip(target.data())
            .zip(weights.data())
            .map(|((p, g), w)| w * (p - g).abs())
            .sum();
        let tracked = self.tracked(&[x]);
        self.push(Tensor::scalar(total), Op::WeightedAbs { x, target, weights }, tracked)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.value(x).sum();
        let tracked = self.tracked(&[x]);
        self.push(Tensor::scalar(total), Op::Sum(x), tracked)
    }

    /// Back-propagates from `output`, seeding its adjoint with ones.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(output.0 + 1, || None);
        let out_shape = self.nodes[output.0].value.shape().to_vec();
        grads[output.0] = Some(Tensor::full(&out_shape, 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].as_ref() else { continue };
            g.ensure_finite("gradient")?;
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let g = grads[idx].take().expect("checked above");
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contrib: Tensor) {
        if !self.nodes[v.0].tracked {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = av.dims2()?;
                let (_, n) = bv.dims2()?;
                if self.is_tracked(*a) {
                    let mut da = Tensor::zeros(&[m, k]);
                    let gs = Strided::rows(g.data(), n);
                    ops::gemm(m, n, k, gs, Strided::transposed(bv.data(), n), 0.0, da.data_mut());
                    self.accumulate(grads, *a, da);
                }
                if self.is_tracked(*b) {
                    let mut db = Tensor::zeros(&[k, n]);
                    let at = Strided::transposed(av.data(), k);
                    ops::gemm(k, m, n, at, Strided::rows(g.data(), n), 0.0, db.data_mut());
                    self.accumulate(grads, *b, db);
                }
            }
            Op::AddBias(x, b) => {
                self.accumulate(grads, *x, g.clone());
                if self.is_tracked(*b) {
                    let width = self.value(*b).len();
                    let mut db = Tensor::zeros(&[width]);
                    for row in g.data().chunks_exact(width.max(1)) {
                        axpy(db.data_mut(), 1.0, row);
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if *v <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Conv1d { x, w, b, dilation } => {
                self.conv_backward(*x, *w, *b, *dilation, g, grads)?;
            }
            Op::NodeMix { x, adj } => {
                let n = adj.dims2()?.0;
                let mut adj_t = Tensor::zeros(&[n, n]);
                for i in 0..n {
                    for j in 0..n {
                        adj_t.data_mut()[j * n + i] = adj.data()[i * n + j];
                    }
                }
                let (rows, c) = g.dims2()?;
                let mut dx = Tensor::zeros(&[rows, c]);
                let frame = n * c;
                if frame > 0 {
                    for (src, dst) in g.data().chunks_exact(frame).zip(dx.data_mut().chunks_exact_mut(frame)) {
                        ops::node_mix_frame(adj_t.data(), src, dst);
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Reshape(x) => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, g.clone().reshape(&shape)?);
            }
            Op::ScaledSigmoid { x, scales } => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (drow, xrow) in dx
                    .data_mut()
                    .chunks_exact_mut(scales.len())
                    .zip(xv.data().chunks_exact(scales.len()))
                {
                    for ((d, v), s) in drow.iter_mut().zip(xrow).zip(scales) {
                        let sg = ops::sigmoid(*v);
                        *d *= s * sg * (1.0 - sg);
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::WeightedAbs { x, target, weights } => {
                let scale = g.data()[0];
                let xv = self.value(*x);
                let data = xv
                    .data()
                    .iter()
                    .zip(target.data())
                    .zip(weights.data())
                    .map(|((p, t), w)| {
                        let diff = p - t;
                        let sign = if diff > 0.0 {
                            1.0
                        } else if diff < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        scale * w * sign
                    })
                    .collect();
                self.accumulate(grads, *x, Tensor::new(xv.shape().to_vec(), data)?);
            }
            Op::Sum(x) => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, Tensor::full(&shape, g.data()[0]));
            }
        }
        Ok(())
    }

    fn conv_backward(
        &self,
        x: Var,
        w: Var,
        b: Var,
        dilation: usize,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        let (xv, wv) = (self.value(x), self.value(w));
        let (t, k, cin, cout) = ops::conv_dims(xv, wv, self.value(b), dilation)?;
        let want_x = self.is_tracked(x);
        let want_w = self.is_tracked(w);
        let mut dx = Tensor::zeros(&[t, cin]);
        let mut dw = Tensor::zeros(&[k, cin, cout]);
        for kk in 0..k {
            let back = dilation * (k - 1 - kk);
            if back >= t {
                continue;
            }
            let rows = t - back;
            let gy = Strided::rows(&g.data()[back * cout..], cout);
            let block = kk * cin * cout..(kk + 1) * cin * cout;
            if want_x {
                let wt = Strided::transposed(&wv.data()[block.clone()], cout);
                ops::gemm(rows, cout, cin, gy, wt, 1.0, dx.data_mut());
            }
            if want_w {
                let xt = Strided::transposed(xv.data(), cin);
                ops::gemm(cin, rows, cout, xt, gy, 1.0, &mut dw.data_mut()[block]);
            }
        }
        if want_x {
            self.accumulate(grads, x, dx);
        }
        if want_w {
            self.accumulate(grads, w, dw);
        }
        if self.is_tracked(b) {
            let mut db = Tensor::zeros(&[cout]);
            for row in g.data().chunks_exact(cout) {
                axpy(db.data_mut(), 1.0, row);
            }
            self.accumulate(grads, b, db);
        }
        Ok(())
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(&[1.0, 2.0])).unwrap();
        let b = tape.leaf(Tensor::vector(&[3.0, 4.0]), true).unwrap();
        let s = tape.add(a, b).unwrap();
        let out = tape.sum(s).unwrap();
        let grads = tape.backward(out).unwrap();
        assert!(grads.get(a).is_none());
        assert_eq!(grads.get(b).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn untracked_graph_is_not_tracked() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::identity(2)).unwrap();
        let b = tape.constant(Tensor::identity(2)).unwrap();
        let m = tape.matmul(a, b).unwrap();
        assert!(!tape.is_tracked(m));
    }

    #[test]
    fn shared_input_accumulates() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[2.0, -1.0]), true).unwrap();
        let y = tape.add(x, x).unwrap();
        let out = tape.sum(y).unwrap();
        let grads = tape.backward(out).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 2.0]);
    }

    #[test]
    fn forward_rejects_nan() {
        let mut tape = Tape::new();
        assert!(matches!(
            tape.leaf(Tensor::vector(&[f64::NAN]), true),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn weighted_abs_gradient_is_weighted_sign() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[1.0, 2.0, 3.0]), true).unwrap();
        let out = tape
            .weighted_abs(x, Tensor::vector(&[2.0, 2.0, 2.0]), Tensor::vector(&[0.5, 1.0, 2.0]))
            .unwrap();
        assert_eq!(tape.value(out).data(), &[0.5 + 0.0 + 2.0]);
        let grads = tape.backward(out).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[-0.5, 0.0, 2.0]);
    }
}
