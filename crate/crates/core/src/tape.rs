//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! A forward pass records one node per operation; nodes refer to their
//! parents by index, so insertion order is already a topological order.
//! [`Tape::backward`] walks the tape once in reverse, accumulating each
//! node's gradient (same shape as its value) into its parents via the
//! op-specific local derivative.
//!
//! The op set is exactly what the two model architectures need: matmul,
//! bias/residual adds, ReLU, row gathering (embeddings and position
//! selection), fused single-query attention, optional layer norm, batched
//! softmax cross-entropy, cyclic representation mixing, and a couple of
//! scalar reductions used by tests.

use crate::matrix::{matmul_a_bt_into, matmul_at_b_into, Matrix, MatrixError};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum TapeError {
    Shape(MatrixError),
    TargetOutOfRange { index: usize, classes: usize },
    TargetCountMismatch { targets: usize, rows: usize },
    NotScalar { rows: usize, cols: usize },
    BackwardTwice,
    BatchTooSmall { rows: usize },
    HeadSplit { cols: usize, heads: usize },
    GatherOutOfRange { index: usize, rows: usize },
}

impl fmt::Display for TapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapeError::Shape(e) => write!(f, "{e}"),
            TapeError::TargetOutOfRange { index, classes } => {
                write!(f, "target {index} out of range for {classes} classes")
            }
            TapeError::TargetCountMismatch { targets, rows } => {
                write!(f, "{targets} targets for {rows} logit rows")
            }
            TapeError::NotScalar { rows, cols } => {
                write!(f, "backward needs a scalar loss, got {rows}x{cols}")
            }
            TapeError::BackwardTwice => write!(f, "backward called twice without reset"),
            TapeError::BatchTooSmall { rows } => {
                write!(f, "mixing needs at least 2 rows, got {rows}")
            }
            TapeError::HeadSplit { cols, heads } => {
                write!(f, "{cols} columns do not split into {heads} heads")
            }
            TapeError::GatherOutOfRange { index, rows } => {
                write!(f, "gather index {index} out of range for {rows} rows")
            }
        }
    }
}

impl core::error::Error for TapeError {}

impl From<MatrixError> for TapeError {
    fn from(e: MatrixError) -> Self {
        TapeError::Shape(e)
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    Matmul {
        a: NodeId,
        b: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    AddScaled {
        a: NodeId,
        b: NodeId,
        wa: f64,
        wb: f64,
    },
    AddBias {
        a: NodeId,
        bias: NodeId,
    },
    Scale {
        a: NodeId,
        c: f64,
    },
    Relu {
        a: NodeId,
    },
    GatherRows {
        src: NodeId,
        idx: Vec<usize>,
    },
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        seq: usize,
        /// Softmax weights saved by the forward pass, [batch x heads*seq].
        weights: Matrix,
    },
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        normalized: Matrix,
        inv_std: Vec<f64>,
    },
    MixRows {
        z: NodeId,
        alpha: f64,
    },
    SumAll {
        a: NodeId,
    },
    HalfSumSquares {
        a: NodeId,
    },
    SoftmaxXent {
        logits: NodeId,
        targets: Vec<usize>,
        /// Row-wise softmax probabilities saved by the forward pass.
        probs: Matrix,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Records a forward computation and differentiates it once.
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    /// Registers an input/parameter node.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated for `id` by the last [`Tape::backward`] call.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears gradients so backward may run again.
    pub fn reset_gradients(&mut self) {
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.backward_done = false;
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TapeError> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Matmul { a, b }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TapeError> {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    /// `wa·a + wb·b` elementwise.
    pub fn add_scaled(
        &mut self,
        a: NodeId,
        b: NodeId,
        wa: f64,
        wb: f64,
    ) -> Result<NodeId, TapeError> {
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        if va.shape() != vb.shape() {
            return Err(MatrixError::ShapeMismatch {
                op: "add_scaled",
                left: va.shape(),
                right: vb.shape(),
            }
            .into());
        }
        let mut value = va.scale(wa);
        value.axpy(wb, vb)?;
        Ok(self.push(value, Op::AddScaled { a, b, wa, wb }))
    }

    /// Adds a `1 x d` bias row to every row of `a`.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, TapeError> {
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[bias.0].value;
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(MatrixError::ShapeMismatch {
                op: "add_bias",
                left: va.shape(),
                right: vb.shape(),
            }
            .into());
        }
        let mut value = va.clone();
        for i in 0..value.rows() {
            for (o, &b) in value.row_mut(i).iter_mut().zip(vb.row(0)) {
                *o += b;
            }
        }
        Ok(self.push(value, Op::AddBias { a, bias }))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a.0].value.scale(c);
        self.push(value, Op::Scale { a, c })
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut value = self.nodes[a.0].value.clone();
        for x in value.data_mut().iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        self.push(value, Op::Relu { a })
    }

    /// Selects rows of `src` by index (duplicates allowed); the backward pass
    /// scatter-adds, which makes this double as an embedding lookup.
    pub fn gather_rows(&mut self, src: NodeId, idx: Vec<usize>) -> Result<NodeId, TapeError> {
        let vs = &self.nodes[src.0].value;
        for &i in &idx {
            if i >= vs.rows() {
                return Err(TapeError::GatherOutOfRange {
                    index: i,
                    rows: vs.rows(),
                });
            }
        }
        let mut value = Matrix::zeros(idx.len(), vs.cols());
        for (r, &i) in idx.iter().enumerate() {
            value.row_mut(r).copy_from_slice(vs.row(i));
        }
        Ok(self.push(value, Op::GatherRows { src, idx }))
    }

    /// Multi-head scaled dot-product attention with one query row per
    /// sequence: `q` is `[B x d]`, `k`/`v` are `[B*seq x d]` with the rows of
    /// sequence `i` at `i*seq..(i+1)*seq`. Softmax weights are kept for the
    /// backward pass and can be inspected with [`Tape::attention_weights`].
    pub fn attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        seq: usize,
    ) -> Result<NodeId, TapeError> {
        let (vq, vk, vv) = (
            &self.nodes[q.0].value,
            &self.nodes[k.0].value,
            &self.nodes[v.0].value,
        );
        let d = vq.cols();
        if heads == 0 || d % heads != 0 {
            return Err(TapeError::HeadSplit { cols: d, heads });
        }
        if vk.shape() != (vq.rows() * seq, d) {
            return Err(MatrixError::ShapeMismatch {
                op: "attention.kv",
                left: vq.shape(),
                right: vk.shape(),
            }
            .into());
        }
        if vv.shape() != vk.shape() {
            return Err(MatrixError::ShapeMismatch {
                op: "attention.kv",
                left: vk.shape(),
                right: vv.shape(),
            }
            .into());
        }
        let batch = vq.rows();
        let dh = d / heads;
        let scale = 1.0 / crate::math::sqrt(dh as f64);

        let mut out = Matrix::zeros(batch, d);
        let mut weights = Matrix::zeros(batch, heads * seq);
        let mut scores = vec![0.0f64; seq];
        for i in 0..batch {
            for h in 0..heads {
                let hs = h * dh;
                let q_row = &vq.row(i)[hs..hs + dh];
                for (t, sc) in scores.iter_mut().enumerate() {
                    let k_row = &vk.row(i * seq + t)[hs..hs + dh];
                    *sc = q_row.iter().zip(k_row).map(|(a, b)| a * b).sum::<f64>() * scale;
                }
                let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
                let mut denom = 0.0;
                for sc in scores.iter_mut() {
                    *sc = crate::math::exp(*sc - max);
                    denom += *sc;
                }
                for (t, &sc) in scores.iter().enumerate() {
                    let w = sc / denom;
                    weights.set(i, h * seq + t, w);
                    let v_row = &vv.row(i * seq + t)[hs..hs + dh];
                    let o_row = &mut out.row_mut(i)[hs..hs + dh];
                    for (o, &vx) in o_row.iter_mut().zip(v_row) {
                        *o += w * vx;
                    }
                }
            }
        }
        Ok(self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                heads,
                seq,
                weights,
            },
        ))
    }

    /// Softmax weights of an attention node, `[batch x heads*seq]`.
    pub fn attention_weights(&self, id: NodeId) -> Option<&Matrix> {
        match &self.nodes[id.0].op {
            Op::Attention { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Row-wise layer norm with learned gain/bias (`1 x d` each).
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
    ) -> Result<NodeId, TapeError> {
        let vx = &self.nodes[x.0].value;
        let vg = &self.nodes[gain.0].value;
        let vb = &self.nodes[bias.0].value;
        let d = vx.cols();
        if vg.shape() != (1, d) || vb.shape() != (1, d) {
            return Err(MatrixError::ShapeMismatch {
                op: "layer_norm",
                left: vx.shape(),
                right: vg.shape(),
            }
            .into());
        }
        let rows = vx.rows();
        let mut normalized = Matrix::zeros(rows, d);
        let mut inv_std = vec![0.0f64; rows];
        let mut out = Matrix::zeros(rows, d);
        for i in 0..rows {
            let row = vx.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / crate::math::sqrt(var + LAYER_NORM_EPS);
            inv_std[i] = is;
            for j in 0..d {
                let nh = (row[j] - mean) * is;
                normalized.set(i, j, nh);
                out.set(i, j, nh * vg.get(0, j) + vb.get(0, j));
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
        ))
    }

    /// Cyclic representation mixing: row `i` becomes
    /// `(1-alpha)·z_i + alpha·z_{(i+1) mod B}`. Needs `B >= 2` so the shift is
    /// a derangement.
    pub fn mix_rows(&mut self, z: NodeId, alpha: f64) -> Result<NodeId, TapeError> {
        let vz = &self.nodes[z.0].value;
        let b = vz.rows();
        if b < 2 {
            return Err(TapeError::BatchTooSmall { rows: b });
        }
        let mut value = Matrix::zeros(b, vz.cols());
        for i in 0..b {
            let next = (i + 1) % b;
            let (zi, zn) = (vz.row(i), vz.row(next));
            for (o, (&a, &c)) in value.row_mut(i).iter_mut().zip(zi.iter().zip(zn)) {
                *o = (1.0 - alpha) * a + alpha * c;
            }
        }
        Ok(self.push(value, Op::MixRows { z, alpha }))
    }

    /// Sum of all entries, as a `1 x 1` node.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.nodes[a.0].value.sum();
        self.push(Matrix::from_vec(1, 1, vec![s]).unwrap(), Op::SumAll { a })
    }

    /// `½ Σ x²` of all entries, as a `1 x 1` node.
    pub fn half_sum_squares(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.nodes[a.0].value.data().iter().map(|x| x * x).sum();
        self.push(
            Matrix::from_vec(1, 1, vec![0.5 * s]).unwrap(),
            Op::HalfSumSquares { a },
        )
    }

    /// Mean softmax cross-entropy over the batch, stabilised by row-max
    /// subtraction. Targets are class indices, one per logit row.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
    ) -> Result<NodeId, TapeError> {
        let vl = &self.nodes[logits.0].value;
        let (rows, classes) = vl.shape();
        if targets.len() != rows {
            return Err(TapeError::TargetCountMismatch {
                targets: targets.len(),
                rows,
            });
        }
        for &t in targets {
            if t >= classes {
                return Err(TapeError::TargetOutOfRange { index: t, classes });
            }
        }
        let mut probs = Matrix::zeros(rows, classes);
        let mut loss = 0.0;
        for i in 0..rows {
            let row = vl.row(i);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let mut denom = 0.0;
            for (j, &x) in row.iter().enumerate() {
                let e = crate::math::exp(x - max);
                probs.set(i, j, e);
                denom += e;
            }
            for j in 0..classes {
                probs.set(i, j, probs.get(i, j) / denom);
            }
            loss += crate::math::ln(denom) - (row[targets[i]] - max);
        }
        loss /= rows as f64;
        Ok(self.push(
            Matrix::from_vec(1, 1, vec![loss]).unwrap(),
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    fn accumulate(&mut self, id: NodeId, delta: &Matrix) {
        match &mut self.grads[id.0] {
            Some(g) => {
                g.axpy(1.0, delta).expect("gradient shape fixed by value");
            }
            slot @ None => *slot = Some(delta.clone()),
        }
    }

    fn grad_or_zeros(&mut self, id: NodeId) -> Matrix {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.nodes[id.0].value.shape();
                Matrix::zeros(r, c)
            }
        }
    }

    /// Reverse pass from a scalar `loss` node. Visits each node exactly once
    /// in reverse insertion order (a valid reverse topological order) and
    /// accumulates gradients for every node that influences the loss.
    ///
    /// Errors if `loss` is not `1 x 1` or if called again without
    /// [`Tape::reset_gradients`].
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TapeError> {
        if self.backward_done {
            return Err(TapeError::BackwardTwice);
        }
        let (r, c) = self.nodes[loss.0].value.shape();
        if (r, c) != (1, 1) {
            return Err(TapeError::NotScalar { rows: r, cols: c });
        }
        self.backward_done = true;
        self.grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]).unwrap());

        for i in (0..=loss.0).rev() {
            let Some(gout) = self.grads[i].clone() else {
                continue;
            };

            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Matmul { a, b } => {
                    let (a, b) = (*a, *b);
                    let va = self.nodes[a.0].value.clone();
                    let vb = self.nodes[b.0].value.clone();
                    let mut ga = self.grad_or_zeros(a);
                    matmul_a_bt_into(&mut ga, &gout, &vb, true);
                    self.grads[a.0] = Some(ga);
                    let mut gb = self.grad_or_zeros(b);
                    matmul_at_b_into(&mut gb, &va, &gout, true);
                    self.grads[b.0] = Some(gb);
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    self.accumulate(a, &gout);
                    self.accumulate(b, &gout);
                }
                Op::AddScaled { a, b, wa, wb } => {
                    let (a, b, wa, wb) = (*a, *b, *wa, *wb);
                    self.accumulate(a, &gout.scale(wa));
                    self.accumulate(b, &gout.scale(wb));
                }
                Op::AddBias { a, bias } => {
                    let (a, bias) = (*a, *bias);
                    self.accumulate(a, &gout);
                    let mut gb = Matrix::zeros(1, gout.cols());
                    for r in 0..gout.rows() {
                        for (o, &g) in gb.row_mut(0).iter_mut().zip(gout.row(r)) {
                            *o += g;
                        }
                    }
                    self.accumulate(bias, &gb);
                }
                Op::Scale { a, c } => {
                    let (a, c) = (*a, *c);
                    self.accumulate(a, &gout.scale(c));
                }
                Op::Relu { a } => {
                    let a = *a;
                    let mut masked = gout.clone();
                    for (g, &y) in masked
                        .data_mut()
                        .iter_mut()
                        .zip(self.nodes[i].value.data())
                    {
                        if y <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    self.accumulate(a, &masked);
                }
                Op::GatherRows { src, idx } => {
                    let src = *src;
                    let idx = idx.clone();
                    let mut gs = self.grad_or_zeros(src);
                    for (r, &i_src) in idx.iter().enumerate() {
                        for (o, &g) in gs.row_mut(i_src).iter_mut().zip(gout.row(r)) {
                            *o += g;
                        }
                    }
                    self.grads[src.0] = Some(gs);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    heads,
                    seq,
                    weights,
                } => {
                    let (q, k, v, heads, seq) = (*q, *k, *v, *heads, *seq);
                    let weights = weights.clone();
                    let vq = self.nodes[q.0].value.clone();
                    let vk = self.nodes[k.0].value.clone();
                    let vv = self.nodes[v.0].value.clone();
                    let batch = vq.rows();
                    let d = vq.cols();
                    let dh = d / heads;
                    let scale = 1.0 / crate::math::sqrt(dh as f64);

                    let mut gq = self.grad_or_zeros(q);
                    let mut gk = self.grad_or_zeros(k);
                    let mut gv = self.grad_or_zeros(v);

                    let mut galpha = vec![0.0f64; seq];
                    let mut gscore = vec![0.0f64; seq];
                    for i in 0..batch {
                        for h in 0..heads {
                            let hs = h * dh;
                            let go: Vec<f64> = gout.row(i)[hs..hs + dh].to_vec();
                            for (t, ga) in galpha.iter_mut().enumerate() {
                                let w = weights.get(i, h * seq + t);
                                let v_row = &vv.row(i * seq + t)[hs..hs + dh];
                                *ga = go.iter().zip(v_row).map(|(a, b)| a * b).sum();
                                for (o, &g) in
                                    gv.row_mut(i * seq + t)[hs..hs + dh].iter_mut().zip(&go)
                                {
                                    *o += w * g;
                                }
                            }
                            let dot: f64 = (0..seq)
                                .map(|t| weights.get(i, h * seq + t) * galpha[t])
                                .sum();
                            for t in 0..seq {
                                gscore[t] = weights.get(i, h * seq + t) * (galpha[t] - dot);
                            }
                            let q_row: Vec<f64> = vq.row(i)[hs..hs + dh].to_vec();
                            for (t, &gsc) in gscore.iter().enumerate() {
                                let gs = gsc * scale;
                                let k_row = &vk.row(i * seq + t)[hs..hs + dh];
                                for (o, &kx) in gq.row_mut(i)[hs..hs + dh].iter_mut().zip(k_row) {
                                    *o += gs * kx;
                                }
                                for (o, &qx) in
                                    gk.row_mut(i * seq + t)[hs..hs + dh].iter_mut().zip(&q_row)
                                {
                                    *o += gs * qx;
                                }
                            }
                        }
                    }
                    self.grads[q.0] = Some(gq);
                    self.grads[k.0] = Some(gk);
                    self.grads[v.0] = Some(gv);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    let (x, gain, bias) = (*x, *gain, *bias);
                    let normalized = normalized.clone();
                    let inv_std = inv_std.clone();
                    let vg = self.nodes[gain.0].value.clone();
                    let rows = gout.rows();
                    let d = gout.cols();

                    let mut ggain = Matrix::zeros(1, d);
                    let mut gbias = Matrix::zeros(1, d);
                    let mut gx = self.grad_or_zeros(x);
                    for r in 0..rows {
                        let gy = gout.row(r);
                        let nh = normalized.row(r);
                        let mut mean_dyh = 0.0;
                        let mut mean_dyh_nh = 0.0;
                        for j in 0..d {
                            ggain.set(0, j, ggain.get(0, j) + gy[j] * nh[j]);
                            gbias.set(0, j, gbias.get(0, j) + gy[j]);
                            let dyh = gy[j] * vg.get(0, j);
                            mean_dyh += dyh;
                            mean_dyh_nh += dyh * nh[j];
                        }
                        mean_dyh /= d as f64;
                        mean_dyh_nh /= d as f64;
                        for j in 0..d {
                            let dyh = gy[j] * vg.get(0, j);
                            let add = inv_std[r] * (dyh - mean_dyh - nh[j] * mean_dyh_nh);
                            gx.set(r, j, gx.get(r, j) + add);
                        }
                    }
                    self.grads[x.0] = Some(gx);
                    self.accumulate(gain, &ggain);
                    self.accumulate(bias, &gbias);
                }
                Op::MixRows { z, alpha } => {
                    let (z, alpha) = (*z, *alpha);
                    let b = gout.rows();
                    let mut gz = self.grad_or_zeros(z);
                    for r in 0..b {
                        let prev = (r + b - 1) % b;
                        for j in 0..gout.cols() {
                            let add = (1.0 - alpha) * gout.get(r, j) + alpha * gout.get(prev, j);
                            gz.set(r, j, gz.get(r, j) + add);
                        }
                    }
                    self.grads[z.0] = Some(gz);
                }
                Op::SumAll { a } => {
                    let a = *a;
                    let g = gout.get(0, 0);
                    let (r, c) = self.nodes[a.0].value.shape();
                    self.accumulate(a, &Matrix::filled(r, c, g));
                }
                Op::HalfSumSquares { a } => {
                    let a = *a;
                    let g = gout.get(0, 0);
                    let delta = self.nodes[a.0].value.scale(g);
                    self.accumulate(a, &delta);
                }
                Op::SoftmaxXent {
                    logits,
                    targets,
                    probs,
                } => {
                    let logits = *logits;
                    let targets = targets.clone();
                    let mut gl = probs.clone();
                    let g = gout.get(0, 0);
                    let inv_b = g / gl.rows() as f64;
                    for (r, &t) in targets.iter().enumerate() {
                        gl.set(r, t, gl.get(r, t) - 1.0);
                    }
                    gl.scale_in_place(inv_b);
                    let mut acc = self.grad_or_zeros(logits);
                    acc.axpy(1.0, &gl).expect("same shape");
                    self.grads[logits.0] = Some(acc);
                }
            }
        }
        Ok(())
    }
}
