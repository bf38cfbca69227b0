//! The two architectures under study, built on the autodiff tape.
//!
//! * A 1-layer transformer over `[a, b, =]` sequences: token+position
//!   embeddings, one multi-head attention block and one ReLU FFN, both with
//!   residual connections and no normalisation by default (a pre-norm path
//!   is available behind `layer_norm`). Only the `=` position feeds the
//!   classification head, so the forward pass computes queries, the FFN and
//!   logits for that position alone — the result is identical, keys and
//!   values still see all three positions.
//! * An MLP baseline on the concatenated one-hot pair `(a, b)`: a 2p-row
//!   input table (one-hot × table = row sum), then two ReLU layers.
//!
//! Both expose the penultimate representation `z` (the input of the
//! classification head), which is what the entropy monitor probes.

use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::tape::{NodeId, Tape, TapeError};
use crate::tasks::Example;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub const SEQ_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    Tape(TapeError),
    NonFiniteActivation { tensor: &'static str },
    HeadsMustDivideWidth { d_model: usize, n_heads: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Tape(e) => write!(f, "{e}"),
            ModelError::NonFiniteActivation { tensor } => {
                write!(f, "non-finite values in {tensor}")
            }
            ModelError::HeadsMustDivideWidth { d_model, n_heads } => {
                write!(f, "d_model {d_model} not divisible by {n_heads} heads")
            }
        }
    }
}

impl core::error::Error for ModelError {}

impl From<TapeError> for ModelError {
    fn from(e: TapeError) -> Self {
        ModelError::Tape(e)
    }
}

// ── Transformer ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformerConfig {
    pub vocab: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ffn: usize,
    pub layer_norm: bool,
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(ModelError::HeadsMustDivideWidth {
                d_model: self.d_model,
                n_heads: self.n_heads,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub g1: Matrix,
    pub c1: Matrix,
    pub g2: Matrix,
    pub c2: Matrix,
}

/// All trainable tensors of the 1-layer transformer. Q/K/V/O are stored
/// fused as `[d x d]`; head `h` occupies columns `h·dh..(h+1)·dh`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParams {
    pub config: TransformerConfig,
    pub tok: Matrix,
    pub pos: Matrix,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub head: Matrix,
    pub ln: Option<LayerNormParams>,
}

// ── MLP baseline ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpConfig {
    /// Group order p: tokens a and b each index one half of the 2p-row table.
    pub group_order: usize,
    pub hidden1: usize,
    /// Penultimate width; this is the `z` the entropy monitor sees.
    pub hidden2: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub config: MlpConfig,
    pub embed: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub head: Matrix,
}

/// Either architecture, as a plain value owned by one training run.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Transformer(TransformerParams),
    Mlp(MlpParams),
}

/// Logit and penultimate-representation nodes of one forward pass, plus the
/// tape ids under which the parameters were registered (for gradient
/// extraction, in the same order as [`ModelParams::tensor_names`]).
pub struct ForwardNodes {
    pub logits: NodeId,
    pub z: NodeId,
    pub params: Vec<NodeId>,
}

impl ModelParams {
    pub fn arch_name(&self) -> &'static str {
        match self {
            ModelParams::Transformer(_) => "transformer",
            ModelParams::Mlp(_) => "mlp",
        }
    }

    /// Width of the penultimate representation.
    pub fn z_dim(&self) -> usize {
        match self {
            ModelParams::Transformer(t) => t.config.d_model,
            ModelParams::Mlp(m) => m.config.hidden2,
        }
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        match self {
            ModelParams::Transformer(t) => {
                let mut names = alloc::vec![
                    "tok", "pos", "wq", "wk", "wv", "wo", "w1", "b1", "w2", "b2", "head",
                ];
                if t.ln.is_some() {
                    names.extend_from_slice(&["ln1_g", "ln1_b", "ln2_g", "ln2_b"]);
                }
                names
            }
            ModelParams::Mlp(_) => alloc::vec!["embed", "b1", "w2", "b2", "head"],
        }
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        match self {
            ModelParams::Transformer(t) => {
                let mut v = alloc::vec![
                    &t.tok, &t.pos, &t.wq, &t.wk, &t.wv, &t.wo, &t.w1, &t.b1, &t.w2, &t.b2,
                    &t.head,
                ];
                if let Some(ln) = &t.ln {
                    v.extend_from_slice(&[&ln.g1, &ln.c1, &ln.g2, &ln.c2]);
                }
                v
            }
            ModelParams::Mlp(m) => alloc::vec![&m.embed, &m.b1, &m.w2, &m.b2, &m.head],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            ModelParams::Transformer(t) => {
                let mut v = alloc::vec![
                    &mut t.tok,
                    &mut t.pos,
                    &mut t.wq,
                    &mut t.wk,
                    &mut t.wv,
                    &mut t.wo,
                    &mut t.w1,
                    &mut t.b1,
                    &mut t.w2,
                    &mut t.b2,
                    &mut t.head,
                ];
                if let Some(ln) = &mut t.ln {
                    v.push(&mut ln.g1);
                    v.push(&mut ln.c1);
                    v.push(&mut ln.g2);
                    v.push(&mut ln.c2);
                }
                v
            }
            ModelParams::Mlp(m) => alloc::vec![
                &mut m.embed,
                &mut m.b1,
                &mut m.w2,
                &mut m.b2,
                &mut m.head
            ],
        }
    }

    /// Which tensors count as biases/norm parameters (single-row vectors);
    /// used by the optional decay exclusion.
    pub fn bias_mask(&self) -> Vec<bool> {
        self.tensors().iter().map(|m| m.rows() == 1).collect()
    }

    /// Global L2 norm over all trainable tensors.
    pub fn param_norm(&self) -> f64 {
        let sq: f64 = self
            .tensors()
            .iter()
            .map(|m| m.data().iter().map(|x| x * x).sum::<f64>())
            .sum();
        crate::math::sqrt(sq)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }

    /// Runs the architecture-appropriate forward pass.
    pub fn forward(&self, tape: &mut Tape, batch: &[Example]) -> Result<ForwardNodes, ModelError> {
        match self {
            ModelParams::Transformer(t) => forward_transformer(tape, t, batch),
            ModelParams::Mlp(m) => forward_mlp(tape, m, batch),
        }
    }
}

/// Scaled-normal initialisation: embeddings at std 0.02, projections at
/// std `1/√fan_in`, biases zero, layer-norm gains one. Tensors are drawn
/// from the `(seed, "init")` substream in declaration order.
pub fn init_transformer(config: TransformerConfig, seed: u64) -> Result<TransformerParams, ModelError> {
    config.validate()?;
    let mut rng = Rng::substream(seed, "init");
    let d = config.d_model;
    let f = config.d_ffn;
    let v = config.vocab;
    let mut normal = |rows: usize, cols: usize, std: f64| {
        Matrix::from_fn(rows, cols, |_, _| rng.next_normal() * std)
    };
    let tok = normal(v, d, 0.02);
    let pos = normal(SEQ_LEN, d, 0.02);
    let proj_std = 1.0 / crate::math::sqrt(d as f64);
    let wq = normal(d, d, proj_std);
    let wk = normal(d, d, proj_std);
    let wv = normal(d, d, proj_std);
    let wo = normal(d, d, proj_std);
    let w1 = normal(d, f, proj_std);
    let w2 = normal(f, d, 1.0 / crate::math::sqrt(f as f64));
    let head = normal(d, v, proj_std);
    let ln = config.layer_norm.then(|| LayerNormParams {
        g1: Matrix::filled(1, d, 1.0),
        c1: Matrix::zeros(1, d),
        g2: Matrix::filled(1, d, 1.0),
        c2: Matrix::zeros(1, d),
    });
    Ok(TransformerParams {
        config,
        tok,
        pos,
        wq,
        wk,
        wv,
        wo,
        w1,
        b1: Matrix::zeros(1, f),
        w2,
        b2: Matrix::zeros(1, d),
        head,
        ln,
    })
}

pub fn init_mlp(config: MlpConfig, seed: u64) -> MlpParams {
    let mut rng = Rng::substream(seed, "init");
    let mut normal = |rows: usize, cols: usize, std: f64| {
        Matrix::from_fn(rows, cols, |_, _| rng.next_normal() * std)
    };
    let embed = normal(2 * config.group_order, config.hidden1, 0.02);
    let w2 = normal(
        config.hidden1,
        config.hidden2,
        1.0 / crate::math::sqrt(config.hidden1 as f64),
    );
    let head = normal(
        config.hidden2,
        config.classes,
        1.0 / crate::math::sqrt(config.hidden2 as f64),
    );
    MlpParams {
        config,
        embed,
        b1: Matrix::zeros(1, config.hidden1),
        w2,
        b2: Matrix::zeros(1, config.hidden2),
        head,
    }
}

fn check_finite(m: &Matrix, tensor: &'static str) -> Result<(), ModelError> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFiniteActivation { tensor })
    }
}

/// One attention block plus FFN, residuals throughout, readout at `=`.
pub fn forward_transformer(
    tape: &mut Tape,
    params: &TransformerParams,
    batch: &[Example],
) -> Result<ForwardNodes, ModelError> {
    params.config.validate()?;
    let b = batch.len();
    let d = params.config.d_model;

    let tok = tape.leaf(params.tok.clone());
    let pos = tape.leaf(params.pos.clone());
    let wq = tape.leaf(params.wq.clone());
    let wk = tape.leaf(params.wk.clone());
    let wv = tape.leaf(params.wv.clone());
    let wo = tape.leaf(params.wo.clone());
    let w1 = tape.leaf(params.w1.clone());
    let b1 = tape.leaf(params.b1.clone());
    let w2 = tape.leaf(params.w2.clone());
    let b2 = tape.leaf(params.b2.clone());
    let head = tape.leaf(params.head.clone());
    let mut param_ids = alloc::vec![tok, pos, wq, wk, wv, wo, w1, b1, w2, b2, head];
    let ln_ids = params.ln.as_ref().map(|ln| {
        let g1 = tape.leaf(ln.g1.clone());
        let c1 = tape.leaf(ln.c1.clone());
        let g2 = tape.leaf(ln.g2.clone());
        let c2 = tape.leaf(ln.c2.clone());
        param_ids.extend_from_slice(&[g1, c1, g2, c2]);
        (g1, c1, g2, c2)
    });

    let mut tok_idx = Vec::with_capacity(b * SEQ_LEN);
    let mut pos_idx = Vec::with_capacity(b * SEQ_LEN);
    for e in batch {
        tok_idx.extend_from_slice(&e.tokens);
        pos_idx.extend_from_slice(&[0, 1, 2]);
    }
    let x_tok = tape.gather_rows(tok, tok_idx)?;
    let x_pos = tape.gather_rows(pos, pos_idx)?;
    let x = tape.add(x_tok, x_pos)?;

    let attn_src = match ln_ids {
        Some((g1, c1, _, _)) => tape.layer_norm(x, g1, c1)?,
        None => x,
    };
    let eq_idx: Vec<usize> = (0..b).map(|i| i * SEQ_LEN + SEQ_LEN - 1).collect();
    let x_eq = tape.gather_rows(x, eq_idx.clone())?;
    let q_src = tape.gather_rows(attn_src, eq_idx)?;

    let q = tape.matmul(q_src, wq)?;
    let k = tape.matmul(attn_src, wk)?;
    let v = tape.matmul(attn_src, wv)?;
    let att = tape.attention(q, k, v, params.config.n_heads, SEQ_LEN)?;
    let o = tape.matmul(att, wo)?;
    let h = tape.add(x_eq, o)?;

    let ffn_src = match ln_ids {
        Some((_, _, g2, c2)) => tape.layer_norm(h, g2, c2)?,
        None => h,
    };
    let f_pre = tape.matmul(ffn_src, w1)?;
    let f_b = tape.add_bias(f_pre, b1)?;
    let f_act = tape.relu(f_b);
    let f_out = tape.matmul(f_act, w2)?;
    let f_res = tape.add_bias(f_out, b2)?;
    let z = tape.add(h, f_res)?;
    let logits = tape.matmul(z, head)?;

    check_finite(tape.value(z), "z")?;
    check_finite(tape.value(logits), "logits")?;
    debug_assert_eq!(tape.value(z).shape(), (b, d));
    Ok(ForwardNodes {
        logits,
        z,
        params: param_ids,
    })
}

/// Two ReLU layers over the summed pair embeddings; `z` is the second layer.
pub fn forward_mlp(
    tape: &mut Tape,
    params: &MlpParams,
    batch: &[Example],
) -> Result<ForwardNodes, ModelError> {
    let p = params.config.group_order;

    let embed = tape.leaf(params.embed.clone());
    let b1 = tape.leaf(params.b1.clone());
    let w2 = tape.leaf(params.w2.clone());
    let b2 = tape.leaf(params.b2.clone());
    let head = tape.leaf(params.head.clone());
    let param_ids = alloc::vec![embed, b1, w2, b2, head];

    let idx_a: Vec<usize> = batch.iter().map(|e| e.tokens[0]).collect();
    let idx_b: Vec<usize> = batch.iter().map(|e| p + e.tokens[1]).collect();
    let ea = tape.gather_rows(embed, idx_a)?;
    let eb = tape.gather_rows(embed, idx_b)?;
    let sum = tape.add(ea, eb)?;
    let pre1 = tape.add_bias(sum, b1)?;
    let h1 = tape.relu(pre1);
    let pre2 = tape.matmul(h1, w2)?;
    let pre2b = tape.add_bias(pre2, b2)?;
    let z = tape.relu(pre2b);
    let logits = tape.matmul(z, head)?;

    check_finite(tape.value(z), "z")?;
    check_finite(tape.value(logits), "logits")?;
    Ok(ForwardNodes {
        logits,
        z,
        params: param_ids,
    })
}

// ── Checkpoint text format ───────────────────────────────────────────────────

/// Bit-exact tensor blocks: one `tensor <name> <rows> <cols>` line, then one
/// line per row of space-separated hex `f64::to_bits` words.
pub fn write_tensor_block(out: &mut String, name: &str, m: &Matrix) {
    out.push_str(&format!("tensor {} {} {}\n", name, m.rows(), m.cols()));
    for i in 0..m.rows() {
        let mut first = true;
        for v in m.row(i) {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{:016x}", v.to_bits()));
            first = false;
        }
        out.push('\n');
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointError {
    BadHeader,
    BadTensorBlock(String),
    MissingField(String),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::BadHeader => write!(f, "unrecognised checkpoint header"),
            CheckpointError::BadTensorBlock(s) => write!(f, "malformed tensor block: {s}"),
            CheckpointError::MissingField(s) => write!(f, "missing checkpoint field: {s}"),
        }
    }
}

impl core::error::Error for CheckpointError {}

/// Parses a `tensor` block starting at `lines[*cursor]`; advances the cursor.
pub fn read_tensor_block(
    lines: &[&str],
    cursor: &mut usize,
) -> Result<(String, Matrix), CheckpointError> {
    let header = lines
        .get(*cursor)
        .ok_or_else(|| CheckpointError::BadTensorBlock("eof".into()))?;
    let mut it = header.split_whitespace();
    if it.next() != Some("tensor") {
        return Err(CheckpointError::BadTensorBlock((*header).into()));
    }
    let name = it
        .next()
        .ok_or_else(|| CheckpointError::BadTensorBlock((*header).into()))?;
    let rows: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CheckpointError::BadTensorBlock((*header).into()))?;
    let cols: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CheckpointError::BadTensorBlock((*header).into()))?;
    *cursor += 1;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines
            .get(*cursor)
            .ok_or_else(|| CheckpointError::BadTensorBlock("truncated rows".into()))?;
        for word in line.split_whitespace() {
            let bits = u64::from_str_radix(word, 16)
                .map_err(|_| CheckpointError::BadTensorBlock((*line).into()))?;
            data.push(f64::from_bits(bits));
        }
        *cursor += 1;
    }
    let m = Matrix::from_vec(rows, cols, data)
        .map_err(|e| CheckpointError::BadTensorBlock(format!("{e}")))?;
    Ok((name.into(), m))
}
