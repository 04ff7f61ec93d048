//! Layers assembled from graph primitives. Sequence tensors use the
//! column layout `d×N`: one column per token.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Activation, Graph, Var};
use super::params::{LayerId, LayerParams, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Fully connected layer over a row vector: `act(x·W + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub layer: LayerId,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let layer = store.add(
            LayerParams::new(name)
                .with("w", Tensor::glorot(input, output, rng))
                .with("b", Tensor::zeros(1, output)),
        );
        Self {
            layer,
            input,
            output,
            activation,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        dense(g, store, self.layer, x, self.activation)
    }
}

/// `activation(x·W + b)` using weights `w` and `b` of `layer`.
pub fn dense(g: &mut Graph, store: &ParamStore, layer: LayerId, x: Var, activation: Activation) -> Result<Var> {
    let w = g.param(store, layer, "w")?;
    let b = g.param(store, layer, "b")?;
    let (_, width) = g.dims(x);
    let (w_in, _) = g.dims(w);
    if width != w_in {
        return Err(Error::shape(format!(
            "dense layer {} expects width {w_in}, got {width}",
            store.layer(layer).name
        )));
    }
    let h = g.matmul(x, w)?;
    let h = g.add_row(h, b)?;
    Ok(g.activate(h, activation))
}

/// Scaled dot-product self-attention with `heads` heads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiHeadAttention {
    pub layer: LayerId,
    pub d: usize,
    pub heads: usize,
}

/// Output of [`MultiHeadAttention::forward`] with per-head attention
/// matrices (N×N, row `i` is the distribution of query `i` over keys).
pub struct AttentionOutput {
    pub output: Var,
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn init<R: Rng>(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut R) -> Result<Self> {
        check_heads(d, heads)?;
        let mut lp = LayerParams::new(name);
        // no key bias: it shifts every score of a query equally, which softmax ignores
        for w in ["wq", "wk", "wv", "wo"] {
            lp = lp.with(w, Tensor::glorot(d, d, rng));
        }
        for b in ["bq", "bv", "bo"] {
            lp = lp.with(b, Tensor::zeros(d, 1));
        }
        Ok(Self {
            layer: store.add(lp),
            d,
            heads,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, mask: &[bool]) -> Result<AttentionOutput> {
        let (d, n) = g.dims(x);
        if d != self.d {
            return Err(Error::shape(format!("attention over d={d}, configured for {}", self.d)));
        }
        let q = affine(g, store, self.layer, "wq", "bq", x)?;
        let wk = g.param(store, self.layer, "wk")?;
        let k = g.matmul(wk, x)?;
        let v = affine(g, store, self.layer, "wv", "bv", x)?;
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_rows(q, h * dh, (h + 1) * dh)?;
            let kh = g.slice_rows(k, h * dh, (h + 1) * dh)?;
            let vh = g.slice_rows(v, h * dh, (h + 1) * dh)?;
            let qt = g.transpose(qh);
            let scores = g.matmul(qt, kh)?;
            let scores = g.scale(scores, scale);
            let a = g.softmax_rows(scores, Some(mask))?;
            let at = g.transpose(a);
            outs.push(g.matmul(vh, at)?);
            weights.push(a);
        }
        let cat = if outs.len() == 1 { outs[0] } else { g.concat_rows(&outs)? };
        let output = affine(g, store, self.layer, "wo", "bo", cat)?;
        debug_assert_eq!(g.dims(output), (d, n));
        Ok(AttentionOutput { output, weights })
    }
}

fn check_heads(d: usize, heads: usize) -> Result<()> {
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::config(format!("hidden size {d} is not divisible by {heads} heads")));
    }
    Ok(())
}

/// `W·x + b` for column-layout `x`.
fn affine(g: &mut Graph, store: &ParamStore, layer: LayerId, w: &'static str, b: &'static str, x: Var) -> Result<Var> {
    let wv = g.param(store, layer, w)?;
    let bv = g.param(store, layer, b)?;
    let h = g.matmul(wv, x)?;
    g.add_col(h, bv)
}

/// One post-norm transformer encoder block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderBlock {
    pub attention: MultiHeadAttention,
    pub norm1: LayerId,
    pub ffn: LayerId,
    pub norm2: LayerId,
}

/// Feed-forward inner width relative to the model width.
pub const FFN_MULTIPLIER: usize = 4;

impl EncoderBlock {
    pub fn init<R: Rng>(store: &mut ParamStore, prefix: &str, d: usize, heads: usize, rng: &mut R) -> Result<Self> {
        let attention = MultiHeadAttention::init(store, &format!("{prefix}.attn"), d, heads, rng)?;
        let norm1 = store.add(norm_params(&format!("{prefix}.ln1"), d));
        let inner = FFN_MULTIPLIER * d;
        let ffn = store.add(
            LayerParams::new(format!("{prefix}.ffn"))
                .with("w1", Tensor::glorot(inner, d, rng))
                .with("b1", Tensor::zeros(inner, 1))
                .with("w2", Tensor::glorot(d, inner, rng))
                .with("b2", Tensor::zeros(d, 1)),
        );
        let norm2 = store.add(norm_params(&format!("{prefix}.ln2"), d));
        Ok(Self {
            attention,
            norm1,
            ffn,
            norm2,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, mask: &[bool]) -> Result<Var> {
        let att = self.attention.forward(g, store, x, mask)?.output;
        let r1 = g.add(x, att)?;
        let y = layer_norm(g, store, self.norm1, r1)?;
        let h = affine(g, store, self.ffn, "w1", "b1", y)?;
        let h = g.relu(h);
        let f = affine(g, store, self.ffn, "w2", "b2", h)?;
        let r2 = g.add(y, f)?;
        layer_norm(g, store, self.norm2, r2)
    }
}

fn norm_params(name: &str, d: usize) -> LayerParams {
    LayerParams::new(name)
        .with("gamma", Tensor::filled(d, 1, 1.0))
        .with("beta", Tensor::zeros(d, 1))
}

fn layer_norm(g: &mut Graph, store: &ParamStore, layer: LayerId, x: Var) -> Result<Var> {
    let gamma = g.param(store, layer, "gamma")?;
    let beta = g.param(store, layer, "beta")?;
    g.layer_norm_cols(x, gamma, beta)
}

/// A stack of encoder blocks sharing one width and head count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerEncoder {
    pub blocks: Vec<EncoderBlock>,
    pub d: usize,
    pub heads: usize,
}

impl TransformerEncoder {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        layers: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_heads(d, heads)?;
        let blocks = (0..layers)
            .map(|i| EncoderBlock::init(store, &format!("{prefix}.block{i}"), d, heads, rng))
            .collect::<Result<_>>()?;
        Ok(Self { blocks, d, heads })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, mask: &[bool]) -> Result<Var> {
        self.blocks
            .iter()
            .try_fold(x, |h, block| block.forward(g, store, h, mask))
    }

    pub fn layer_ids(&self) -> Vec<LayerId> {
        self.blocks
            .iter()
            .flat_map(|b| [b.attention.layer, b.norm1, b.ffn, b.norm2])
            .collect()
    }
}

/// Fixed sinusoidal position encodings as a d×N matrix.
pub fn sinusoidal_positions(d: usize, n: usize) -> Tensor {
    let mut t = Tensor::zeros(d, n);
    for pos in 0..n {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d as f64);
            t.set(i, pos, if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    t
}
