//! Tape-based reverse-mode differentiation over rank-2 tensors.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are
//! appended in evaluation order, so walking the tape backwards visits
//! each node after all of its consumers. Parameters are bound once per
//! graph: binding the same `(layer, name)` twice returns the same node,
//! which makes gradients of shared weights accumulate naturally.

use std::collections::HashMap;

use super::params::{LayerId, ParamStore};
use super::tensor::{matmul_at_acc, matmul_bt_acc, matmul_raw, pairwise_sum, Tensor};
use crate::error::{Error, Result};

/// Additive logit offset applied to masked positions before a softmax.
pub const MASK_NEG: f64 = -1e9;
/// Probability clamp used by the binary cross-entropy node.
pub const BCE_EPS: f64 = 1e-7;
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
    Relu,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    AddCol(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    SoftmaxRows(Var),
    MaskCols(Var, Vec<bool>),
    LayerNormCols {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    MeanPoolCols(Var, Vec<bool>),
    Attend(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    Embed(Var, Vec<usize>),
    Bce {
        prob: Var,
        label: f64,
        weight: f64,
    },
    Sum(Vec<Var>),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<(LayerId, &'static str), Var>,
    bound_order: Vec<(LayerId, &'static str, Var)>,
}

/// Result of a backward pass.
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    params: Vec<(LayerId, &'static str, Var)>,
}

impl Gradients {
    /// Gradient of the seed with respect to `v`; zeros when nothing flowed.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradients of bound parameters in binding order.
    pub fn params(&self) -> impl Iterator<Item = (LayerId, &'static str, Option<&[f64]>)> + '_ {
        self.params
            .iter()
            .map(move |&(l, n, v)| (l, n, self.nodes[v.0].as_deref()))
    }

    /// Adds parameter gradients into the `grad` buffers of `store`.
    pub fn accumulate_into(&self, store: &mut ParamStore) -> Result<()> {
        for (layer, name, g) in self.params() {
            let Some(g) = g else { continue };
            let t = store.layer_mut(layer).get_mut(name)?;
            match &mut t.grad {
                Some(buf) => buf.iter_mut().zip(g).for_each(|(b, x)| *b += x),
                None => t.grad = Some(g.to_vec()),
            }
        }
        Ok(())
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::matrix(n.rows, n.cols, n.value.clone()).expect("node shape is consistent")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Constant input; no gradient is propagated into it.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        let (r, c) = t.dims();
        self.push(r, c, t.data().to_vec(), Op::Leaf, false)
    }

    /// Differentiable input leaf.
    pub fn input(&mut self, t: &Tensor) -> Var {
        let (r, c) = t.dims();
        self.push(r, c, t.data().to_vec(), Op::Leaf, true)
    }

    /// Binds a parameter. Frozen layers bind as constants.
    pub fn param(&mut self, store: &ParamStore, layer: LayerId, name: &'static str) -> Result<Var> {
        if let Some(&v) = self.bound.get(&(layer, name)) {
            return Ok(v);
        }
        let lp = store.layer(layer);
        let t = lp.get(name)?;
        let (r, c) = t.dims();
        let v = self.push(r, c, t.data().to_vec(), Op::Leaf, !lp.frozen);
        self.bound.insert((layer, name), v);
        self.bound_order.push((layer, name, v));
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::shape(format!("matmul {m}×{k} · {k2}×{n}")));
        }
        let out = matmul_raw(self.value(a), self.value(b), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(m, n, out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = self.tensor(a).transpose();
        let (r, c) = t.dims();
        let rg = self.rg(a);
        self.push(r, c, t.into_data(), Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(Error::shape(format!("add {:?} + {:?}", self.dims(a), self.dims(b))));
        }
        let (r, c) = self.dims(a);
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(r, c, out, Op::Add(a, b), rg))
    }

    /// `x (m×n) + b (1×n)` broadcast over rows.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.dims(b) != (1, n) {
            return Err(Error::shape(format!("add_row {m}×{n} + {:?}", self.dims(b))));
        }
        let bv = self.value(b);
        let out = self
            .value(x)
            .chunks(n)
            .flat_map(|row| row.iter().zip(bv).map(|(v, w)| v + w))
            .collect();
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(m, n, out, Op::AddRow(x, b), rg))
    }

    /// `x (m×n) + b (m×1)` broadcast over columns.
    pub fn add_col(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.dims(b) != (m, 1) {
            return Err(Error::shape(format!("add_col {m}×{n} + {:?}", self.dims(b))));
        }
        let bv = self.value(b);
        let out = self
            .value(x)
            .chunks(n)
            .zip(bv)
            .flat_map(|(row, w)| row.iter().map(move |v| v + w))
            .collect();
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(m, n, out, Op::AddCol(x, b), rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let (m, n) = self.dims(x);
        let out = self.value(x).iter().map(|v| v * c).collect();
        let rg = self.rg(x);
        self.push(m, n, out, Op::Scale(x, c), rg)
    }

    pub fn activate(&mut self, x: Var, act: Activation) -> Var {
        let (m, n) = self.dims(x);
        let rg = self.rg(x);
        let xv = self.value(x);
        match act {
            Activation::Linear => x,
            Activation::Tanh => {
                let out = xv.iter().map(|v| v.tanh()).collect();
                self.push(m, n, out, Op::Tanh(x), rg)
            }
            Activation::Sigmoid => {
                let out = xv.iter().map(|&v| sigmoid(v)).collect();
                self.push(m, n, out, Op::Sigmoid(x), rg)
            }
            Activation::Relu => {
                let out = xv.iter().map(|v| v.max(0.0)).collect();
                self.push(m, n, out, Op::Relu(x), rg)
            }
        }
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.activate(x, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activate(x, Activation::Sigmoid)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.activate(x, Activation::Relu)
    }

    /// Row-wise softmax. Columns with `mask[j] == false` receive an
    /// additive [`MASK_NEG`] before normalization.
    pub fn softmax_rows(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        let (m, n) = self.dims(x);
        if let Some(mk) = mask {
            if mk.len() != n {
                return Err(Error::shape(format!("softmax mask length {} for {m}×{n}", mk.len())));
            }
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(m * n);
        let mut logits = vec![0.0; n];
        for row in xv.chunks(n) {
            for (j, l) in logits.iter_mut().enumerate() {
                *l = row[j] + if mask.is_some_and(|mk| !mk[j]) { MASK_NEG } else { 0.0 };
            }
            softmax_into(&logits, &mut out);
        }
        let rg = self.rg(x);
        Ok(self.push(m, n, out, Op::SoftmaxRows(x), rg))
    }

    /// Zeroes columns whose mask entry is false.
    pub fn mask_cols(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let (m, n) = self.dims(x);
        if mask.len() != n {
            return Err(Error::shape(format!("column mask length {} for {m}×{n}", mask.len())));
        }
        let out = self
            .value(x)
            .chunks(n)
            .flat_map(|row| row.iter().zip(mask).map(|(v, &k)| if k { *v } else { 0.0 }))
            .collect();
        let rg = self.rg(x);
        Ok(self.push(m, n, out, Op::MaskCols(x, mask.to_vec()), rg))
    }

    /// Normalizes every column of a d×N matrix, then applies the
    /// per-feature affine `gamma ⊙ x̂ + beta` (both d×1).
    pub fn layer_norm_cols(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (d, n) = self.dims(x);
        if self.dims(gamma) != (d, 1) || self.dims(beta) != (d, 1) {
            return Err(Error::shape(format!(
                "layer norm over {d}×{n} with gamma {:?} beta {:?}",
                self.dims(gamma),
                self.dims(beta)
            )));
        }
        let (xhat, inv_std) = normalize_columns(self.value(x), d, n);
        let g = self.value(gamma);
        let b = self.value(beta);
        let mut out = vec![0.0; d * n];
        for i in 0..d {
            for j in 0..n {
                out[i * n + j] = g[i] * xhat[i * n + j] + b[i];
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            d,
            n,
            out,
            Op::LayerNormCols {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Mean over the unmasked columns of a d×N matrix, as a 1×d row.
    pub fn mean_pool(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        let (d, n) = self.dims(x);
        if mask.len() != n {
            return Err(Error::shape(format!("pool mask length {} for {d}×{n}", mask.len())));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::domain("mean pool over an all-masked sequence"));
        }
        let xv = self.value(x);
        let out = xv
            .chunks(n)
            .map(|row| {
                let kept: Vec<f64> = row.iter().zip(mask).filter(|(_, &k)| k).map(|(v, _)| *v).collect();
                pairwise_sum(&kept) / count as f64
            })
            .collect();
        let rg = self.rg(x);
        Ok(self.push(1, d, out, Op::MeanPoolCols(x, mask.to_vec()), rg))
    }

    /// `Σ_j a_j · s_{:,j}` for weights `a` (1×T) and columns of `s` (d×T),
    /// returned as a 1×d row. Uses pairwise summation.
    pub fn attend(&mut self, a: Var, s: Var) -> Result<Var> {
        let (one, t) = self.dims(a);
        let (d, t2) = self.dims(s);
        if one != 1 || t != t2 {
            return Err(Error::shape(format!("attend weights {one}×{t} over {d}×{t2}")));
        }
        let av = self.value(a);
        let sv = self.value(s);
        let mut terms = vec![0.0; t];
        let out = (0..d)
            .map(|i| {
                for (j, term) in terms.iter_mut().enumerate() {
                    *term = av[j] * sv[i * t + j];
                }
                pairwise_sum(&terms)
            })
            .collect();
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(1, d, out, Op::Attend(a, s), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.dims(p).0)
            .ok_or_else(|| Error::shape("concat of nothing"))?;
        if parts.iter().any(|&p| self.dims(p).0 != rows) {
            return Err(Error::shape("concat_cols needs equal row counts"));
        }
        let cols: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let c = self.dims(p).1;
                out.extend_from_slice(&self.value(p)[r * c..(r + 1) * c]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.dims(p).1)
            .ok_or_else(|| Error::shape("concat of nothing"))?;
        if parts.iter().any(|&p| self.dims(p).1 != cols) {
            return Err(Error::shape("concat_rows needs equal column counts"));
        }
        let rows: usize = parts.iter().map(|&p| self.dims(p).0).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(rows, cols, out, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims(x);
        if start >= end || end > m {
            return Err(Error::shape(format!("row slice {start}..{end} of {m}×{n}")));
        }
        let out = self.value(x)[start * n..end * n].to_vec();
        let rg = self.rg(x);
        Ok(self.push(end - start, n, out, Op::SliceRows(x, start), rg))
    }

    /// Looks up rows of `table` (V×d) and lays them out as columns of a d×N matrix.
    pub fn embed(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = self.dims(table);
        if ids.is_empty() {
            return Err(Error::shape("embedding lookup of an empty sequence"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::contract(format!("token id {bad} outside vocabulary of {v}")));
        }
        let n = ids.len();
        let tv = self.value(table);
        let mut out = vec![0.0; d * n];
        for (j, &id) in ids.iter().enumerate() {
            for i in 0..d {
                out[i * n + j] = tv[id * d + i];
            }
        }
        let rg = self.rg(table);
        Ok(self.push(d, n, out, Op::Embed(table, ids.to_vec()), rg))
    }

    /// Weighted binary cross-entropy of a 1×1 probability node.
    pub fn bce(&mut self, prob: Var, label: f64, weight: f64) -> Result<Var> {
        if self.dims(prob) != (1, 1) {
            return Err(Error::shape(format!("bce expects 1×1, got {:?}", self.dims(prob))));
        }
        let loss = weighted_bce_value(self.scalar(prob), label, weight);
        let rg = self.rg(prob);
        Ok(self.push(1, 1, vec![loss], Op::Bce { prob, label, weight }, rg))
    }

    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let dims = parts
            .first()
            .map(|&p| self.dims(p))
            .ok_or_else(|| Error::shape("sum of nothing"))?;
        if parts.iter().any(|&p| self.dims(p) != dims) {
            return Err(Error::shape("sum needs equal shapes"));
        }
        let mut out = vec![0.0; dims.0 * dims.1];
        for &p in parts {
            for (o, v) in out.iter_mut().zip(self.value(p)) {
                *o += v;
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(dims.0, dims.1, out, Op::Sum(parts.to_vec()), rg))
    }

    /// Backward pass from a 1×1 node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.dims(root) != (1, 1) {
            return Err(Error::shape(format!(
                "backward from non-scalar {:?}; use backward_with",
                self.dims(root)
            )));
        }
        self.backward_with(root, &[1.0])
    }

    /// Backward pass seeding `root` with an arbitrary upstream gradient.
    pub fn backward_with(&self, root: Var, seed: &[f64]) -> Result<Gradients> {
        if seed.len() != self.nodes[root.0].value.len() {
            return Err(Error::shape("seed gradient size differs from root"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(seed.to_vec());
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            nodes: grads,
            params: self.bound_order.clone(),
        })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = cols;
                if self.rg(*a) {
                    let ga = slot(grads, *a, m * k);
                    matmul_bt_acc(ga, g, self.value(*b), m, n, k);
                }
                if self.rg(*b) {
                    let gb = slot(grads, *b, k * n);
                    matmul_at_acc(gb, self.value(*a), g, m, k, n);
                }
            }
            Op::Transpose(a) => {
                if self.rg(*a) {
                    // node is rows×cols, input is cols×rows
                    let ga = slot(grads, *a, rows * cols);
                    for i in 0..rows {
                        for j in 0..cols {
                            ga[j * rows + i] += g[i * cols + j];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.rg(*v) {
                        add_into(slot(grads, *v, g.len()), g);
                    }
                }
            }
            Op::AddRow(x, b) => {
                if self.rg(*x) {
                    add_into(slot(grads, *x, g.len()), g);
                }
                if self.rg(*b) {
                    let gb = slot(grads, *b, cols);
                    for row in g.chunks(cols) {
                        add_into(gb, row);
                    }
                }
            }
            Op::AddCol(x, b) => {
                if self.rg(*x) {
                    add_into(slot(grads, *x, g.len()), g);
                }
                if self.rg(*b) {
                    let gb = slot(grads, *b, rows);
                    for (o, row) in gb.iter_mut().zip(g.chunks(cols)) {
                        *o += row.iter().sum::<f64>();
                    }
                }
            }
            Op::Scale(x, c) => {
                if self.rg(*x) {
                    let gx = slot(grads, *x, g.len());
                    gx.iter_mut().zip(g).for_each(|(o, v)| *o += c * v);
                }
            }
            Op::Tanh(x) => {
                let gx = slot(grads, *x, g.len());
                for ((o, gv), y) in gx.iter_mut().zip(g).zip(&node.value) {
                    *o += gv * (1.0 - y * y);
                }
            }
            Op::Sigmoid(x) => {
                let gx = slot(grads, *x, g.len());
                for ((o, gv), y) in gx.iter_mut().zip(g).zip(&node.value) {
                    *o += gv * y * (1.0 - y);
                }
            }
            Op::Relu(x) => {
                let gx = slot(grads, *x, g.len());
                for ((o, gv), y) in gx.iter_mut().zip(g).zip(&node.value) {
                    if *y > 0.0 {
                        *o += gv;
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                let gx = slot(grads, *x, g.len());
                for ((grow, yrow), orow) in g.chunks(cols).zip(node.value.chunks(cols)).zip(gx.chunks_mut(cols)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for ((o, gv), y) in orow.iter_mut().zip(grow).zip(yrow) {
                        *o += y * (gv - dot);
                    }
                }
            }
            Op::MaskCols(x, mask) => {
                let gx = slot(grads, *x, g.len());
                for (orow, grow) in gx.chunks_mut(cols).zip(g.chunks(cols)) {
                    for ((o, gv), &k) in orow.iter_mut().zip(grow).zip(mask) {
                        if k {
                            *o += gv;
                        }
                    }
                }
            }
            Op::LayerNormCols {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (d, n) = (rows, cols);
                if self.rg(*beta) {
                    let gb = slot(grads, *beta, d);
                    for (o, row) in gb.iter_mut().zip(g.chunks(n)) {
                        *o += row.iter().sum::<f64>();
                    }
                }
                if self.rg(*gamma) {
                    let gg = slot(grads, *gamma, d);
                    for (i, o) in gg.iter_mut().enumerate() {
                        *o += (0..n).map(|j| g[i * n + j] * xhat[i * n + j]).sum::<f64>();
                    }
                }
                if self.rg(*x) {
                    let gam = self.value(*gamma).to_vec();
                    let gx = slot(grads, *x, d * n);
                    let df = d as f64;
                    for j in 0..n {
                        let mut sum_dh = 0.0;
                        let mut sum_dh_xh = 0.0;
                        for i in 0..d {
                            let dh = g[i * n + j] * gam[i];
                            sum_dh += dh;
                            sum_dh_xh += dh * xhat[i * n + j];
                        }
                        for i in 0..d {
                            let dh = g[i * n + j] * gam[i];
                            gx[i * n + j] += inv_std[j] / df * (df * dh - sum_dh - xhat[i * n + j] * sum_dh_xh);
                        }
                    }
                }
            }
            Op::MeanPoolCols(x, mask) => {
                let (d, n) = self.dims(*x);
                let count = mask.iter().filter(|&&m| m).count() as f64;
                let gx = slot(grads, *x, d * n);
                for i in 0..d {
                    for (j, &k) in mask.iter().enumerate() {
                        if k {
                            gx[i * n + j] += g[i] / count;
                        }
                    }
                }
            }
            Op::Attend(a, s) => {
                let (d, t) = self.dims(*s);
                if self.rg(*a) {
                    let sv = self.value(*s);
                    let ga = slot(grads, *a, t);
                    for (j, o) in ga.iter_mut().enumerate() {
                        *o += (0..d).map(|i| g[i] * sv[i * t + j]).sum::<f64>();
                    }
                }
                if self.rg(*s) {
                    let av = self.value(*a).to_vec();
                    let gs = slot(grads, *s, d * t);
                    for i in 0..d {
                        for j in 0..t {
                            gs[i * t + j] += g[i] * av[j];
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (pr, pc) = self.dims(p);
                    if self.rg(p) {
                        let gp = slot(grads, p, pr * pc);
                        for r in 0..pr {
                            add_into(&mut gp[r * pc..(r + 1) * pc], &g[r * cols + offset..r * cols + offset + pc]);
                        }
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p.0].value.len();
                    if self.rg(p) {
                        add_into(slot(grads, p, len), &g[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::SliceRows(x, start) => {
                let len = self.nodes[x.0].value.len();
                let gx = slot(grads, *x, len);
                add_into(&mut gx[start * cols..start * cols + g.len()], g);
            }
            Op::Embed(table, ids) => {
                let (v, d) = self.dims(*table);
                let n = ids.len();
                let gt = slot(grads, *table, v * d);
                for (j, &id) in ids.iter().enumerate() {
                    for i in 0..d {
                        gt[id * d + i] += g[i * n + j];
                    }
                }
            }
            Op::Bce { prob, label, weight } => {
                let p = self.scalar(*prob);
                let gp = slot(grads, *prob, 1);
                if (BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
                    gp[0] += g[0] * -weight * (label / p - (1.0 - label) / (1.0 - p));
                }
            }
            Op::Sum(parts) => {
                for &p in parts {
                    if self.rg(p) {
                        add_into(slot(grads, p, g.len()), g);
                    }
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_into(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = out.len();
    out.extend(logits.iter().map(|l| (l - max).exp()));
    let total = pairwise_sum(&out[start..]);
    for v in &mut out[start..] {
        *v /= total;
    }
}

/// Standardizes each column of a d×N buffer with population variance.
/// Returns the normalized values and the per-column `1/sqrt(var + eps)`.
pub fn normalize_columns(x: &[f64], d: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xhat = vec![0.0; d * n];
    let mut inv_std = vec![0.0; n];
    for j in 0..n {
        let mean = (0..d).map(|i| x[i * n + j]).sum::<f64>() / d as f64;
        let var = (0..d).map(|i| (x[i * n + j] - mean).powi(2)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std[j] = inv;
        for i in 0..d {
            xhat[i * n + j] = (x[i * n + j] - mean) * inv;
        }
    }
    (xhat, inv_std)
}

/// `−w·[y·ln p + (1−y)·ln(1−p)]` with `p` clamped to `[1e-7, 1−1e-7]`.
pub fn weighted_bce_value(prob: f64, label: f64, weight: f64) -> f64 {
    let p = prob.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -weight * (label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}
