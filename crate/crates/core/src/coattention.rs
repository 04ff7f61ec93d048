//! Co-attention fusion of two encoded statements.
//!
//! Given `C` (d×N, first statement) and `S` (d×T, second statement):
//!
//! ```text
//! F   = tanh(Cᵀ W_l S)                     N×T affinity
//! H_s = tanh(W_s S + (W_c C) F)            k×T
//! H_c = tanh(W_c C + (W_s S) Fᵀ)           k×N
//! a_s = softmax(w_hsᵀ H_s)                 1×T
//! a_c = softmax(w_hcᵀ H_c)                 1×N
//! ŝ   = Σ_i a_s[i] S[:, i],  ĉ = Σ_j a_c[j] C[:, j]
//! z   = [ŝ, ĉ]                             1×2d
//! ```
//!
//! Pad columns are zeroed before the affinity and receive an additive
//! `-1e9` before each softmax, so they carry no attention mass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::gradcheck::{check_gradients, DEFAULT_STEP};
use crate::autodiff::{Graph, LayerId, LayerParams, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

/// Co-attention weights: `w_l` d×d, `w_s`/`w_c` k×d, `w_hs`/`w_hc` k×1.
#[derive(Clone, Debug, PartialEq)]
pub struct CoAttentionParams {
    pub w_l: Tensor,
    pub w_s: Tensor,
    pub w_c: Tensor,
    pub w_hs: Tensor,
    pub w_hc: Tensor,
    pub k: usize,
}

impl CoAttentionParams {
    pub fn init<R: Rng>(d: usize, k: usize, rng: &mut R) -> Self {
        Self {
            w_l: Tensor::glorot(d, d, rng),
            w_s: Tensor::glorot(k, d, rng),
            w_c: Tensor::glorot(k, d, rng),
            w_hs: Tensor::glorot(k, 1, rng),
            w_hc: Tensor::glorot(k, 1, rng),
            k,
        }
    }

    pub fn d(&self) -> usize {
        self.w_l.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        let k = self.k;
        let checks = [
            ("w_l", &self.w_l, (d, d)),
            ("w_s", &self.w_s, (k, d)),
            ("w_c", &self.w_c, (k, d)),
            ("w_hs", &self.w_hs, (k, 1)),
            ("w_hc", &self.w_hc, (k, 1)),
        ];
        for (name, t, want) in checks {
            if t.dims() != want {
                return Err(Error::shape(format!("{name} is {:?}, expected {want:?}", t.dims())));
            }
        }
        Ok(())
    }

    /// Parameters for the mirrored call `coattend(S, C)`: `W_lᵀ`, with the
    /// statement-specific weights exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            w_l: self.w_l.transpose(),
            w_s: self.w_c.clone(),
            w_c: self.w_s.clone(),
            w_hs: self.w_hc.clone(),
            w_hc: self.w_hs.clone(),
            k: self.k,
        }
    }

    pub fn to_layer(&self, name: &str) -> LayerParams {
        LayerParams::new(name)
            .with("w_l", self.w_l.clone())
            .with("w_s", self.w_s.clone())
            .with("w_c", self.w_c.clone())
            .with("w_hs", self.w_hs.clone())
            .with("w_hc", self.w_hc.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoAttentionOutput {
    /// Affinity, N×T.
    pub f: Tensor,
    /// Attention over the second statement's tokens, 1×T.
    pub a_s: Tensor,
    /// Attention over the first statement's tokens, 1×N.
    pub a_c: Tensor,
    pub s_hat: Tensor,
    pub c_hat: Tensor,
    /// `[ŝ, ĉ]`, 1×2d.
    pub z: Tensor,
}

/// Graph handles for one co-attention evaluation.
#[derive(Clone, Copy, Debug)]
pub struct CoAttentionVars {
    pub f: Var,
    pub a_s: Var,
    pub a_c: Var,
    pub s_hat: Var,
    pub c_hat: Var,
    pub z: Var,
}

impl CoAttentionVars {
    pub fn read(&self, g: &Graph) -> CoAttentionOutput {
        CoAttentionOutput {
            f: g.tensor(self.f),
            a_s: g.tensor(self.a_s),
            a_c: g.tensor(self.a_c),
            s_hat: g.tensor(self.s_hat),
            c_hat: g.tensor(self.c_hat),
            z: g.tensor(self.z),
        }
    }
}

/// A co-attention layer living in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoAttention {
    pub layer: LayerId,
    pub d: usize,
    pub k: usize,
}

impl CoAttention {
    pub fn init<R: Rng>(store: &mut ParamStore, name: &str, d: usize, k: usize, rng: &mut R) -> Self {
        let layer = store.add(CoAttentionParams::init(d, k, rng).to_layer(name));
        Self { layer, d, k }
    }

    pub fn from_params(store: &mut ParamStore, name: &str, params: &CoAttentionParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            layer: store.add(params.to_layer(name)),
            d: params.d(),
            k: params.k,
        })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        c: Var,
        s: Var,
        mask_c: &[bool],
        mask_s: &[bool],
    ) -> Result<CoAttentionVars> {
        let (dc, n) = g.dims(c);
        let (ds, t) = g.dims(s);
        if dc != ds {
            return Err(Error::shape(format!("statement encodings differ in hidden size: {dc}×{n} vs {ds}×{t}")));
        }
        if dc != self.d {
            return Err(Error::shape(format!("co-attention built for d={}, got {dc}", self.d)));
        }
        if mask_c.len() != n || mask_s.len() != t {
            return Err(Error::shape(format!(
                "mask lengths {}/{} for sequences of {n}/{t}",
                mask_c.len(),
                mask_s.len()
            )));
        }
        if !mask_c.iter().any(|&m| m) || !mask_s.iter().any(|&m| m) {
            return Err(Error::domain("co-attention over a statement with no real tokens"));
        }

        let w_l = g.param(store, self.layer, "w_l")?;
        let w_s = g.param(store, self.layer, "w_s")?;
        let w_c = g.param(store, self.layer, "w_c")?;
        let w_hs = g.param(store, self.layer, "w_hs")?;
        let w_hc = g.param(store, self.layer, "w_hc")?;

        let c = g.mask_cols(c, mask_c)?;
        let s = g.mask_cols(s, mask_s)?;

        let ct = g.transpose(c);
        let ct_wl = g.matmul(ct, w_l)?;
        let aff = g.matmul(ct_wl, s)?;
        let f = g.tanh(aff);

        let ws_s = g.matmul(w_s, s)?;
        let wc_c = g.matmul(w_c, c)?;
        let cross_s = g.matmul(wc_c, f)?;
        let hs = g.add(ws_s, cross_s)?;
        let hs = g.tanh(hs);
        let ft = g.transpose(f);
        let cross_c = g.matmul(ws_s, ft)?;
        let hc = g.add(wc_c, cross_c)?;
        let hc = g.tanh(hc);

        let whs_t = g.transpose(w_hs);
        let logits_s = g.matmul(whs_t, hs)?;
        let a_s = g.softmax_rows(logits_s, Some(mask_s))?;
        let whc_t = g.transpose(w_hc);
        let logits_c = g.matmul(whc_t, hc)?;
        let a_c = g.softmax_rows(logits_c, Some(mask_c))?;

        let s_hat = g.attend(a_s, s)?;
        let c_hat = g.attend(a_c, c)?;
        let z = g.concat_cols(&[s_hat, c_hat])?;
        Ok(CoAttentionVars {
            f,
            a_s,
            a_c,
            s_hat,
            c_hat,
            z,
        })
    }
}

/// Evaluates co-attention on plain tensors.
pub fn coattend(
    c: &Tensor,
    s: &Tensor,
    params: &CoAttentionParams,
    mask_c: &[bool],
    mask_s: &[bool],
) -> Result<CoAttentionOutput> {
    params.validate()?;
    let mut store = ParamStore::new();
    let layer = CoAttention::from_params(&mut store, "coattention", params)?;
    let mut g = Graph::new();
    let cv = g.constant(c);
    let sv = g.constant(s);
    let vars = layer.forward(&mut g, &store, cv, sv, mask_c, mask_s)?;
    Ok(vars.read(&g))
}

/// Maximum relative error between analytic and central-difference
/// gradients of co-attention, over all five weights and both inputs.
pub fn coattend_gradcheck(d: usize, n: usize, t: usize, k: usize, seed: u64) -> Result<f64> {
    coattend_gradcheck_with_step(d, n, t, k, seed, DEFAULT_STEP)
}

pub fn coattend_gradcheck_with_step(d: usize, n: usize, t: usize, k: usize, seed: u64, step: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let layer = CoAttention::init(&mut store, "coattention", d, k, &mut rng);
    let c = random_matrix(d, n, &mut rng);
    let s = random_matrix(d, t, &mut rng);
    // trailing pad on the longer statement so masking is exercised
    let mask_c: Vec<bool> = (0..n).map(|j| n < 3 || j + 1 < n).collect();
    let mask_s: Vec<bool> = (0..t).map(|j| t < 3 || j + 1 < t).collect();
    let report = check_gradients(&store, &[c, s], step, seed ^ 0x9e37_79b9, |g, store, x| {
        Ok(layer.forward(g, store, x[0], x[1], &mask_c, &mask_s)?.z)
    })?;
    Ok(report.max_rel_error)
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}
