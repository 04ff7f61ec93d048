//! Perturbation sampling and the locality-weighted linear surrogate.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 5000;
pub const DEFAULT_SIGMA: f64 = 0.75;
pub const DEFAULT_RIDGE: f64 = 1e-3;
pub const DEFAULT_MAX_FEATURES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSample {
    /// `true` = token kept.
    pub mask: Vec<bool>,
    pub model_prob: f64,
    pub proximity_weight: f64,
}

/// Draws `n_samples` masks over `n_tokens` tokens. The first mask keeps
/// everything; each other mask drops a uniformly chosen number (1..=n) of
/// uniformly chosen positions.
pub fn perturb(n_tokens: usize, n_samples: usize, seed: u64) -> Result<Vec<Vec<bool>>> {
    if n_tokens == 0 {
        return Err(Error::domain("nothing to perturb: zero tokens"));
    }
    if n_samples == 0 {
        return Err(Error::contract("n_samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_samples);
    out.push(vec![true; n_tokens]);
    for _ in 1..n_samples {
        let drop = rng.gen_range(1..=n_tokens);
        let mut mask = vec![true; n_tokens];
        for i in sample(&mut rng, n_tokens, drop) {
            mask[i] = false;
        }
        out.push(mask);
    }
    Ok(out)
}

/// Cosine distance between `mask` and the all-ones mask. An empty mask
/// has no direction and is put at distance 1.
pub fn cosine_distance(mask: &[bool]) -> f64 {
    let kept = mask.iter().filter(|&&m| m).count();
    if kept == 0 {
        return 1.0;
    }
    1.0 - (kept as f64 / mask.len() as f64).sqrt()
}

/// Kernel weight `exp(−D²/σ²)`.
pub fn proximity(mask: &[bool], sigma: f64) -> f64 {
    let d = cosine_distance(mask);
    (-(d * d) / (sigma * sigma)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    /// Selected feature indices with their coefficients, in selection order.
    pub coefficients: Vec<(usize, f64)>,
    pub intercept: f64,
    /// Weighted R² of the surrogate on the samples.
    pub r2: f64,
}

/// Weighted, centered second moments of the design.
struct Moments {
    /// Σw·(x−x̄)(x−x̄)ᵀ, row-major p×p.
    gram: Vec<f64>,
    /// Σw·(x−x̄)(y−ȳ).
    xy: Vec<f64>,
    /// Σw·(y−ȳ)².
    yy: f64,
    x_mean: Vec<f64>,
    y_mean: f64,
    p: usize,
}

fn moments(samples: &[PerturbationSample]) -> Moments {
    let p = samples[0].mask.len();
    let w_sum: f64 = samples.iter().map(|s| s.proximity_weight).sum();
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for s in samples {
        for (j, &m) in s.mask.iter().enumerate() {
            if m {
                x_mean[j] += s.proximity_weight;
            }
        }
        y_mean += s.proximity_weight * s.model_prob;
    }
    x_mean.iter_mut().for_each(|v| *v /= w_sum);
    y_mean /= w_sum;

    let mut gram = vec![0.0; p * p];
    let mut xy = vec![0.0; p];
    let mut yy = 0.0;
    let mut xc = vec![0.0; p];
    for s in samples {
        let w = s.proximity_weight;
        let yc = s.model_prob - y_mean;
        for j in 0..p {
            xc[j] = f64::from(u8::from(s.mask[j])) - x_mean[j];
        }
        for a in 0..p {
            let wa = w * xc[a];
            xy[a] += wa * yc;
            for b in a..p {
                gram[a * p + b] += wa * xc[b];
            }
        }
        yy += w * yc * yc;
    }
    // a constant output would otherwise leave rounding residue in yy
    if samples.iter().all(|s| s.model_prob == samples[0].model_prob) {
        yy = 0.0;
    }
    for a in 0..p {
        for b in 0..a {
            gram[a * p + b] = gram[b * p + a];
        }
    }
    Moments {
        gram,
        xy,
        yy,
        x_mean,
        y_mean,
        p,
    }
}

/// Solves the symmetric positive definite system `a·x = b` (Cholesky).
fn solve_spd(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::domain("surrogate normal equations are not positive definite"));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Ok(x)
}

/// Ridge fit on the features in `set`; returns (coefficients, SSE).
fn ridge(m: &Moments, set: &[usize], lambda: f64) -> Result<(Vec<f64>, f64)> {
    let k = set.len();
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for (i, &fi) in set.iter().enumerate() {
        b[i] = m.xy[fi];
        for (j, &fj) in set.iter().enumerate() {
            a[i * k + j] = m.gram[fi * m.p + fj];
        }
        a[i * k + i] += lambda;
    }
    let beta = solve_spd(&a, &b)?;
    let mut sse = m.yy;
    for i in 0..k {
        sse -= 2.0 * beta[i] * b[i];
        for j in 0..k {
            sse += beta[i] * (a[i * k + j] - if i == j { lambda } else { 0.0 }) * beta[j];
        }
    }
    Ok((beta, sse.max(0.0)))
}

fn r2(m: &Moments, sse: f64) -> f64 {
    if m.yy > 0.0 {
        1.0 - sse / m.yy
    } else {
        1.0
    }
}

/// Greedy forward selection of up to `max_features` features by weighted
/// fit, then a weighted ridge regression (unpenalized intercept) on the
/// selected mask bits.
pub fn fit_surrogate(samples: &[PerturbationSample], max_features: usize, lambda: f64) -> Result<Surrogate> {
    let Some(first) = samples.first() else {
        return Err(Error::contract("no samples"));
    };
    let p = first.mask.len();
    if samples.iter().any(|s| s.mask.len() != p) {
        return Err(Error::contract("masks differ in length"));
    }
    if samples.len() < max_features.min(p) + 1 {
        return Err(Error::contract(format!(
            "{} samples cannot support {} features",
            samples.len(),
            max_features.min(p)
        )));
    }
    if samples.iter().all(|s| s.mask == first.mask) {
        return Err(Error::domain("degenerate design: every perturbation mask is identical"));
    }
    if samples.iter().any(|s| s.proximity_weight.is_nan() || s.proximity_weight <= 0.0 || !s.model_prob.is_finite()) {
        return Err(Error::contract("weights must be positive and outputs finite"));
    }
    let m = moments(samples);
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..p).collect();
    while selected.len() < max_features.min(p) {
        let mut best: Option<(usize, f64)> = None;
        for (ri, &f) in remaining.iter().enumerate() {
            let mut trial = selected.clone();
            trial.push(f);
            let (_, sse) = ridge(&m, &trial, lambda)?;
            if best.is_none_or(|(_, b)| sse < b) {
                best = Some((ri, sse));
            }
        }
        let (ri, _) = best.expect("remaining is non-empty");
        selected.push(remaining.remove(ri));
    }
    let (beta, sse) = ridge(&m, &selected, lambda)?;
    let intercept = m.y_mean - selected.iter().zip(&beta).map(|(&f, b)| b * m.x_mean[f]).sum::<f64>();
    Ok(Surrogate {
        coefficients: selected.into_iter().zip(beta).collect(),
        intercept,
        r2: r2(&m, sse),
    })
}
