//! Central finite-difference gradient checking.
//!
//! The checked scalar is `L = Σ r ⊙ f(θ, x)` for a fixed random `r`, so
//! outputs whose plain sum is constant (softmax rows) still carry signal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;
/// Denominator floor for the relative error; below it the comparison
/// is effectively absolute.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Location of the worst entry, e.g. `coattention.w_l[3]` or `input1[0]`.
    pub worst: String,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients of `f` against central differences over
/// every trainable parameter `f` binds and every entry of `inputs`.
pub fn check_gradients<F>(store: &ParamStore, inputs: &[Tensor], step: f64, seed: u64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore, &[Var]) -> Result<Var>,
{
    let eval = |store: &ParamStore, inputs: &[Tensor], proj: Option<&[f64]>| -> Result<(Graph, Var, Vec<Var>, f64)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.input(t)).collect();
        let out = f(&mut g, store, &vars)?;
        let loss = proj.map_or(0.0, |r| g.value(out).iter().zip(r).map(|(a, b)| a * b).sum());
        Ok((g, out, vars, loss))
    };

    let (g, out, vars, _) = eval(store, inputs, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj: Vec<f64> = (0..g.value(out).len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grads = g.backward_with(out, &proj)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    let record = |report: &mut GradCheckReport, what: String, a: f64, n: f64| {
        let e = relative_error(a, n);
        report.checked += 1;
        if e > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = e;
            report.worst = what;
        }
    };

    let bound: Vec<_> = grads
        .params()
        .filter(|(l, _, _)| !store.layer(*l).frozen)
        .map(|(l, n, g)| (l, n, g.map(<[f64]>::to_vec)))
        .collect();
    for (layer, name, analytic) in bound {
        let len = store.layer(layer).get(name)?.len();
        let analytic = analytic.unwrap_or_else(|| vec![0.0; len]);
        for (i, &a) in analytic.iter().enumerate() {
            let mut probe = store.clone();
            let base = probe.layer(layer).get(name)?.data()[i];
            probe.layer_mut(layer).get_mut(name)?.data_mut()[i] = base + step;
            let plus = eval(&probe, inputs, Some(&proj))?.3;
            probe.layer_mut(layer).get_mut(name)?.data_mut()[i] = base - step;
            let minus = eval(&probe, inputs, Some(&proj))?.3;
            let what = format!("{}.{name}[{i}]", store.layer(layer).name);
            record(&mut report, what, a, (plus - minus) / (2.0 * step));
        }
    }

    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
        for (i, &a) in analytic.iter().enumerate() {
            let mut probe = inputs.to_vec();
            let base = t.data()[i];
            probe[k].data_mut()[i] = base + step;
            let plus = eval(store, &probe, Some(&proj))?.3;
            probe[k].data_mut()[i] = base - step;
            let minus = eval(store, &probe, Some(&proj))?.3;
            record(&mut report, format!("input{k}[{i}]"), a, (plus - minus) / (2.0 * step));
        }
    }
    Ok(report)
}
