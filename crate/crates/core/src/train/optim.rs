use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Plain SGD or Adam with bias correction. Frozen layers and tensors
/// without a gradient are left untouched.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    step: u64,
    moments: HashMap<(usize, String), (Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one update from the `grad` buffers in `store`.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        for (li, layer) in store.layers_mut().iter_mut().enumerate() {
            if layer.frozen {
                continue;
            }
            for (name, tensor) in layer.weights.iter_mut() {
                let Some(grad) = tensor.grad.take() else { continue };
                if grad.len() != tensor.len() {
                    return Err(Error::contract(format!(
                        "gradient for {}.{name} has {} entries, tensor has {}",
                        layer.name,
                        grad.len(),
                        tensor.len()
                    )));
                }
                match self.kind {
                    OptimizerKind::Sgd => {
                        for (w, g) in tensor.data_mut().iter_mut().zip(&grad) {
                            *w -= lr * g;
                        }
                    }
                    OptimizerKind::Adam => {
                        let (m, v) = self
                            .moments
                            .entry((li, name.clone()))
                            .or_insert_with(|| (vec![0.0; grad.len()], vec![0.0; grad.len()]));
                        let c1 = 1.0 - ADAM_BETA1.powi(t);
                        let c2 = 1.0 - ADAM_BETA2.powi(t);
                        for (i, w) in tensor.data_mut().iter_mut().enumerate() {
                            let g = grad[i];
                            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                            let m_hat = m[i] / c1;
                            let v_hat = v[i] / c2;
                            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
