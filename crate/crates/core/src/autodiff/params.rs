use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Named weights of one layer. Frozen layers are skipped by every optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub name: String,
    pub weights: BTreeMap<String, Tensor>,
    pub frozen: bool,
}

impl LayerParams {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            weights: BTreeMap::new(),
            frozen: false,
        }
    }

    /// Adds a weight; names must be unique within the layer.
    pub fn with(mut self, name: &str, mut t: Tensor) -> Self {
        assert!(
            !self.weights.contains_key(name),
            "duplicate parameter {name} in layer {}",
            self.name
        );
        t.requires_grad = true;
        self.weights.insert(name.to_string(), t);
        self
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.weights
            .get(name)
            .ok_or_else(|| Error::contract(format!("layer {} has no parameter {name}", self.name)))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        let layer = self.name.clone();
        self.weights
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("layer {layer} has no parameter {name}")))
    }

    pub fn num_params(&self) -> usize {
        self.weights.values().map(Tensor::len).sum()
    }
}

/// Index of a layer inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LayerId(pub usize);

/// Owns every layer of a model. Layers are referred to by [`LayerId`],
/// so a component used twice (siamese encoders) binds the same storage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    layers: Vec<LayerParams>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, layer: LayerParams) -> LayerId {
        assert!(
            self.layers.iter().all(|l| l.name != layer.name),
            "duplicate layer name {}",
            layer.name
        );
        self.layers.push(layer);
        LayerId(self.layers.len() - 1)
    }

    pub fn layer(&self, id: LayerId) -> &LayerParams {
        &self.layers[id.0]
    }

    pub fn layer_mut(&mut self, id: LayerId) -> &mut LayerParams {
        &mut self.layers[id.0]
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn find(&self, name: &str) -> Option<LayerId> {
        self.layers.iter().position(|l| l.name == name).map(LayerId)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerParams::num_params).sum()
    }

    pub fn set_frozen_where(&mut self, frozen: bool, pred: impl Fn(&str) -> bool) {
        for l in &mut self.layers {
            if pred(&l.name) {
                l.frozen = frozen;
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            for t in l.weights.values_mut() {
                t.grad = None;
            }
        }
    }

    /// Copies weight values from `other`, which must have identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        self.check_layout(other)?;
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in dst.weights.values_mut().zip(src.weights.values()) {
                a.data_mut().copy_from_slice(b.data());
            }
        }
        Ok(())
    }

    pub fn check_layout(&self, other: &ParamStore) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape(format!(
                "expected {} layers, found {}",
                self.layers.len(),
                other.layers.len()
            )));
        }
        for (a, b) in self.layers.iter().zip(&other.layers) {
            if a.name != b.name {
                return Err(Error::shape(format!("layer {} vs {}", a.name, b.name)));
            }
            if a.weights.len() != b.weights.len() {
                return Err(Error::shape(format!("layer {}: parameter count differs", a.name)));
            }
            for ((na, ta), (nb, tb)) in a.weights.iter().zip(&b.weights) {
                if na != nb || ta.shape() != tb.shape() {
                    return Err(Error::shape(format!(
                        "layer {}: {na}{:?} vs {nb}{:?}",
                        a.name,
                        ta.shape(),
                        tb.shape()
                    )));
                }
            }
        }
        Ok(())
    }
}
