//! Reverse-mode differentiation and the layers every model is built from.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;
pub mod tensor;

pub use graph::{sigmoid, Activation, Gradients, Graph, Var};
pub use layers::{Dense, MultiHeadAttention, TransformerEncoder};
pub use params::{LayerId, LayerParams, ParamStore};
pub use tensor::Tensor;
