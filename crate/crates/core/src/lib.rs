pub mod autodiff;
pub mod coattention;
pub mod config;
pub mod data;
pub mod error;
pub mod explain;
pub mod linguistics;
pub mod metrics;
pub mod model;
pub mod text;
pub mod train;

pub use error::{Error, Result};
