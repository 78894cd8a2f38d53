pub mod autodiff;
pub mod error;
pub mod flows;
pub mod graph;
pub mod integrators;
pub mod nets;
pub mod rng;
pub mod robustness;
pub mod stability;

pub use error::{Error, Result};
