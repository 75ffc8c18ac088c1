//! Minimal tensor engine: reverse-mode differentiation over the handful of
//! layers the critic and the agent are built from, plus Adam.

mod adam;
pub(crate) mod conv;
mod graph;
mod params;
mod real;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamSet};
pub use real::Real;
pub use tensor::Tensor;
