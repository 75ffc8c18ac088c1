pub mod agent;
pub mod critic;
pub mod enhance;
pub mod error;
pub mod experiment;
pub mod filters;
pub mod image;
pub mod nn;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
