//! Excess-risk decomposition, closed-form error bounds and risk experiments.

mod bounds;
mod distribution;
mod experiment;

pub use bounds::*;
pub use distribution::*;
pub use experiment::*;
