//! Stability bounds and their empirical counterparts.

mod bounds;
mod estimate;
mod lower;

pub use bounds::*;
pub use estimate::*;
pub use lower::*;
