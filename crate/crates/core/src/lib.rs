//! Projected subgradient methods on nonsmooth convex losses, with
//! coupled-trajectory measurement of uniform argument stability.

pub mod config;
pub mod dp;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod optimizers;
pub mod risk;
pub mod rng;
pub mod selfcheck;
pub mod space;
pub mod stability;
pub mod trials;

pub use error::{Error, Result};
