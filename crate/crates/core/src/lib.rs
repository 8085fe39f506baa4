//! Boundary-observation inverse problems for damped wave, clamped beam and
//! heat equations on an interval.

pub mod banded;
pub mod cli;
pub mod error;
pub mod forward;
pub mod grid;
pub mod observability;
pub mod operators;
pub mod reconstruct;
pub mod spectral;
pub mod volterra;

pub use error::{Error, Result};
