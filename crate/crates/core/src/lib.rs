//! Computable Hardy-space machinery on the n-torus with an ordered dual lattice.

pub mod atoms;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod hankel;
pub mod lacunary;
pub mod lattice;
pub mod multiplier;
pub mod nehari;
pub mod report;
pub mod trigpoly;

pub use error::{Error, Result};
