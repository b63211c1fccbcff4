//! Coherent transport of one and two electrons along a chain of quantum dots,
//! watched by a charge detector on the last dot.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod entangler;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod hilbert;
pub mod model;
pub mod montecarlo;
pub mod propagate;
pub mod stats;

pub use error::{Error, Result};
