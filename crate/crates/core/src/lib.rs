//! Adapted bubbles and the H-energy on flat unit-area tori, with the
//! Łojasiewicz exponent calculus and a reproducible experiment harness.

pub mod bubbles;
pub mod config;
pub mod energy;
pub mod error;
pub mod field;
pub mod green;
pub mod harness;
pub mod lattice;
pub mod loj;
pub mod random;
pub mod report;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
