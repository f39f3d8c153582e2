//! Numerical verification of central limit theorems for linear eigenvalue
//! statistics of generalized Wigner matrices.

pub mod ensemble;
pub mod error;
pub mod harness;
pub mod locallaw;
pub mod matrix;
pub mod profile;
pub mod quadrature;
pub mod rng;
pub mod semicircle;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};

/// Library version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
