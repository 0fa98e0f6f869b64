//! Large-deviation numerics for quantum spin chains.
//!
//! The crate computes logarithmic moment generating functions, rate functions
//! and exact finite-volume distributions of energy-density observables for
//! finite-volume Gibbs states and finitely correlated states on a
//! one-dimensional lattice. Every quantity is evaluated on a finite window of
//! sites with dense linear algebra.
//!
//! Tensor factors are ordered by site index: the leftmost (smallest) site of a
//! window is the most significant factor of the matrix index.

pub mod chain;
pub mod error;
pub mod expansional;
pub mod kernel;
pub mod ldp;
pub mod models;
pub mod numeric;
pub mod states;
pub mod transfer;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use faer::{c64, Mat};
pub use kernel::{Interval, LocalOperator};
