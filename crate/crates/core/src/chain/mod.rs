//! Translation-invariant finite-range interactions, their Hamiltonians,
//! surface terms and variation seminorms.

pub mod boundary;
pub mod file;
pub mod interaction;
pub mod variation;

pub use boundary::{boundary_terms, BoundaryKind, Side};
pub use interaction::{Interaction, Term};
pub use variation::{theta_norm, variation_seminorm};
