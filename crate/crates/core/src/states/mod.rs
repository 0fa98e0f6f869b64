//! Finite-volume Gibbs states and finitely correlated states.

pub mod fcs;
pub mod file;
pub mod gibbs;

pub use fcs::{ChannelSpectrum, FcsTriple, Primitivity, L_MAX, TAU_PERIPH, TRIPLE_TOL};
pub use gibbs::{gibbs_density, log_partition, state_sandwich_check, GibbsFiniteState};
