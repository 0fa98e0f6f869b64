//! Dense operator substrate: embeddings, partial traces, spectral calculus and
//! matrix exponentials.

pub mod dense;
pub mod expm;
pub mod interval;
pub mod operator;
pub mod spectral;
pub mod tensor;

pub use expm::{exp_herm, expm, mat_exp, mat_exp_herm};
pub use interval::Interval;
pub use operator::{LocalOperator, MAX_DIM};
pub use spectral::{herm_spectral, spectral_projection, Basis, HermEigen, RealSet, TAU_HERM};
