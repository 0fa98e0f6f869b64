//! Moment generating functions, rate functions, spectral measures and the
//! equivalence-of-ensembles diagnostics.

pub mod ensembles;
pub mod legendre;
pub mod measure;
pub mod moments;

pub use ensembles::{canonical_entropy_residual, ensembles_equivalence, EnsembleRow, EnsemblesReport};
pub use legendre::{legendre_on_grid, legendre_transform, RateCurve};
pub use measure::{ldp_bounds_check, spectral_measure, BoundsReport, SpectralMeasure, TAU_DEGEN};
pub use moments::{log_mgf_curve, pn_alpha, ChainState, CurveMode, FcsMoments, GibbsMoments};
