use super::dense::{is_finite, one_norm, re, scaled, solve};
use super::operator::LocalOperator;
use super::spectral::{herm_eigen, HermEigen, TAU_HERM};
use crate::error::{Error, Result};
use faer::{c64, Mat, Scale};

/// Exponents beyond this magnitude overflow `f64`.
pub const EXP_LIMIT: f64 = 700.0;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Exponential of a general complex matrix by Padé-13 scaling and squaring.
pub fn expm(a: &Mat<c64>) -> Result<Mat<c64>> {
    let n = a.nrows();
    let norm = one_norm(a);
    if !norm.is_finite() || norm > EXP_LIMIT * n.max(1) as f64 {
        return Err(Error::Overflow { norm });
    }
    if norm == 0.0 {
        return Ok(Mat::identity(n, n));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = scaled(a, 0.5f64.powi(s));
    let id = Mat::<c64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| Scale(re(PADE13[k]));
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = &a * (u_inner + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let v_inner = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = v_inner + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    let mut r = solve(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        r = &r * &r;
    }
    if !is_finite(&r) {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}

/// `exp(s * A)` for Hermitian `A` from its eigen-decomposition.
pub fn exp_from_eigen(e: &HermEigen, s: f64) -> Result<Mat<c64>> {
    let top = e.values.iter().map(|&x| s * x).fold(f64::NEG_INFINITY, f64::max);
    if top > EXP_LIMIT {
        let norm = e.values.iter().fold(0.0f64, |m, x| m.max(x.abs())) * s.abs();
        return Err(Error::Overflow { norm });
    }
    Ok(e.apply_function(|x| (s * x).exp()))
}

/// `exp(s * H)` for a Hermitian matrix.
pub fn exp_herm(h: &Mat<c64>, s: f64) -> Result<Mat<c64>> {
    exp_from_eigen(&herm_eigen(h, TAU_HERM)?, s)
}

/// Matrix exponential of a local operator.
pub fn mat_exp(op: &LocalOperator) -> Result<LocalOperator> {
    LocalOperator::new(expm(op.matrix())?, op.support(), op.site_dim())
}

/// Matrix exponential of a Hermitian local operator via its eigenbasis.
pub fn mat_exp_herm(op: &LocalOperator) -> Result<LocalOperator> {
    LocalOperator::new(exp_herm(op.matrix(), 1.0)?, op.support(), op.site_dim())
}
