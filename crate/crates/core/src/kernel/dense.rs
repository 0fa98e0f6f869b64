//! Small helpers over `faer` dense matrices.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, Scale};

pub fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn scaled(m: &Mat<c64>, x: f64) -> Mat<c64> {
    m * Scale(re(x))
}

pub fn trace(m: &Mat<c64>) -> c64 {
    m.diagonal().column_vector().iter().copied().sum()
}

/// Maximum absolute column sum.
pub fn one_norm(m: &Mat<c64>) -> f64 {
    m.col_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn is_finite(m: &Mat<c64>) -> bool {
    m.col_iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}

/// `a^{-1} b` via partial-pivot LU.
pub fn solve(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().inverse()
}

/// `(m + m*) / 2`.
pub fn hermitian_part(m: &Mat<c64>) -> Mat<c64> {
    let h = m + m.adjoint();
    scaled(&h, 0.5)
}

/// Hilbert-Schmidt inner product `Tr(a* b)`.
pub fn hs_inner(a: &Mat<c64>, b: &Mat<c64>) -> c64 {
    let mut s = c64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].conj() * b[(i, j)];
        }
    }
    s
}

pub fn is_diagonal(m: &Mat<c64>) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == c64::new(0.0, 0.0)))
}

pub fn is_real(m: &Mat<c64>) -> bool {
    m.col_iter().all(|c| c.iter().all(|z| z.im == 0.0))
}
