use super::dense::{is_diagonal, is_real};
use super::operator::{hermitian_asymmetry, LocalOperator};
use crate::error::{Error, Result};
use faer::{c64, Mat, Side};

/// Default relative Hermiticity tolerance.
pub const TAU_HERM: f64 = 1e-9;

/// A real interval with independently open or closed endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealSet {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl RealSet {
    pub fn closed(lo: f64, hi: f64) -> Self {
        RealSet { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        RealSet { lo, hi, lo_closed: false, hi_closed: false }
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: f64, hi: f64) -> Self {
        RealSet { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn all() -> Self {
        RealSet::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// Membership with closed endpoints widened by `tol`.
    pub fn contains_tol(&self, x: f64, tol: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo - tol } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi + tol } else { x < self.hi };
        above && below
    }
}

/// Orthonormal eigenbasis, kept as a permutation of the standard basis when
/// the input is diagonal.
#[derive(Clone, Debug)]
pub enum Basis {
    /// Eigenvector `k` is the standard basis vector `e_{perm[k]}`.
    Permutation(Vec<usize>),
    /// Eigenvector `k` is column `k`.
    Dense(Mat<c64>),
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub basis: Basis,
}

impl HermEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Dense eigenvector matrix.
    pub fn vectors(&self) -> Mat<c64> {
        match &self.basis {
            Basis::Dense(u) => u.clone(),
            Basis::Permutation(p) => {
                let n = p.len();
                Mat::from_fn(n, n, |i, k| if p[k] == i { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
            }
        }
    }

    /// `U diag(w) U*` for arbitrary real weights.
    pub fn from_weights(&self, w: &[f64]) -> Mat<c64> {
        let n = self.dim();
        match &self.basis {
            Basis::Permutation(p) => {
                let mut m = Mat::<c64>::zeros(n, n);
                for (k, &i) in p.iter().enumerate() {
                    m[(i, i)] = c64::new(w[k], 0.0);
                }
                m
            }
            Basis::Dense(u) => {
                let uw = Mat::from_fn(n, n, |i, k| u[(i, k)] * w[k]);
                &uw * u.adjoint()
            }
        }
    }

    /// `f(A)` by spectral calculus.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> Mat<c64> {
        let w: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.from_weights(&w)
    }

    /// `<u_k| rho |u_k>` for every eigenvector.
    pub fn diag_expectations(&self, rho: &Mat<c64>) -> Vec<f64> {
        match &self.basis {
            Basis::Permutation(p) => p.iter().map(|&i| rho[(i, i)].re).collect(),
            Basis::Dense(u) => {
                let ru = rho * u;
                (0..self.dim())
                    .map(|k| (0..self.dim()).map(|i| (u[(i, k)].conj() * ru[(i, k)]).re).sum())
                    .collect()
            }
        }
    }

    /// Matrix of squared overlaps `|<u_j | v_k>|^2` with another eigenbasis.
    pub fn overlap_sq(&self, other: &HermEigen) -> Mat<f64> {
        let n = self.dim();
        match (&self.basis, &other.basis) {
            (Basis::Permutation(p), Basis::Permutation(q)) => {
                Mat::from_fn(n, n, |j, k| if p[j] == q[k] { 1.0 } else { 0.0 })
            }
            (Basis::Permutation(p), Basis::Dense(v)) => Mat::from_fn(n, n, |j, k| v[(p[j], k)].norm_sqr()),
            (Basis::Dense(u), Basis::Permutation(q)) => Mat::from_fn(n, n, |j, k| u[(q[k], j)].norm_sqr()),
            (Basis::Dense(u), Basis::Dense(v)) => {
                let o = u.adjoint() * v;
                Mat::from_fn(n, n, |j, k| o[(j, k)].norm_sqr())
            }
        }
    }

    /// Spectral projection onto eigenvalues in `set`.
    pub fn projection(&self, set: &RealSet) -> Mat<c64> {
        self.apply_function(|x| if set.contains(x) { 1.0 } else { 0.0 })
    }
}

/// Eigen-decomposition of a Hermitian operator.
pub fn herm_spectral(op: &LocalOperator) -> Result<HermEigen> {
    herm_eigen(op.matrix(), TAU_HERM)
}

/// Eigen-decomposition of a Hermitian matrix, refusing inputs whose
/// anti-Hermitian part exceeds `tol` relative to the Frobenius norm.
pub fn herm_eigen(m: &Mat<c64>, tol: f64) -> Result<HermEigen> {
    let n = m.nrows();
    let norm = m.norm_l2();
    let asym = hermitian_asymmetry(m);
    if asym > tol * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { asymmetry: asym, norm });
    }
    if is_diagonal(m) {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
        let values = perm.iter().map(|&i| m[(i, i)].re).collect();
        return Ok(HermEigen { values, basis: Basis::Permutation(perm) });
    }
    let (vals, vecs) = if is_real(m) {
        let r = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        let e = r.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let vals: Vec<f64> = e.S().column_vector().iter().copied().collect();
        let u = e.U();
        (vals, Mat::<c64>::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0)))
    } else {
        let h = Mat::<c64>::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
        let e = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let vals: Vec<f64> = e.S().column_vector().iter().map(|z| z.re).collect();
        (vals, e.U().to_owned())
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    if order.iter().enumerate().all(|(k, &o)| k == o) {
        return Ok(HermEigen { values: vals, basis: Basis::Dense(vecs) });
    }
    let values = order.iter().map(|&o| vals[o]).collect();
    let u = Mat::from_fn(n, n, |i, k| vecs[(i, order[k])]);
    Ok(HermEigen { values, basis: Basis::Dense(u) })
}

/// `1_B(op)`: sum of eigenprojections with eigenvalue in `set`.
pub fn spectral_projection(op: &LocalOperator, set: &RealSet) -> Result<LocalOperator> {
    let e = herm_spectral(op)?;
    LocalOperator::new(e.projection(set), op.support(), op.site_dim())
}
