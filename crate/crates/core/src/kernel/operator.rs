use super::interval::Interval;
use super::tensor;
use crate::error::{domain, Error, Result};
use faer::{c64, Mat, Scale};

/// Hard cap on the dimension of any dense window.
pub const MAX_DIM: usize = 1 << 14;

/// Checks that `site_dim^sites * extra` fits under the dense cap.
pub fn check_cap(what: &str, site_dim: usize, sites: usize, extra: usize) -> Result<usize> {
    let mut dim: u128 = extra as u128;
    for _ in 0..sites {
        dim = dim.saturating_mul(site_dim as u128);
        if dim > MAX_DIM as u128 {
            return Err(Error::DimensionCap { what: what.to_string(), dim, cap: MAX_DIM });
        }
    }
    if dim > MAX_DIM as u128 {
        return Err(Error::DimensionCap { what: what.to_string(), dim, cap: MAX_DIM });
    }
    Ok(dim as usize)
}

/// A dense operator living on a contiguous interval of lattice sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    matrix: Mat<c64>,
    support: Interval,
    site_dim: usize,
}

impl LocalOperator {
    pub fn new(matrix: Mat<c64>, support: Interval, site_dim: usize) -> Result<Self> {
        if site_dim < 2 {
            return Err(domain(format!("site dimension must be at least 2, got {site_dim}")));
        }
        let dim = check_cap("local operator", site_dim, support.len(), 1)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(domain(format!(
                "matrix is {}x{}, support {} needs dimension {dim}",
                matrix.nrows(),
                matrix.ncols(),
                support
            )));
        }
        if matrix.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(domain("matrix has non-finite entries"));
        }
        Ok(LocalOperator { matrix, support, site_dim })
    }

    pub(crate) fn from_parts(matrix: Mat<c64>, support: Interval, site_dim: usize) -> Self {
        debug_assert_eq!(matrix.nrows(), site_dim.pow(support.len() as u32));
        LocalOperator { matrix, support, site_dim }
    }

    pub fn identity(support: Interval, site_dim: usize) -> Result<Self> {
        let dim = check_cap("identity", site_dim, support.len(), 1)?;
        Self::new(Mat::identity(dim, dim), support, site_dim)
    }

    pub fn zeros(support: Interval, site_dim: usize) -> Result<Self> {
        let dim = check_cap("zero operator", site_dim, support.len(), 1)?;
        Self::new(Mat::zeros(dim, dim), support, site_dim)
    }

    /// One-site operator at site `x`.
    pub fn at_site(matrix: Mat<c64>, x: i64) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(matrix, Interval::site(x), d)
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `self ⊗ 1` on `window`, factors arranged in site order.
    pub fn embed(&self, window: Interval) -> Result<LocalOperator> {
        if !window.contains_interval(&self.support) {
            return Err(domain(format!("support {} is not contained in window {}", self.support, window)));
        }
        if window == self.support {
            return Ok(self.clone());
        }
        check_cap("embedding window", self.site_dim, window.len(), 1)?;
        let dims = vec![self.site_dim; window.len()];
        let positions: Vec<usize> = if self.support.is_empty() {
            Vec::new()
        } else {
            self.support.sites().map(|x| window.position(x).unwrap()).collect()
        };
        let m = tensor::embed_factors(&self.matrix, &dims, &positions);
        Ok(LocalOperator::from_parts(m, window, self.site_dim))
    }

    /// Traces out `sites`. The remaining sites must form an interval.
    pub fn partial_trace(&self, sites: &[i64]) -> Result<LocalOperator> {
        for &x in sites {
            if !self.support.contains(x) {
                return Err(domain(format!("site {x} is outside support {}", self.support)));
            }
        }
        let kept: Vec<i64> = self.support.sites().filter(|x| !sites.contains(x)).collect();
        let kept_support = match (kept.first(), kept.last()) {
            (Some(&lo), Some(&hi)) => {
                if (hi - lo + 1) as usize != kept.len() {
                    return Err(domain("remaining sites after partial trace are not contiguous"));
                }
                Interval::new(lo, hi)
            }
            _ => Interval::empty_at(self.support.lo),
        };
        let dims = vec![self.site_dim; self.support.len()];
        let mut positions: Vec<usize> = sites.iter().map(|&x| self.support.position(x).unwrap()).collect();
        positions.sort_unstable();
        positions.dedup();
        let m = tensor::partial_trace_factors(&self.matrix, &dims, &positions);
        Ok(LocalOperator::from_parts(m, kept_support, self.site_dim))
    }

    /// Translate by `j` sites.
    pub fn shifted(&self, j: i64) -> LocalOperator {
        LocalOperator { matrix: self.matrix.clone(), support: self.support.shifted(j), site_dim: self.site_dim }
    }

    /// Image under the site reflection `x -> -x`.
    pub fn reflected(&self) -> LocalOperator {
        let n = self.support.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let m = tensor::permute_factors(&self.matrix, &vec![self.site_dim; n], &perm);
        LocalOperator::from_parts(m, self.support.reflected(), self.site_dim)
    }

    /// Reorders the sites of the support: new position `k` holds old position `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<LocalOperator> {
        let n = self.support.len();
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(domain("not a permutation of the support positions"));
        }
        let m = tensor::permute_factors(&self.matrix, &vec![self.site_dim; n], perm);
        Ok(LocalOperator::from_parts(m, self.support, self.site_dim))
    }

    fn check_compatible(&self, other: &LocalOperator) -> Result<()> {
        if self.site_dim != other.site_dim {
            return Err(domain("site dimensions differ"));
        }
        if self.support != other.support {
            return Err(domain(format!(
                "supports {} and {} differ; embed into a common window first",
                self.support, other.support
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &LocalOperator) -> Result<LocalOperator> {
        self.check_compatible(other)?;
        Ok(LocalOperator::from_parts(&self.matrix + &other.matrix, self.support, self.site_dim))
    }

    pub fn sub(&self, other: &LocalOperator) -> Result<LocalOperator> {
        self.check_compatible(other)?;
        Ok(LocalOperator::from_parts(&self.matrix - &other.matrix, self.support, self.site_dim))
    }

    pub fn mul(&self, other: &LocalOperator) -> Result<LocalOperator> {
        self.check_compatible(other)?;
        Ok(LocalOperator::from_parts(&self.matrix * &other.matrix, self.support, self.site_dim))
    }

    pub fn scale(&self, c: f64) -> LocalOperator {
        self.scale_complex(c64::new(c, 0.0))
    }

    pub fn scale_complex(&self, c: c64) -> LocalOperator {
        LocalOperator::from_parts(&self.matrix * Scale(c), self.support, self.site_dim)
    }

    pub fn adjoint(&self) -> LocalOperator {
        LocalOperator::from_parts(self.matrix.adjoint().to_owned(), self.support, self.site_dim)
    }

    pub fn trace(&self) -> c64 {
        self.matrix.diagonal().column_vector().iter().copied().sum()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm_l2()
    }

    /// Operator (spectral) norm.
    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }

    /// Frobenius norm of `A - A*`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        hermitian_asymmetry(&self.matrix)
    }
}

pub fn hermitian_asymmetry(m: &Mat<c64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

/// Largest singular value.
pub fn op_norm(m: &Mat<c64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let herm = hermitian_asymmetry(m) <= 1e-14 * m.norm_l2().max(1e-300);
    if herm {
        if let Ok(e) = m.self_adjoint_eigen(faer::Side::Lower) {
            let s = e.S().column_vector();
            return s.iter().fold(0.0f64, |acc, z| acc.max(z.re.abs()));
        }
    }
    match m.singular_values() {
        Ok(s) => s.iter().copied().fold(0.0, f64::max),
        Err(_) => m.norm_l2(),
    }
}

/// Smallest singular value.
pub fn min_singular_value(m: &Mat<c64>) -> f64 {
    match m.singular_values() {
        Ok(s) => s.iter().copied().fold(f64::INFINITY, f64::min),
        Err(_) => 0.0,
    }
}
