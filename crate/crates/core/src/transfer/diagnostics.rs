use super::operator::TruncatedTransferOperator;
use super::power::{leading_left_eigen, LeadingEigen, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::Result;
use crate::kernel::dense::{hermitian_part, scaled, trace};
use crate::kernel::operator::op_norm;
use crate::kernel::spectral::herm_eigen;
use crate::numeric::{linear_fit, LinearFit};
use faer::{c64, Mat};

/// Decay and positivity diagnostics for one probe.
#[derive(Clone, Debug)]
pub struct ProbeReport {
    /// `‖L_h^n(Q) - φ_h(Q) 1‖` for `n = 1..=steps`.
    pub decay: Vec<f64>,
    /// Log-linear fit of `decay` over the requested range.
    pub fit: Option<LinearFit>,
    /// `max spec L^n(Q) / min spec L^n(Q)` for `n = 1..=steps`; empty when
    /// the probe is not strictly positive.
    pub k_ratios: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TransferDiagnostics {
    /// Density `σ` of the invariant functional `φ(X) = Tr(σ X)`, normalised
    /// so that `φ(h) = 1`. It stands in for the invariant state of the
    /// infinite-volume operator.
    pub phi: Mat<c64>,
    pub left: LeadingEigen,
    pub probes: Vec<ProbeReport>,
}

/// Builds `L_h(Q) = h^{-1/2} λ^{-1} L(h^{1/2} Q h^{1/2}) h^{-1/2}` and
/// `φ_h(Q) = φ(h^{1/2} Q h^{1/2}) / φ(h)` from the leading pair and tracks,
/// for each probe, the convergence `L_h^n(Q) → φ_h(Q) 1` and the ratio of the
/// extreme eigenvalues of `L^n(Q)`.
///
/// The decay fit uses `n` in `fit_range`.
pub fn convergence_diagnostics(
    l: &TruncatedTransferOperator,
    lead: &LeadingEigen,
    probes: &[Mat<c64>],
    steps: usize,
    fit_range: std::ops::RangeInclusive<usize>,
) -> Result<TransferDiagnostics> {
    let left = leading_left_eigen(l, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let lambda = lead.lambda;
    let he = herm_eigen(&lead.h, f64::INFINITY)?;
    let h_sqrt = he.apply_function(|x| x.max(0.0).sqrt());
    let h_inv_sqrt = he.apply_function(|x| 1.0 / x.sqrt());
    let phi_h = trace(&(&left.h * &lead.h)).re;
    let phi = scaled(&left.h, 1.0 / phi_h);
    let n = l.dim();
    let id = Mat::<c64>::identity(n, n);
    let mut reports = Vec::with_capacity(probes.len());
    for q in probes {
        let lifted = &h_sqrt * q * &h_sqrt;
        let target = trace(&(&phi * &lifted));
        let mut x = lifted;
        let mut y = q.clone();
        let mut decay = Vec::with_capacity(steps);
        let mut k_ratios = Vec::with_capacity(steps);
        let positive = herm_eigen(&hermitian_part(q), f64::INFINITY)?.values[0] > 0.0;
        for _ in 0..steps {
            x = scaled(&l.apply(&x), 1.0 / lambda);
            let lh = &h_inv_sqrt * &x * &h_inv_sqrt;
            decay.push(op_norm(&(&lh - &id * faer::Scale(target))));
            if positive {
                y = l.apply(&y);
                let e = herm_eigen(&hermitian_part(&y), f64::INFINITY)?;
                let lo = e.values[0];
                let hi = *e.values.last().unwrap();
                k_ratios.push(hi / lo);
                y = scaled(&y, 1.0 / hi);
            }
        }
        let pts: Vec<(f64, f64)> = fit_range
            .clone()
            .filter(|&k| k >= 1 && k <= decay.len() && decay[k - 1] > 0.0)
            .map(|k| (k as f64, decay[k - 1].ln()))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        reports.push(ProbeReport { fit: linear_fit(&xs, &ys), decay, k_ratios });
    }
    Ok(TransferDiagnostics { phi, left, probes: reports })
}
