use super::operator::TruncatedTransferOperator;
use crate::error::{Error, Result};
use crate::kernel::dense::{hermitian_part, hs_inner, scaled};
use crate::kernel::spectral::herm_eigen;
use crate::numeric::{linear_fit, LinearFit};
use faer::{c64, Mat};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 5000;
/// Residuals used for the decay-rate fit.
const FIT_WINDOW: usize = 10;

/// Leading eigenpair from power iteration.
#[derive(Clone, Debug)]
pub struct LeadingEigen {
    pub lambda: f64,
    /// Eigenvector, Hermitian and positive definite, with unit trace.
    pub h: Mat<c64>,
    pub min_eigenvalue: f64,
    /// `‖L h - λ h‖_F / (λ ‖h‖_F)` at exit.
    pub residual: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Per-step contraction of the residual, `|λ_2| / λ` as estimated from a
    /// fit over the last iterations.
    pub ratio_estimate: f64,
    /// `1 - ratio_estimate`.
    pub gap_estimate: f64,
    /// Quality of the residual fit; `None` when too few finite residuals.
    pub fit: Option<LinearFit>,
}

fn iterate(
    step: impl Fn(&Mat<c64>) -> Mat<c64>,
    start: Mat<c64>,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Mat<c64>, Vec<f64>)> {
    let mut q = scaled(&start, 1.0 / start.norm_l2());
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let lq = step(&q);
        let lambda = hs_inner(&q, &lq).re;
        let nrm = lq.norm_l2();
        if !(nrm.is_finite() && nrm > 0.0 && lambda > 0.0) {
            return Err(Error::NoConvergence { residuals });
        }
        let res = (&lq - scaled(&q, lambda)).norm_l2() / lambda;
        residuals.push(res);
        q = scaled(&lq, 1.0 / nrm);
        if res <= tol {
            return Ok((lambda, q, residuals));
        }
    }
    Err(Error::NoConvergence { residuals })
}

fn finish(lambda: f64, q: Mat<c64>, residuals: Vec<f64>) -> Result<LeadingEigen> {
    let h = hermitian_part(&q);
    let tr = crate::kernel::dense::trace(&h).re;
    let h = scaled(&h, 1.0 / tr);
    let e = herm_eigen(&h, f64::INFINITY)?;
    let min_eigenvalue = e.values[0];
    let scale = e.values.last().copied().unwrap_or(1.0).abs();
    if min_eigenvalue <= 1e-12 * scale {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    let tail: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0 && r.is_finite())
        .map(|(k, r)| (k as f64, r.ln()))
        .collect();
    let tail = &tail[tail.len().saturating_sub(FIT_WINDOW)..];
    let fit = if tail.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
        linear_fit(&x, &y)
    } else {
        None
    };
    let ratio_estimate = fit.map_or(0.0, |f| f.slope.exp().min(1.0));
    Ok(LeadingEigen {
        lambda,
        h,
        min_eigenvalue,
        residual: residuals.last().copied().unwrap_or(0.0),
        iterations: residuals.len(),
        residuals,
        ratio_estimate,
        gap_estimate: 1.0 - ratio_estimate,
        fit,
    })
}

/// Power iteration from the identity.
pub fn leading_eigen(l: &TruncatedTransferOperator, tol: f64, max_iter: usize) -> Result<LeadingEigen> {
    let (lambda, q, residuals) = iterate(|q| l.apply(q), l.identity(), tol, max_iter)?;
    finish(lambda, q, residuals)
}

/// Power iteration for the adjoint map, whose leading eigenvector is the
/// density of the invariant functional.
pub fn leading_left_eigen(l: &TruncatedTransferOperator, tol: f64, max_iter: usize) -> Result<LeadingEigen> {
    let (lambda, q, residuals) = iterate(|q| l.apply_adjoint(q), l.identity(), tol, max_iter)?;
    finish(lambda, q, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Interaction;
    use crate::kernel::dense::trace;
    use crate::kernel::expm::exp_herm;
    use crate::models::{magnetization, maximally_mixed_product, pauli, random_primitive_triple, transverse_ising};
    use crate::transfer::operator::{build_fcs_operator, build_kms_operator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_kms_operator() {
        let psi = transverse_ising(1.0, 0.5).unwrap();
        let l = build_kms_operator(&psi, &psi, 0.0, 0.0, 6, 4).unwrap();
        let id = l.identity();
        assert!((l.apply(&id) - &id).norm_l2() < 1e-12);
        let e = leading_eigen(&l, 1e-12, 10).unwrap();
        assert!((e.lambda - 1.0).abs() < 1e-13);
        assert_eq!(e.iterations, 1);
        assert!(e.residual < 1e-13);
    }

    #[test]
    fn commuting_one_site_closed_form() {
        let psi = Interaction::one_site(crate::kernel::dense::scaled(&pauli::z(), 0.7)).unwrap();
        let phi = magnetization();
        let (beta, alpha) = (0.8, -0.6);
        let l = build_kms_operator(&psi, &phi, beta, alpha, 4, 2).unwrap();
        let e = leading_eigen(&l, 1e-13, 100).unwrap();
        let one = crate::kernel::dense::scaled(&pauli::z(), alpha - 0.7 * beta);
        let closed = trace(&exp_herm(&one, 1.0).unwrap()).re / 2.0;
        assert!((e.lambda - closed).abs() < 1e-10);
    }

    #[test]
    fn kms_positivity_on_random_inputs() {
        let psi = transverse_ising(1.0, 0.9).unwrap();
        let l = build_kms_operator(&psi, &psi.scaled(0.5), 0.6, 0.4, 6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let q = crate::models::random_psd(&mut rng, l.dim());
            let out = hermitian_part(&l.apply(&q));
            assert!(herm_eigen(&out, f64::INFINITY).unwrap().values[0] >= -1e-12);
        }
        let l1 = hermitian_part(&l.apply(&l.identity()));
        assert!(herm_eigen(&l1, f64::INFINITY).unwrap().values[0] > 0.0);
    }

    #[test]
    fn adjoint_is_hilbert_schmidt_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = transverse_ising(1.0, 0.9).unwrap();
        let kms = build_kms_operator(&psi, &psi, 0.5, 0.3, 6, 3).unwrap();
        let t = random_primitive_triple(&mut rng, 2, 2, 0.5).unwrap();
        let fcs = build_fcs_operator(&t, &crate::models::magnetization(), 0.4, 4, 3).unwrap();
        for l in [kms, fcs] {
            let x = crate::models::random_matrix(&mut rng, l.dim());
            let y = crate::models::random_matrix(&mut rng, l.dim());
            let lhs = hs_inner(&y, &l.apply(&x));
            let rhs = hs_inner(&l.apply_adjoint(&y), &x);
            assert!((lhs - rhs).norm() < 1e-11 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn dense_oracle_agrees_with_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_primitive_triple(&mut rng, 2, 2, 0.5).unwrap();
        let phi = crate::models::magnetization();
        let l = build_fcs_operator(&t, &phi, 0.7, 4, 3).unwrap();
        let m = l.dense_matrix().unwrap();
        let ev = m.eigenvalues().unwrap();
        let top = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let e = leading_eigen(&l, 1e-12, 5000).unwrap();
        assert!((e.lambda - top).abs() < 1e-9 * top);
    }

    #[test]
    fn fcs_unital_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_primitive_triple(&mut rng, 2, 2, 0.5).unwrap();
        let phi = transverse_ising(1.0, 0.3).unwrap();
        let l = build_fcs_operator(&t, &phi, 0.0, 6, 4).unwrap();
        let e = leading_eigen(&l, 1e-12, 100).unwrap();
        assert!((e.lambda - 1.0).abs() < 1e-12);
        let zero = build_fcs_operator(&t, &Interaction::zero(2), 1.3, 6, 4).unwrap();
        assert!((leading_eigen(&zero, 1e-12, 100).unwrap().lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fcs_product_state_closed_form() {
        let t = maximally_mixed_product(2);
        let phi = magnetization();
        for alpha in [-1.5, 0.4, 2.0] {
            let l = build_fcs_operator(&t, &phi, alpha, 4, 3).unwrap();
            let e = leading_eigen(&l, 1e-13, 200).unwrap();
            assert!((e.lambda.ln() - f64::cosh(alpha).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn non_convergence_carries_history() {
        let psi = transverse_ising(1.0, 0.9).unwrap();
        let l = build_kms_operator(&psi, &psi, 0.5, 0.3, 6, 3).unwrap();
        match leading_eigen(&l, 1e-15, 3) {
            Err(Error::NoConvergence { residuals }) => assert_eq!(residuals.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
