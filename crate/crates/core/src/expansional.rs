//! Expansionals `E_r(Q; H)`, imaginary-time conjugations and the local
//! weight elements `a_n^N(α)` built from them.
//!
//! For Hermitian `Q` and `H` on a common window,
//! `E_r(Q; H) = Σ_k ∫_{1 > s_1 > … > s_k > 0} τ_{s_k}(Q) ⋯ τ_{s_1}(Q)`
//! with `τ_s(Q) = e^{sH} Q e^{-sH}`, and the series sums to
//! `e^{Q+H} e^{-H}`.

use crate::chain::boundary::straddle_in;
use crate::chain::Interaction;
use crate::error::{domain, Error, Result};
use crate::kernel::expm::{exp_herm, expm, EXP_LIMIT};
use crate::kernel::operator::{check_cap, min_singular_value, op_norm, MAX_DIM};
use crate::kernel::spectral::{herm_eigen, TAU_HERM};
use crate::kernel::{Interval, LocalOperator};
use faer::{c64, Mat};

/// Default number of series terms.
pub const DEFAULT_SERIES_TERMS: usize = 20;

/// Condition number beyond which a weight element counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// `e^{Q+H} e^{-H}`.
    ClosedForm,
    /// The iterated-integral series truncated after `terms` orders.
    Series { terms: usize },
}

/// Order-by-order series evaluation with its tail bound.
#[derive(Clone, Debug)]
pub struct SeriesEvaluation {
    /// Partial sums `Σ_{k ≤ K}` for `K = 0..=terms`.
    pub partial_sums: Vec<Mat<c64>>,
    /// `e^{2‖H‖} Σ_{k > terms} ‖Q‖^k / k!`.
    pub remainder_bound: f64,
}

fn check_pair(q: &LocalOperator, h: &LocalOperator) -> Result<()> {
    if q.support() != h.support() || q.site_dim() != h.site_dim() {
        return Err(domain(format!("Q on {} and H on {} do not share a window", q.support(), h.support())));
    }
    for op in [q, h] {
        let asym = op.hermitian_asymmetry();
        let norm = op.frobenius_norm();
        if asym > TAU_HERM * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { asymmetry: asym, norm });
        }
    }
    Ok(())
}

fn closed_form(q: &Mat<c64>, h: &Mat<c64>) -> Result<Mat<c64>> {
    Ok(exp_herm(&(q + h), 1.0)? * exp_herm(h, -1.0)?)
}

/// Evaluates the series order by order from the exponential of the
/// block-bidiagonal matrix with `H` on the diagonal and `Q` above it, whose
/// block `(0, k)` times `e^{-H}` is the order-`k` term.
pub fn series_terms(q: &LocalOperator, h: &LocalOperator, terms: usize) -> Result<SeriesEvaluation> {
    check_pair(q, h)?;
    if terms == 0 {
        return Err(domain("series needs at least one term"));
    }
    let n = q.dim();
    let big = (terms + 1) * n;
    if big > MAX_DIM {
        return Err(Error::DimensionCap { what: "expansional series".into(), dim: big as u128, cap: MAX_DIM });
    }
    let mut a = Mat::<c64>::zeros(big, big);
    for k in 0..=terms {
        a.as_mut().submatrix_mut(k * n, k * n, n, n).copy_from(h.matrix());
        if k < terms {
            a.as_mut().submatrix_mut(k * n, (k + 1) * n, n, n).copy_from(q.matrix());
        }
    }
    let e = expm(&a)?;
    let emh = exp_herm(h.matrix(), -1.0)?;
    let mut partial_sums = Vec::with_capacity(terms + 1);
    let mut acc = Mat::<c64>::zeros(n, n);
    for k in 0..=terms {
        let block = e.as_ref().submatrix(0, k * n, n, n).to_owned();
        acc += &block * &emh;
        partial_sums.push(acc.clone());
    }
    let qn = q.norm();
    let hn = h.norm();
    let mut tail = 0.0;
    let mut term = (1..=terms).fold(1.0, |t, k| t * qn / k as f64);
    for k in terms + 1..terms + 200 {
        term *= qn / k as f64;
        tail += term;
        if term < 1e-18 * tail.max(1e-300) {
            break;
        }
    }
    Ok(SeriesEvaluation { partial_sums, remainder_bound: (2.0 * hn).exp() * tail })
}

/// `E_r(Q; H)`.
///
/// The series backend is always cross-checked against the closed form; a
/// residual beyond the series tail bound plus rounding slack is an error.
pub fn expansional(q: &LocalOperator, h: &LocalOperator, backend: Backend) -> Result<LocalOperator> {
    check_pair(q, h)?;
    let closed = closed_form(q.matrix(), h.matrix())?;
    let m = match backend {
        Backend::ClosedForm => closed,
        Backend::Series { terms } => {
            let s = series_terms(q, h, terms)?;
            let series = s.partial_sums.last().unwrap().clone();
            let residual = op_norm(&(&series - &closed));
            let tolerance = s.remainder_bound + 1e-12 * (1.0 + op_norm(&closed)) * (terms as f64 + 1.0);
            if residual > tolerance {
                return Err(Error::BackendDisagreement { residual, tolerance, terms });
            }
            series
        }
    };
    LocalOperator::new(m, q.support(), q.site_dim())
}

/// `e^{sH} Q e^{-sH}`, evaluated in the eigenbasis of `H`.
pub fn imaginary_time_conjugation(q: &LocalOperator, h: &LocalOperator, s: f64) -> Result<LocalOperator> {
    if q.support() != h.support() || q.site_dim() != h.site_dim() {
        return Err(domain(format!("Q on {} and H on {} do not share a window", q.support(), h.support())));
    }
    if s == 0.0 {
        return Ok(q.clone());
    }
    let e = herm_eigen(h.matrix(), TAU_HERM)?;
    let lo = e.values.first().copied().unwrap_or(0.0);
    let hi = e.values.last().copied().unwrap_or(0.0);
    let spread = s.abs() * (hi - lo);
    if spread > EXP_LIMIT {
        return Err(Error::Overflow { norm: spread });
    }
    let u = e.vectors();
    let qt = u.adjoint() * q.matrix() * &u;
    let n = q.dim();
    let w = Mat::from_fn(n, n, |i, j| qt[(i, j)] * (s * (e.values[i] - e.values[j])).exp());
    LocalOperator::new(&u * &w * u.adjoint(), q.support(), q.site_dim())
}

/// Residuals of the product rule and the intertwining rule:
/// `r1 = ‖E(Q1+Q2; H) - E(Q1; Q2+H) E(Q2; H)‖` and
/// `r2 = ‖E(Q1; H) τ_H(P) - τ_{H+Q1}(P) E(Q1; H)‖` for the probe `P`, where
/// `τ_K(P) = e^{K} P e^{-K}`.
pub fn expansional_identities_check(
    q1: &LocalOperator,
    q2: &LocalOperator,
    h: &LocalOperator,
    probe: &LocalOperator,
    backend: Backend,
) -> Result<(f64, f64)> {
    let q12 = q1.add(q2)?;
    let lhs = expansional(&q12, h, backend)?;
    let rhs = expansional(q1, &q2.add(h)?, backend)?.mul(&expansional(q2, h, backend)?)?;
    let r1 = op_norm(lhs.sub(&rhs)?.matrix());
    let e = expansional(q1, h, backend)?;
    let left = e.mul(&imaginary_time_conjugation(probe, h, 1.0)?)?;
    let right = imaginary_time_conjugation(probe, &h.add(q1)?, 1.0)?.mul(&e)?;
    let r2 = op_norm(left.sub(&right)?.matrix());
    Ok((r1, r2))
}

/// The weight element with its norm diagnostics.
#[derive(Clone, Debug)]
pub struct WeightElement {
    pub element: LocalOperator,
    pub norm: f64,
    pub inverse_norm: f64,
}

/// Diagnostics of `a_n^N(α)` including the locality decay table.
#[derive(Clone, Debug)]
pub struct WeightReport {
    pub weight: WeightElement,
    /// Rows `(N, ‖a_n^{N+1} - a_n^N‖)`.
    pub decay_table: Vec<(usize, f64)>,
}

/// Parameters of the weight element: the state interaction `Ψ` at inverse
/// temperature `β`, the observable interaction `Φ` and the tilt `α`.
#[derive(Clone, Copy, Debug)]
pub struct WeightParams<'a> {
    pub psi: &'a Interaction,
    pub phi: &'a Interaction,
    pub beta: f64,
    pub alpha: f64,
}

/// `a_n^N(α)` on `J = [n-N, n+N] ∩ [1, M]`:
///
/// `τ^{α/2}_{Φ_J}( E_r(-β/2 W_Ψ; -β/2 R_Ψ) ) · E_r(α/2 W_Φ; α/2 R_Φ)`
///
/// where `W` collects the terms in `J` straddling site `n` and
/// `R = H(J ∩ [1, n-1]) + H(J ∩ [n+1, M])`.
pub fn kms_weight_element(p: WeightParams<'_>, n: i64, margin: usize, m: i64) -> Result<WeightElement> {
    let element = weight_operator(p, n, margin, m, Backend::ClosedForm)?;
    let norm = element.norm();
    let smin = min_singular_value(element.matrix());
    let condition = if smin > 0.0 { norm / smin } else { f64::INFINITY };
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(WeightElement { element, norm, inverse_norm: 1.0 / smin })
}

/// Window of `a_n^N` inside `[1, M]`.
pub fn weight_window(n: i64, margin: usize, m: i64) -> Interval {
    Interval::new(n - margin as i64, n + margin as i64).intersect(&Interval::new(1, m))
}

/// `a_n^N(α)` without diagnostics, with a selectable expansional backend.
pub fn weight_operator(p: WeightParams<'_>, n: i64, margin: usize, m: i64, backend: Backend) -> Result<LocalOperator> {
    if n < 1 || n > m {
        return Err(domain(format!("site {n} is outside [1, {m}]")));
    }
    if p.psi.site_dim() != p.phi.site_dim() {
        return Err(domain("state and observable interactions have different site dimensions"));
    }
    let j = weight_window(n, margin, m);
    check_cap("weight element window", p.phi.site_dim(), j.len(), 1)?;
    let split = |int: &Interaction| -> Result<(LocalOperator, LocalOperator)> {
        let w = straddle_in(int, n, j, j.lo)?;
        let left = int.hamiltonian(Interval::new(j.lo, n - 1))?.embed(j)?;
        let right = int.hamiltonian(Interval::new(n + 1, j.hi))?.embed(j)?;
        Ok((w, left.add(&right)?))
    };
    let (w_psi, r_psi) = split(p.psi)?;
    let (w_phi, r_phi) = split(p.phi)?;
    let f1 = expansional(&w_psi.scale(-p.beta / 2.0), &r_psi.scale(-p.beta / 2.0), backend)?;
    let f2 = expansional(&w_phi.scale(p.alpha / 2.0), &r_phi.scale(p.alpha / 2.0), backend)?;
    let h_phi = w_phi.add(&r_phi)?;
    imaginary_time_conjugation(&f1, &h_phi, p.alpha / 2.0)?.mul(&f2)
}

/// `a_n^N(α)` with norms and the table `‖a_n^{N+1} - a_n^N‖` for
/// `N = 1..=decay_max`.
pub fn kms_weight_report(
    p: WeightParams<'_>,
    n: i64,
    margin: usize,
    m: i64,
    decay_max: usize,
) -> Result<WeightReport> {
    let weight = kms_weight_element(p, n, margin, m)?;
    let mut decay_table = Vec::with_capacity(decay_max);
    let mut prev = if decay_max > 0 { Some(weight_operator(p, n, 1, m, Backend::ClosedForm)?) } else { None };
    for big_n in 1..=decay_max {
        let next = weight_operator(p, n, big_n + 1, m, Backend::ClosedForm)?;
        let a = prev.take().unwrap();
        let diff = next.sub(&a.embed(next.support())?)?;
        decay_table.push((big_n, diff.norm()));
        prev = Some(next);
    }
    Ok(WeightReport { weight, decay_table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::dense::{re, scaled};
    use crate::models::{pauli, random_hermitian_unit, transverse_ising};
    use crate::numeric::linear_fit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn op(m: Mat<c64>) -> LocalOperator {
        let n = m.nrows();
        let sites = (n as f64).log2().round() as i64;
        LocalOperator::new(m, Interval::new(0, sites - 1), 2).unwrap()
    }

    fn diag(v: &[f64]) -> Mat<c64> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { re(v[i]) } else { re(0.0) })
    }

    #[test]
    fn commuting_case_is_exponential() {
        let q = op(diag(&[0.3, -0.2, 0.5, 0.1]));
        let h = op(diag(&[1.0, 0.4, -0.7, 0.2]));
        for backend in [Backend::ClosedForm, Backend::Series { terms: 20 }] {
            let e = expansional(&q, &h, backend).unwrap();
            let expect = exp_herm(q.matrix(), 1.0).unwrap();
            assert!((e.matrix() - &expect).norm_l2() < 1e-13);
        }
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = op(random_hermitian_unit(&mut rng, 4));
        let q = op(Mat::zeros(4, 4));
        let e = expansional(&q, &h, Backend::Series { terms: 5 }).unwrap();
        assert!((e.matrix() - Mat::<c64>::identity(4, 4)).norm_l2() < 1e-13);
    }

    #[test]
    fn series_converges_factorially() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = op(random_hermitian_unit(&mut rng, 4));
        let h = op(random_hermitian_unit(&mut rng, 4));
        let closed = expansional(&q, &h, Backend::ClosedForm).unwrap();
        let s = series_terms(&q, &h, 20).unwrap();
        let res: Vec<f64> = s.partial_sums.iter().map(|p| op_norm(&(p - closed.matrix()))).collect();
        assert!(res[20] <= 1e-10);
        for k in [2, 4, 6, 8] {
            assert!(res[k + 2] < res[k] / 5.0, "{res:?}");
        }
        assert!(s.remainder_bound < 1e-15);
    }

    #[test]
    fn first_order_term_matches_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = op(random_hermitian_unit(&mut rng, 4));
        let h = op(random_hermitian_unit(&mut rng, 4));
        let s = series_terms(&q, &h, 3).unwrap();
        let first = &s.partial_sums[1] - &s.partial_sums[0];
        // ∫_0^1 e^{tH} Q e^{-tH} dt entrywise in the eigenbasis of H.
        let e = herm_eigen(h.matrix(), TAU_HERM).unwrap();
        let u = e.vectors();
        let qt = u.adjoint() * q.matrix() * &u;
        let w = Mat::from_fn(4, 4, |i, j| {
            let g = e.values[i] - e.values[j];
            let f = if g.abs() < 1e-12 { 1.0 } else { (g.exp() - 1.0) / g };
            qt[(i, j)] * f
        });
        let oracle = &u * &w * u.adjoint();
        assert!((&first - &oracle).norm_l2() < 1e-12);
        assert!((&s.partial_sums[0] - Mat::<c64>::identity(4, 4)).norm_l2() < 1e-13);
    }

    #[test]
    fn truncated_series_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = op(scaled(&random_hermitian_unit(&mut rng, 4), 3.0));
        let h = op(random_hermitian_unit(&mut rng, 4));
        let e = expansional(&q, &h, Backend::Series { terms: 2 });
        assert!(e.is_ok(), "a truncation within its own tail bound is accepted");
        assert!(expansional(&q, &h, Backend::Series { terms: 0 }).is_err());
    }

    #[test]
    fn identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q1 = op(random_hermitian_unit(&mut rng, 4));
        let h = op(random_hermitian_unit(&mut rng, 4));
        let probe = op(random_hermitian_unit(&mut rng, 4));
        let zero = op(Mat::zeros(4, 4));
        let (r1, _) = expansional_identities_check(&q1, &zero, &h, &probe, Backend::ClosedForm).unwrap();
        assert!(r1 < 1e-13);
        let q2 = op(random_hermitian_unit(&mut rng, 4));
        for backend in [Backend::ClosedForm, Backend::Series { terms: 20 }] {
            let (r1, r2) = expansional_identities_check(&q1, &q2, &h, &probe, backend).unwrap();
            assert!(r1 <= 1e-9 && r2 <= 1e-9, "{r1} {r2}");
        }
        let d = |v: &[f64]| op(diag(v));
        let (r1, r2) = expansional_identities_check(
            &d(&[0.1, 0.2, 0.3, 0.4]),
            &d(&[-0.5, 0.0, 0.5, 1.0]),
            &d(&[1.0, -1.0, 0.3, 0.0]),
            &d(&[2.0, 1.0, 0.0, -1.0]),
            Backend::Series { terms: 20 },
        )
        .unwrap();
        assert!(r1 <= 1e-12 && r2 <= 1e-12);
    }

    #[test]
    fn conjugation_two_by_two() {
        let q = LocalOperator::at_site(pauli::x(), 0).unwrap();
        let (h1, h2) = (0.7, -0.4);
        let h = LocalOperator::at_site(diag(&[h1, h2]), 0).unwrap();
        assert_eq!(imaginary_time_conjugation(&q, &h, 0.0).unwrap(), q);
        let s = 1.3;
        let c = imaginary_time_conjugation(&q, &h, s).unwrap();
        assert!((c.matrix()[(0, 1)].re - (s * (h1 - h2)).exp()).abs() < 1e-13);
        assert!((c.matrix()[(1, 0)].re - (-s * (h1 - h2)).exp()).abs() < 1e-13);
        let z = LocalOperator::at_site(pauli::z(), 0).unwrap();
        let cz = imaginary_time_conjugation(&z, &h, s).unwrap();
        assert!((cz.matrix() - z.matrix()).norm_l2() < 1e-14);
    }

    #[test]
    fn conjugation_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = op(random_hermitian_unit(&mut rng, 4));
        let h = op(random_hermitian_unit(&mut rng, 4));
        let ab = imaginary_time_conjugation(&imaginary_time_conjugation(&q, &h, 0.4).unwrap(), &h, 0.9).unwrap();
        let c = imaginary_time_conjugation(&q, &h, 1.3).unwrap();
        assert!((ab.matrix() - c.matrix()).norm_l2() < 1e-12);
    }

    #[test]
    fn weight_at_zero_is_identity() {
        let psi = transverse_ising(1.0, 0.8).unwrap();
        let p = WeightParams { psi: &psi, phi: &psi, beta: 0.0, alpha: 0.0 };
        let w = kms_weight_element(p, 3, 2, 6).unwrap();
        let n = w.element.dim();
        assert!((w.element.matrix() - Mat::<c64>::identity(n, n)).norm_l2() < 1e-13);
        assert!((w.norm - 1.0).abs() < 1e-13 && (w.inverse_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_one_site_commuting() {
        let psi = Interaction::one_site(pauli::z()).unwrap();
        let (alpha, beta) = (0.8, 1.5);
        let p = WeightParams { psi: &psi, phi: &psi, beta, alpha };
        let w = kms_weight_element(p, 3, 2, 6).unwrap();
        let win = weight_window(3, 2, 6);
        let local = exp_herm(&pauli::z(), (alpha - beta) / 2.0).unwrap();
        let expect = LocalOperator::at_site(local, 3).unwrap().embed(win).unwrap();
        assert!((w.element.matrix() - expect.matrix()).norm_l2() < 1e-12);
        assert!((w.norm - ((beta - alpha) / 2.0f64).abs().exp()).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_in_margin() {
        let psi = transverse_ising(1.0, 1.0).unwrap();
        let p = WeightParams { psi: &psi, phi: &psi.scaled(0.5), beta: 1.0, alpha: 1.0 };
        let r = kms_weight_report(p, 3, 2, 8, 4).unwrap();
        let d: Vec<f64> = r.decay_table.iter().map(|x| x.1).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
        let xs: Vec<f64> = r.decay_table.iter().map(|x| x.0 as f64).collect();
        let ys: Vec<f64> = d.iter().map(|v| v.ln()).collect();
        assert!(linear_fit(&xs, &ys).unwrap().slope < 0.0);
    }

    #[test]
    fn weight_norms_uniform_in_n() {
        let psi = transverse_ising(1.0, 1.0).unwrap();
        let p = WeightParams { psi: &psi, phi: &psi.scaled(0.5), beta: 1.0, alpha: 1.0 };
        let norms: Vec<(f64, f64)> = (3..=7)
            .map(|n| {
                let w = kms_weight_element(p, n, 2, 10).unwrap();
                (w.norm, w.inverse_norm)
            })
            .collect();
        let spread = |f: fn(&(f64, f64)) -> f64| {
            let v: Vec<f64> = norms.iter().map(f).collect();
            let hi = v.iter().copied().fold(0.0, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            (hi - lo) / lo
        };
        assert!(spread(|x| x.0) < 0.1 && spread(|x| x.1) < 0.1, "{norms:?}");
    }

    #[test]
    fn weight_series_backend_agrees() {
        let psi = transverse_ising(1.0, 0.5).unwrap();
        let p = WeightParams { psi: &psi, phi: &psi, beta: 0.5, alpha: -0.3 };
        let a = weight_operator(p, 2, 1, 4, Backend::ClosedForm).unwrap();
        let b = weight_operator(p, 2, 1, 4, Backend::Series { terms: 20 }).unwrap();
        assert!(op_norm(a.sub(&b).unwrap().matrix()) < 1e-10);
    }

    #[test]
    fn near_singular_weight_is_rejected() {
        let psi = Interaction::one_site(pauli::z()).unwrap();
        let p = WeightParams { psi: &psi, phi: &psi, beta: 60.0, alpha: 0.0 };
        assert!(matches!(kms_weight_element(p, 1, 1, 3), Err(Error::Singular { .. })));
    }
}
