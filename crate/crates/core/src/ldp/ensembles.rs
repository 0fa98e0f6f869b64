use super::measure::TAU_DEGEN;
use crate::chain::Interaction;
use crate::error::{domain, Result};
use crate::kernel::dense::{scaled, trace};
use crate::kernel::operator::{check_cap, op_norm};
use crate::kernel::spectral::{herm_eigen, HermEigen, RealSet, TAU_HERM};
use crate::kernel::Interval;
use crate::numeric::{linear_fit, logsumexp, LinearFit};
use crate::states::gibbs::{density_from_eigen, log_partition_from_eigen, von_neumann_entropy};
use faer::{c64, Mat};
use serde::Serialize;

/// Highest moment used to test concentration.
pub const MOMENT_DEGREE: usize = 3;
const COMMUTATOR_TOL: f64 = 1e-10;

/// Diagnostics at one volume `N`.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleRow {
    pub n: usize,
    /// `log Tr P_N` for the joint window projection.
    pub log_window_trace: f64,
    /// `H^mc_N = (1/N) log Tr P_N`.
    pub h_mc: f64,
    /// `(1/N)(log Z + <K>)` for `σ_N = e^{-K}/Z`, `K = Σ λ_k H_{Φ_k}`.
    pub canonical_entropy: f64,
    /// `|H^mc_N - canonical_entropy|`.
    pub gap: f64,
    /// `1 - σ_N(P_N)`.
    pub tail_mass: f64,
    /// `σ_N((X_{k,N} - x_k)^p)` for `p = 1..=3`, one row per observable.
    pub window_moments: Vec<[f64; MOMENT_DEGREE]>,
    /// Moments of `(1/N)(log σ_N - Tr σ_N log σ_N)` for `p = 1..=3`.
    pub entropy_moments: [f64; MOMENT_DEGREE],
    /// `σ_N`-mass of `|(1/N)(log σ_N - Tr σ_N log σ_N)| > δ`.
    pub entropy_tail: f64,
    /// False when the observables do not commute and `P_N` is replaced by
    /// the positive surrogate `P_1 ⋯ P_m ⋯ P_1`.
    pub exact_window: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsemblesReport {
    pub x: Vec<f64>,
    pub delta: f64,
    pub lambdas: Vec<f64>,
    pub rows: Vec<EnsembleRow>,
    /// Fit of `log(tail_mass)` against `N`.
    pub tail_fit: Option<LinearFit>,
    /// `-slope` of `tail_fit`; positive for exponential decay.
    pub tail_rate: f64,
    /// Gaps strictly decrease along the volumes.
    pub gap_shrinks: bool,
    /// Concentration is only tested through moments up to this degree.
    pub moment_degree: usize,
}

impl EnsemblesReport {
    pub fn exact_windows(&self) -> bool {
        self.rows.iter().all(|r| r.exact_window)
    }
}

fn window_set(center: f64, delta: f64) -> RealSet {
    RealSet::closed(center - delta, center + delta)
}

fn indicator(e: &HermEigen, set: &RealSet, scale: f64) -> Vec<f64> {
    e.values.iter().map(|&v| if set.contains_tol(v * scale, TAU_DEGEN) { 1.0 } else { 0.0 }).collect()
}

/// Moments of a discrete distribution `(value, weight)`.
fn moments(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> [f64; MOMENT_DEGREE] {
    let mut out = [0.0; MOMENT_DEGREE];
    for (p, slot) in out.iter_mut().enumerate() {
        *slot = pairs.clone().map(|(v, w)| w * v.powi(p as i32 + 1)).sum();
    }
    out
}

/// Entropy density, its fluctuation moments and tail from the spectrum of
/// `σ` given as `(log p_j)`.
fn entropy_profile(log_p: &[f64], n: usize, delta: f64) -> (f64, [f64; MOMENT_DEGREE], f64) {
    let s: f64 = log_p.iter().filter(|l| l.is_finite()).map(|&l| -l.exp() * l).sum();
    let pairs = log_p.iter().filter(|l| l.is_finite()).map(|&l| ((l + s) / n as f64, l.exp()));
    let tail = pairs.clone().filter(|(y, _)| y.abs() > delta + TAU_DEGEN).map(|(_, w)| w).sum();
    (s / n as f64, moments(pairs), tail)
}

fn row_single(phi: &Interaction, lambda: f64, x: f64, delta: f64, n: usize) -> Result<EnsembleRow> {
    let h = phi.hamiltonian(Interval::new(1, n as i64))?;
    let e = herm_eigen(h.matrix(), TAU_HERM)?;
    let inv = 1.0 / n as f64;
    let inside = indicator(&e, &window_set(x, delta), inv);
    let count: f64 = inside.iter().sum();
    let log_energy: Vec<f64> = e.values.iter().map(|&v| -lambda * v).collect();
    let lz = logsumexp(log_energy.iter().copied());
    let log_p: Vec<f64> = log_energy.iter().map(|l| l - lz).collect();
    let p: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
    let captured: f64 = p.iter().zip(&inside).map(|(a, b)| a * b).sum();
    let (canonical_entropy, entropy_moments, entropy_tail) = entropy_profile(&log_p, n, delta);
    let window_moments = vec![moments(e.values.iter().zip(&p).map(|(&v, &w)| (v * inv - x, w)))];
    let log_window_trace = count.ln();
    let h_mc = log_window_trace * inv;
    Ok(EnsembleRow {
        n,
        log_window_trace,
        h_mc,
        canonical_entropy,
        gap: (h_mc - canonical_entropy).abs(),
        tail_mass: (1.0 - captured).max(0.0),
        window_moments,
        entropy_moments,
        entropy_tail,
        exact_window: true,
    })
}

fn row_joint(phis: &[Interaction], lambdas: &[f64], x: &[f64], delta: f64, n: usize) -> Result<EnsembleRow> {
    let window = Interval::new(1, n as i64);
    let inv = 1.0 / n as f64;
    let hs: Vec<Mat<c64>> = phis.iter().map(|p| phi_matrix(p, window)).collect::<Result<_>>()?;
    let mut exact = true;
    for i in 0..hs.len() {
        for j in i + 1..hs.len() {
            let c = &hs[i] * &hs[j] - &hs[j] * &hs[i];
            if op_norm(&c) > COMMUTATOR_TOL * (1.0 + op_norm(&hs[i]) * op_norm(&hs[j])) {
                exact = false;
            }
        }
    }
    let eigs: Vec<HermEigen> = hs.iter().map(|h| herm_eigen(h, TAU_HERM)).collect::<Result<_>>()?;
    let projections: Vec<Mat<c64>> = eigs
        .iter()
        .zip(x)
        .map(|(e, &c)| e.from_weights(&indicator(e, &window_set(c, delta), inv)))
        .collect();
    let mut s = projections[0].clone();
    for p in &projections[1..] {
        s = p * &s * p;
    }
    let dim = s.nrows();
    let mut k = Mat::<c64>::zeros(dim, dim);
    for (h, &l) in hs.iter().zip(lambdas) {
        k += scaled(h, l);
    }
    let ek = herm_eigen(&k, TAU_HERM)?;
    let sigma = density_from_eigen(&ek, 1.0);
    let lz = log_partition_from_eigen(&ek, 1.0);
    let log_p: Vec<f64> = ek.values.iter().map(|&v| -v - lz).collect();
    let (canonical_entropy, entropy_moments, entropy_tail) = entropy_profile(&log_p, n, delta);
    let window_moments = eigs
        .iter()
        .zip(x)
        .map(|(e, &c)| {
            let w = e.diag_expectations(&sigma);
            moments(e.values.iter().zip(w).map(move |(&v, w)| (v * inv - c, w)))
        })
        .collect();
    let tr = trace(&s).re;
    let captured = trace(&(&sigma * &s)).re;
    let log_window_trace = tr.ln();
    let h_mc = log_window_trace * inv;
    Ok(EnsembleRow {
        n,
        log_window_trace,
        h_mc,
        canonical_entropy,
        gap: (h_mc - canonical_entropy).abs(),
        tail_mass: (1.0 - captured).max(0.0),
        window_moments,
        entropy_moments,
        entropy_tail,
        exact_window: exact,
    })
}

fn phi_matrix(phi: &Interaction, window: Interval) -> Result<Mat<c64>> {
    Ok(phi.hamiltonian(window)?.into_matrix())
}

/// Microcanonical versus canonical entropy densities for the states
/// `σ_N = e^{-Σ λ_k H_{Φ_k}([1, N])} / Z` and the windows
/// `|X_{k,N} - x_k| <= δ`, `X_{k,N} = (1/N) H_{Φ_k}([1, N])`.
pub fn ensembles_equivalence(
    phis: &[Interaction],
    lambdas: &[f64],
    x: &[f64],
    delta: f64,
    n_range: &[usize],
) -> Result<EnsemblesReport> {
    if phis.is_empty() || phis.len() != lambdas.len() || phis.len() != x.len() {
        return Err(domain("observables, multipliers and window centres must have equal nonzero length"));
    }
    if !(delta > 0.0) {
        return Err(domain("window half-width must be positive"));
    }
    if n_range.is_empty() || n_range.windows(2).any(|w| w[1] <= w[0]) || n_range[0] == 0 {
        return Err(domain("volumes must be positive and increasing"));
    }
    let d = phis[0].site_dim();
    if phis.iter().any(|p| p.site_dim() != d) {
        return Err(domain("observables act on different site dimensions"));
    }
    for &n in n_range {
        check_cap("ensemble window", d, n, 1)?;
    }
    let rows: Vec<EnsembleRow> = n_range
        .iter()
        .map(|&n| {
            if phis.len() == 1 {
                row_single(&phis[0], lambdas[0], x[0], delta, n)
            } else {
                row_joint(phis, lambdas, x, delta, n)
            }
        })
        .collect::<Result<_>>()?;
    let (ns, logs): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.tail_mass > 0.0).map(|r| (r.n as f64, r.tail_mass.ln())).unzip();
    let tail_fit = linear_fit(&ns, &logs);
    let tail_rate = tail_fit.map_or(f64::NAN, |f| -f.slope);
    let gap_shrinks = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(EnsemblesReport {
        x: x.to_vec(),
        delta,
        lambdas: lambdas.to_vec(),
        rows,
        tail_fit,
        tail_rate,
        gap_shrinks,
        moment_degree: MOMENT_DEGREE,
    })
}

/// `|S(ρ) - (log Z + β <H>)|` for the Gibbs state of `Ψ` on `[1, n]`.
pub fn canonical_entropy_residual(psi: &Interaction, beta: f64, n: usize) -> Result<f64> {
    let h = psi.hamiltonian(Interval::new(1, n as i64))?;
    let e = herm_eigen(h.matrix(), TAU_HERM)?;
    let rho = density_from_eigen(&e, beta);
    let lz = log_partition_from_eigen(&e, beta);
    let energy = trace(&(&rho * h.matrix())).re;
    Ok((von_neumann_entropy(&rho)? - (lz + beta * energy)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{magnetization, pauli, transverse_ising};

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn binomial_window_counting() {
        let r = ensembles_equivalence(&[magnetization()], &[0.0], &[0.0], 0.2, &[6, 8, 10]).unwrap();
        for row in &r.rows {
            let n = row.n;
            let count: f64 = (0..=n)
                .filter(|&k| ((n as f64 - 2.0 * k as f64) / n as f64).abs() <= 0.2 + 1e-12)
                .map(|k| binomial(n, k))
                .sum();
            assert!((row.h_mc - count.ln() / n as f64).abs() < 1e-12);
            assert!((row.canonical_entropy - 2f64.ln()).abs() < 1e-12);
            assert!((row.tail_mass - (1.0 - count / 2f64.powi(n as i32))).abs() < 1e-12);
            assert!(row.entropy_moments.iter().all(|m| m.abs() < 1e-12));
            assert!(row.window_moments[0][0].abs() < 1e-12);
        }
        assert!(r.exact_windows());
    }

    #[test]
    fn tilted_state_concentrates_at_shifted_mean() {
        let lambda = -0.4;
        let x = (-lambda as f64).tanh();
        let r = ensembles_equivalence(&[magnetization()], &[lambda], &[x], 0.3, &[4, 6, 8]).unwrap();
        for w in r.rows.windows(2) {
            assert!(w[1].window_moments[0][1] < w[0].window_moments[0][1]);
            assert!(w[1].entropy_moments[1] < w[0].entropy_moments[1]);
        }
        assert!(r.rows.iter().all(|row| row.window_moments[0][0].abs() < 1e-12));
    }

    #[test]
    fn joint_route_matches_single_route() {
        let phi = transverse_ising(1.0, 0.5).unwrap();
        let a = ensembles_equivalence(&[phi.clone()], &[0.3], &[-0.5], 0.4, &[4, 5]).unwrap();
        let b = ensembles_equivalence(&[phi.clone(), phi.clone()], &[0.1, 0.2], &[-0.5, -0.5], 0.4, &[4, 5])
            .unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.canonical_entropy - rb.canonical_entropy).abs() < 1e-10);
            assert!((ra.tail_mass - rb.tail_mass).abs() < 1e-10);
            assert!((ra.h_mc - rb.h_mc).abs() < 1e-10);
            assert!(rb.exact_window);
        }
    }

    #[test]
    fn non_commuting_windows_are_flagged() {
        let x = Interaction::one_site(pauli::x()).unwrap();
        let r = ensembles_equivalence(&[magnetization(), x], &[0.0, 0.0], &[0.0, 0.0], 0.5, &[3]).unwrap();
        assert!(!r.rows[0].exact_window);
        assert!(r.rows[0].log_window_trace.is_finite());
    }

    #[test]
    fn canonical_identity() {
        let psi = transverse_ising(1.0, 0.8).unwrap();
        assert!(canonical_entropy_residual(&psi, 0.7, 6).unwrap() < 1e-10);
    }
}
