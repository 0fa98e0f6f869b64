use super::legendre::RateCurve;
use crate::chain::Interaction;
use crate::error::{domain, Result};
use crate::kernel::spectral::{herm_eigen, HermEigen, TAU_HERM};
use crate::kernel::Interval;
use crate::numeric::logsumexp;
use crate::states::{FcsTriple, GibbsFiniteState, L_MAX};
use crate::transfer::{build_fcs_operator, build_kms_operator, leading_eigen};
use crate::transfer::power::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use serde::Serialize;

/// The state whose energy fluctuations are studied.
#[derive(Clone, Debug)]
pub enum ChainState {
    /// Gibbs state of `Ψ` at inverse temperature `β`, restricted to `[1, n]`.
    Gibbs { psi: Interaction, beta: f64 },
    /// Finitely correlated state generated by a triple.
    Fcs(FcsTriple),
}

impl ChainState {
    pub fn site_dim(&self) -> usize {
        match self {
            ChainState::Gibbs { psi, .. } => psi.site_dim(),
            ChainState::Fcs(t) => t.site_dim(),
        }
    }

    /// True when the restriction to `[1, n]` is the normalised trace.
    pub fn is_tracial(&self) -> bool {
        match self {
            ChainState::Gibbs { psi, beta } => *beta == 0.0 || psi.is_zero(),
            ChainState::Fcs(_) => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    /// `(1/n) log ω(e^{α H_n})` at the largest volume.
    Direct,
    /// `log ω(e^{α H_n}) - log ω(e^{α H_{n-1}})`.
    Increments,
    /// Leading eigenvalue of the transfer operator on `window` sites with
    /// expansional margin `margin`.
    Transfer { window: usize, margin: usize },
}

/// `log Tr(e^{-β H_Ψ / 2} e^{α H_Φ} e^{-β H_Ψ / 2})` on `[1, n]`, prepared
/// for many values of `α`.
///
/// With `H_Φ = Σ φ_k |v_k><v_k|` this is `log Σ_k c_k e^{α φ_k}` where
/// `c_k = <v_k| e^{-β H_Ψ} |v_k>`; the `log c_k` are accumulated in the log
/// domain from the squared overlaps of the two eigenbases.
#[derive(Clone, Debug)]
pub struct GibbsMoments {
    pub n: usize,
    phi_values: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GibbsMoments {
    pub fn new(psi: &Interaction, phi: &Interaction, beta: f64, n: usize) -> Result<Self> {
        if psi.site_dim() != phi.site_dim() {
            return Err(domain("state and observable act on different site dimensions"));
        }
        let state = GibbsFiniteState::new(psi.clone(), beta, n)?;
        let window = state.window();
        let ephi = observable_eigen(phi, window)?;
        let log_weights = if state.beta == 0.0 || psi.is_zero() {
            vec![0.0; ephi.dim()]
        } else {
            let epsi = herm_eigen(state.hamiltonian()?.matrix(), TAU_HERM)?;
            let overlap = epsi.overlap_sq(&ephi);
            (0..ephi.dim())
                .map(|k| {
                    logsumexp((0..epsi.dim()).filter_map(|j| {
                        let o = overlap[(j, k)];
                        (o > 0.0).then(|| -beta * epsi.values[j] + o.ln())
                    }))
                })
                .collect()
        };
        Ok(GibbsMoments { n, phi_values: ephi.values, log_weights })
    }

    /// `log p_n(α)`.
    pub fn log_pn(&self, alpha: f64) -> f64 {
        logsumexp(self.phi_values.iter().zip(&self.log_weights).map(|(&p, &w)| alpha * p + w))
    }

    /// `log Tr e^{-β H_Ψ}`.
    pub fn log_partition(&self) -> f64 {
        self.log_pn(0.0)
    }

    /// `log ω_n(e^{α H_Φ})` in the finite-volume Gibbs state.
    pub fn log_expectation(&self, alpha: f64) -> f64 {
        self.log_pn(alpha) - self.log_partition()
    }
}

pub(crate) fn observable_eigen(phi: &Interaction, window: Interval) -> Result<HermEigen> {
    let h = phi.hamiltonian(window)?;
    herm_eigen(h.matrix(), TAU_HERM)
}

/// `log p_n(α)` for `p_n(α) = Tr(e^{-β H_Ψ/2} e^{α H_Φ} e^{-β H_Ψ/2})` on `[1, n]`.
/// The value is returned in the log domain so large `α n` does not overflow.
pub fn pn_alpha(psi: &Interaction, phi: &Interaction, beta: f64, alpha: f64, n: usize) -> Result<f64> {
    Ok(GibbsMoments::new(psi, phi, beta, n)?.log_pn(alpha))
}

/// `log ω(e^{α H_Φ([1, n])})` for a finitely correlated state, over the
/// eigen-decomposition of `H_Φ([1, n])`.
#[derive(Clone, Debug)]
pub struct FcsMoments {
    pub n: usize,
    phi_values: Vec<f64>,
    log_weights: Vec<f64>,
}

impl FcsMoments {
    pub fn new(t: &FcsTriple, phi: &Interaction, n: usize) -> Result<Self> {
        if t.site_dim() != phi.site_dim() {
            return Err(domain("state and observable act on different site dimensions"));
        }
        let rho = t.local_density(n)?;
        let e = observable_eigen(phi, rho.support())?;
        let log_weights = e.diag_expectations(rho.matrix()).into_iter().map(|w| w.max(0.0).ln()).collect();
        Ok(FcsMoments { n, phi_values: e.values, log_weights })
    }

    pub fn log_expectation(&self, alpha: f64) -> f64 {
        logsumexp(self.phi_values.iter().zip(&self.log_weights).map(|(&p, &w)| alpha * p + w))
    }
}

enum Moments {
    Gibbs(GibbsMoments),
    Fcs(FcsMoments),
}

impl Moments {
    fn new(state: &ChainState, phi: &Interaction, n: usize) -> Result<Self> {
        Ok(match state {
            ChainState::Gibbs { psi, beta } => Moments::Gibbs(GibbsMoments::new(psi, phi, *beta, n)?),
            ChainState::Fcs(t) => Moments::Fcs(FcsMoments::new(t, phi, n)?),
        })
    }

    fn log_expectation(&self, alpha: f64) -> f64 {
        match self {
            Moments::Gibbs(g) => g.log_expectation(alpha),
            Moments::Fcs(f) => f.log_expectation(alpha),
        }
    }
}

/// `log ω(e^{α H_n})`, with the empty volume giving `0`.
fn log_expectations(state: &ChainState, phi: &Interaction, alphas: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(vec![0.0; alphas.len()]);
    }
    let m = Moments::new(state, phi, n)?;
    Ok(alphas.iter().map(|&a| m.log_expectation(a)).collect())
}

/// Largest and second largest volumes, falling back to `n - 1`.
fn top_two(n_range: &[usize]) -> Result<(usize, usize)> {
    let mut ns: Vec<usize> = n_range.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let n = *ns.last().ok_or_else(|| domain("volume list is empty"))?;
    if n == 0 {
        return Err(domain("volumes must be positive"));
    }
    let prev = if ns.len() >= 2 { ns[ns.len() - 2] } else { n - 1 };
    Ok((n, prev))
}

fn transfer_values(state: &ChainState, phi: &Interaction, alphas: &[f64], window: usize, margin: usize) -> Result<Vec<f64>> {
    match state {
        ChainState::Gibbs { psi, beta } => {
            let log_lambda = |a: f64| -> Result<f64> {
                let l = build_kms_operator(psi, phi, *beta, a, window, margin)?;
                Ok(leading_eigen(&l, DEFAULT_TOL, DEFAULT_MAX_ITER)?.lambda.ln())
            };
            let zero = log_lambda(0.0)?;
            alphas.iter().map(|&a| Ok(log_lambda(a)? - zero)).collect()
        }
        ChainState::Fcs(t) => alphas
            .iter()
            .map(|&a| {
                let l = build_fcs_operator(t, phi, a, window, margin)?;
                Ok(leading_eigen(&l, DEFAULT_TOL, DEFAULT_MAX_ITER)?.lambda.ln())
            })
            .collect(),
    }
}

fn transfer_minimum(phi: &Interaction, state: &ChainState) -> usize {
    let r = match state {
        ChainState::Gibbs { psi, .. } => psi.range().max(phi.range()),
        ChainState::Fcs(_) => phi.range(),
    };
    2 * r + 2
}

/// Estimates of `f(α) = lim (1/n) log ω(e^{α H_Φ([1, n])})` on a grid.
///
/// Gibbs expectations are normalised by the partition function, so the
/// transfer mode subtracts `log λ(0)` and the `log d` offsets cancel. The
/// error column is the spread between the two largest volumes for `Direct`
/// and `Increments`, and between windows `M` and `M - 1` for `Transfer`
/// (`NaN` when `M - 1` is too small).
pub fn log_mgf_curve(
    state: &ChainState,
    phi: &Interaction,
    alphas: &[f64],
    n_range: &[usize],
    mode: CurveMode,
) -> Result<RateCurve> {
    if alphas.is_empty() {
        return Err(domain("alpha grid is empty"));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("alpha grid must be strictly increasing"));
    }
    if state.site_dim() != phi.site_dim() {
        return Err(domain("state and observable act on different site dimensions"));
    }
    if let ChainState::Fcs(t) = state {
        t.primitivity_reduce(L_MAX)?;
    }
    let (n, prev) = top_two(n_range)?;
    let (f, err): (Vec<f64>, Vec<f64>) = match mode {
        CurveMode::Direct => {
            let a = log_expectations(state, phi, alphas, n)?;
            let b = log_expectations(state, phi, alphas, prev)?;
            a.iter()
                .zip(&b)
                .map(|(&x, &y)| {
                    let fa = x / n as f64;
                    let fb = if prev == 0 { fa } else { y / prev as f64 };
                    (fa, (fa - fb).abs())
                })
                .unzip()
        }
        CurveMode::Increments => {
            let mut cache: Vec<(usize, Vec<f64>)> = Vec::new();
            let mut get = |k: usize| -> Result<Vec<f64>> {
                if let Some((_, v)) = cache.iter().find(|(m, _)| *m == k) {
                    return Ok(v.clone());
                }
                let v = log_expectations(state, phi, alphas, k)?;
                cache.push((k, v.clone()));
                Ok(v)
            };
            let inc_n: Vec<f64> = get(n)?.iter().zip(get(n - 1)?).map(|(a, b)| a - b).collect();
            let inc_prev: Vec<f64> = if prev == 0 {
                inc_n.clone()
            } else {
                get(prev)?.iter().zip(get(prev - 1)?).map(|(a, b)| a - b).collect()
            };
            inc_n.iter().zip(&inc_prev).map(|(&a, &b)| (a, (a - b).abs())).unzip()
        }
        CurveMode::Transfer { window, margin } => {
            let main = transfer_values(state, phi, alphas, window, margin)?;
            let err = if window > transfer_minimum(phi, state) {
                let other = transfer_values(state, phi, alphas, window - 1, margin)?;
                main.iter().zip(&other).map(|(a, b)| (a - b).abs()).collect()
            } else {
                vec![f64::NAN; main.len()]
            };
            (main, err)
        }
    };
    RateCurve::from_samples(alphas.to_vec(), f, err)
}
