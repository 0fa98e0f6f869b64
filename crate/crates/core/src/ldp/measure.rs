use super::legendre::RateCurve;
use super::moments::{observable_eigen, ChainState};
use crate::chain::Interaction;
use crate::error::{domain, Result};
use crate::kernel::spectral::{herm_eigen, HermEigen, RealSet, TAU_HERM};
use crate::kernel::Interval;
use crate::numeric::logsumexp;
use crate::states::L_MAX;
use serde::Serialize;

/// Eigenvalues closer than this are merged into one atom; interval edges are
/// widened by the same amount.
pub const TAU_DEGEN: f64 = 1e-9;

/// Distribution of `(1/n) H_Φ([1, n])` in a state.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralMeasure {
    pub n: usize,
    /// `(x, w)` with `x` ascending.
    pub atoms: Vec<(f64, f64)>,
}

impl SpectralMeasure {
    /// Merges `(x, w)` pairs sorted by `x` whose gaps are within `TAU_DEGEN`.
    /// The merged location is the weight-averaged one, or the plain mean when
    /// the cluster carries no weight.
    pub fn from_sorted(n: usize, pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut cluster: Vec<(f64, f64)> = Vec::new();
        let flush = |cluster: &mut Vec<(f64, f64)>, atoms: &mut Vec<(f64, f64)>| {
            if cluster.is_empty() {
                return;
            }
            let w: f64 = cluster.iter().map(|c| c.1).sum();
            let x = if w > 0.0 {
                cluster.iter().map(|c| c.0 * c.1).sum::<f64>() / w
            } else {
                cluster.iter().map(|c| c.0).sum::<f64>() / cluster.len() as f64
            };
            atoms.push((x, w));
            cluster.clear();
        };
        for (x, w) in pairs {
            if let Some(&(last, _)) = cluster.last() {
                if x - last > TAU_DEGEN {
                    flush(&mut cluster, &mut atoms);
                }
            }
            cluster.push((x, w.max(0.0)));
        }
        flush(&mut cluster, &mut atoms);
        SpectralMeasure { n, atoms }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `μ_n(S)`, counting atoms within `TAU_DEGEN` of a closed edge.
    pub fn mass(&self, set: &RealSet) -> f64 {
        self.atoms.iter().filter(|a| set.contains_tol(a.0, TAU_DEGEN)).map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(x, w)| x * w).sum()
    }

    /// `(1/n) log Σ w e^{n α x}`.
    pub fn log_mgf(&self, alpha: f64) -> f64 {
        let n = self.n as f64;
        logsumexp(self.atoms.iter().filter(|a| a.1 > 0.0).map(|&(x, w)| n * alpha * x + w.ln())) / n
    }

    /// Rows `(n, x, w)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.atoms.iter().map(move |&(x, w)| (self.n, x, w))
    }
}

/// Weights of the eigenvectors of `H_Φ([1, n])` in the state.
pub(crate) fn state_weights(state: &ChainState, e: &HermEigen, n: usize) -> Result<Vec<f64>> {
    if state.is_tracial() {
        return Ok(vec![1.0 / e.dim() as f64; e.dim()]);
    }
    let rho = match state {
        ChainState::Gibbs { psi, beta } => crate::states::gibbs_density(psi, *beta, n)?,
        ChainState::Fcs(t) => {
            t.primitivity_reduce(L_MAX)?;
            t.local_density(n)?
        }
    };
    Ok(e.diag_expectations(rho.matrix()))
}

/// `μ_n(B) = ω(1_B((1/n) H_Φ([1, n])))`.
pub fn spectral_measure(state: &ChainState, phi: &Interaction, n: usize) -> Result<SpectralMeasure> {
    if n == 0 {
        return Err(domain("volume must be positive"));
    }
    if state.site_dim() != phi.site_dim() {
        return Err(domain("state and observable act on different site dimensions"));
    }
    let e = observable_eigen(phi, Interval::new(1, n as i64))?;
    let w = state_weights(state, &e, n)?;
    let inv = 1.0 / n as f64;
    Ok(SpectralMeasure::from_sorted(n, e.values.iter().map(|v| v * inv).zip(w)))
}

/// Spectral measure of `(1/n) H` for an explicit Hermitian matrix and state.
pub fn spectral_measure_of(h: &faer::Mat<faer::c64>, rho: &faer::Mat<faer::c64>, n: usize) -> Result<SpectralMeasure> {
    let e = herm_eigen(h, TAU_HERM)?;
    let w = e.diag_expectations(rho);
    let inv = 1.0 / n as f64;
    Ok(SpectralMeasure::from_sorted(n, e.values.iter().map(|v| v * inv).zip(w)))
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsRow {
    pub n: usize,
    pub mass: f64,
    /// `(1/n) log μ_n(S)`, `-inf` for zero mass.
    pub log_rate: f64,
    /// `|(1/n) log μ_n(S) + inf_S I|`.
    pub discrepancy: f64,
    /// Slack `ε_n` in the upper bound.
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalReport {
    pub lo: f64,
    pub hi: f64,
    /// `-inf_S I`.
    pub neg_inf_rate: f64,
    pub rows: Vec<BoundsRow>,
    /// First volume with zero mass, if any.
    pub mass_vanished_at: Option<usize>,
    /// `(1/n) log μ_n(S) <= -inf_S I + ε_n` at the largest volume.
    pub upper_bound_holds: bool,
    /// Discrepancies strictly decrease along the volumes.
    pub discrepancy_decreasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub intervals: Vec<IntervalReport>,
}

impl BoundsReport {
    pub fn all_upper_bounds_hold(&self) -> bool {
        self.intervals.iter().all(|r| r.upper_bound_holds)
    }
}

/// Slack in the finite-volume upper bound: `log(n + 1) / n` plus the
/// largest curve error estimate.
pub fn upper_bound_slack(n: usize, curve: &RateCurve) -> f64 {
    let err = curve.f_err.iter().copied().filter(|e| e.is_finite()).fold(0.0, f64::max);
    ((n + 1) as f64).ln() / n as f64 + err
}

/// Compares `(1/n) log μ_n(S)` against `-inf_S I` for closed intervals.
pub fn ldp_bounds_check(measures: &[SpectralMeasure], curve: &RateCurve, sets: &[RealSet]) -> Result<BoundsReport> {
    if measures.windows(2).any(|w| w[1].n <= w[0].n) {
        return Err(domain("measures must be ordered by increasing volume"));
    }
    if curve.i_values.is_empty() {
        return Err(domain("rate function has not been computed"));
    }
    let intervals = sets
        .iter()
        .map(|set| {
            let neg = -curve.inf_rate(set);
            let rows: Vec<BoundsRow> = measures
                .iter()
                .map(|m| {
                    let mass = m.mass(set);
                    let log_rate = if mass > 0.0 { mass.ln() / m.n as f64 } else { f64::NEG_INFINITY };
                    let discrepancy = if log_rate == neg { 0.0 } else { (log_rate - neg).abs() };
                    BoundsRow { n: m.n, mass, log_rate, discrepancy, slack: upper_bound_slack(m.n, curve) }
                })
                .collect();
            let mass_vanished_at = rows.iter().find(|r| r.mass <= 0.0).map(|r| r.n);
            let upper_bound_holds = rows.last().is_none_or(|r| r.log_rate <= neg + r.slack);
            let discrepancy_decreasing = rows.windows(2).all(|w| w[1].discrepancy < w[0].discrepancy);
            IntervalReport {
                lo: set.lo,
                hi: set.hi,
                neg_inf_rate: neg,
                rows,
                mass_vanished_at,
                upper_bound_holds,
                discrepancy_decreasing,
            }
        })
        .collect();
    Ok(BoundsReport { intervals })
}
