use crate::chain::Interaction;
use crate::error::{domain, Result};
use crate::kernel::operator::check_cap;
use crate::kernel::spectral::{herm_eigen, HermEigen, TAU_HERM};
use crate::kernel::{Interval, LocalOperator};
use crate::numeric::logsumexp;
use faer::{c64, Mat};

/// The Gibbs state `e^{-β H_Ψ([1, n])} / Z` on `n` sites.
#[derive(Clone, Debug)]
pub struct GibbsFiniteState {
    pub psi: Interaction,
    pub beta: f64,
    pub n: usize,
}

impl GibbsFiniteState {
    pub fn new(psi: Interaction, beta: f64, n: usize) -> Result<Self> {
        if !beta.is_finite() {
            return Err(domain("inverse temperature must be finite"));
        }
        check_cap("Gibbs state", psi.site_dim(), n, 1)?;
        Ok(GibbsFiniteState { psi, beta, n })
    }

    pub fn window(&self) -> Interval {
        Interval::new(1, self.n as i64)
    }

    pub fn hamiltonian(&self) -> Result<LocalOperator> {
        self.psi.hamiltonian(self.window())
    }

    pub fn density(&self) -> Result<LocalOperator> {
        let h = self.hamiltonian()?;
        let e = herm_eigen(h.matrix(), TAU_HERM)?;
        LocalOperator::new(density_from_eigen(&e, self.beta), h.support(), h.site_dim())
    }

    pub fn log_partition(&self) -> Result<f64> {
        let h = self.hamiltonian()?;
        let e = herm_eigen(h.matrix(), TAU_HERM)?;
        Ok(log_partition_from_eigen(&e, self.beta))
    }
}

pub(crate) fn log_partition_from_eigen(e: &HermEigen, beta: f64) -> f64 {
    logsumexp(e.values.iter().map(|&x| -beta * x))
}

/// Gibbs weights `e^{-β λ_k} / Z` over the eigenbasis.
pub(crate) fn gibbs_weights(e: &HermEigen, beta: f64) -> Vec<f64> {
    let lz = log_partition_from_eigen(e, beta);
    e.values.iter().map(|&x| (-beta * x - lz).exp()).collect()
}

pub(crate) fn density_from_eigen(e: &HermEigen, beta: f64) -> Mat<c64> {
    e.from_weights(&gibbs_weights(e, beta))
}

/// `e^{-β H_Ψ([1, n])} / Tr e^{-β H_Ψ([1, n])}`.
pub fn gibbs_density(psi: &Interaction, beta: f64, n: usize) -> Result<LocalOperator> {
    GibbsFiniteState::new(psi.clone(), beta, n)?.density()
}

/// `log Tr e^{-β H_Ψ([1, n])}`.
pub fn log_partition(psi: &Interaction, beta: f64, n: usize) -> Result<f64> {
    GibbsFiniteState::new(psi.clone(), beta, n)?.log_partition()
}

/// Von Neumann entropy `-Tr ρ log ρ` of a density matrix.
pub fn von_neumann_entropy(rho: &Mat<c64>) -> Result<f64> {
    let e = herm_eigen(rho, TAU_HERM)?;
    Ok(e.values.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum())
}

/// Smallest `C ≥ 1` with `C^{-1} ω ≤ σ ≤ C ω` for positive definite `ω`.
pub fn sandwich_constant(omega: &Mat<c64>, sigma: &Mat<c64>) -> Result<f64> {
    let e = herm_eigen(omega, TAU_HERM)?;
    if e.values[0] <= 0.0 {
        return Err(crate::Error::NotPositive { min_eigenvalue: e.values[0] });
    }
    let inv_sqrt = e.apply_function(|x| 1.0 / x.sqrt());
    let m = &inv_sqrt * sigma * &inv_sqrt;
    let r = herm_eigen(&crate::kernel::dense::hermitian_part(&m), TAU_HERM)?;
    let lo = r.values[0];
    let hi = *r.values.last().unwrap();
    if lo <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(hi.max(1.0 / lo).max(1.0))
}

/// `C_1(m)` comparing the `n`-site Gibbs state with the `[1, n]` marginal of
/// the Gibbs state on `[1-m, n+m]`, for every requested margin.
pub fn state_sandwich_check(psi: &Interaction, beta: f64, n: usize, margins: &[usize]) -> Result<Vec<(usize, f64)>> {
    let omega = gibbs_density(psi, beta, n)?;
    let mut out = Vec::with_capacity(margins.len());
    for &m in margins {
        let big = GibbsFiniteState::new(psi.clone(), beta, n + 2 * m)?;
        let rho = big.density()?.shifted(-(m as i64));
        let traced: Vec<i64> = (1 - m as i64..=0).chain(n as i64 + 1..=(n + m) as i64).collect();
        let marginal = rho.partial_trace(&traced)?;
        out.push((m, sandwich_constant(omega.matrix(), marginal.matrix())?));
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::dense::{re, scaled, trace};
    use crate::models::{magnetization, pauli, transverse_ising};

    #[test]
    fn infinite_temperature() {
        let psi = transverse_ising(1.0, 0.7).unwrap();
        let rho = gibbs_density(&psi, 0.0, 3).unwrap();
        assert!((rho.matrix() - scaled(&Mat::<c64>::identity(8, 8), 0.125)).norm_l2() < 1e-14);
    }

    #[test]
    fn one_site_product() {
        let beta = 0.9;
        let rho = gibbs_density(&magnetization(), beta, 3).unwrap();
        let z = (-beta).exp() + beta.exp();
        let one = Mat::<c64>::from_fn(2, 2, |i, j| if i != j { re(0.0) } else { re([(-beta).exp(), beta.exp()][i] / z) });
        let expect = one.kron(&one).kron(&one);
        assert!((rho.matrix() - &expect).norm_l2() < 1e-14);
    }

    #[test]
    fn unit_trace_and_commutation() {
        let psi = transverse_ising(-0.6, 1.1).unwrap();
        let st = GibbsFiniteState::new(psi, 0.8, 4).unwrap();
        let rho = st.density().unwrap();
        assert!((trace(rho.matrix()).re - 1.0).abs() < 1e-13);
        let h = st.hamiltonian().unwrap();
        let c = rho.matrix() * h.matrix() - h.matrix() * rho.matrix();
        assert!(c.norm_l2() < 1e-13);
    }

    #[test]
    fn entropy_identity() {
        let psi = transverse_ising(1.0, 0.5).unwrap();
        let beta = 0.7;
        let st = GibbsFiniteState::new(psi, beta, 5).unwrap();
        let rho = st.density().unwrap();
        let energy = trace(&(rho.matrix() * st.hamiltonian().unwrap().matrix())).re;
        let s = von_neumann_entropy(rho.matrix()).unwrap();
        assert!((s - (st.log_partition().unwrap() + beta * energy)).abs() < 1e-10);
    }

    #[test]
    fn sandwich_trivial_cases() {
        let psi = transverse_ising(1.0, 0.5).unwrap();
        for (_, c) in state_sandwich_check(&psi, 0.0, 3, &[1, 2]).unwrap() {
            assert!((c - 1.0).abs() < 1e-12);
        }
        let z = Interaction::one_site(scaled(&pauli::z(), 0.8)).unwrap();
        for (_, c) in state_sandwich_check(&z, 1.3, 3, &[1, 2]).unwrap() {
            assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sandwich_stabilizes_with_margin() {
        let psi = transverse_ising(1.0, 1.0).unwrap();
        let c: Vec<f64> = state_sandwich_check(&psi, 1.0, 4, &[1, 2, 3]).unwrap().into_iter().map(|r| r.1).collect();
        assert!(c[0] > 1.0, "{c:?}");
        assert!((c[2] - c[1]).abs() < 0.1 * (c[1] - c[0]).abs(), "{c:?}");
    }
}
