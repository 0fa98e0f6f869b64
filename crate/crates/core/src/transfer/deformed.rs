use crate::error::{Error, Result};
use crate::kernel::dense::trace;
use crate::kernel::expm::exp_herm;
use crate::states::FcsTriple;
use faer::{c64, Mat};

/// `T_α(y) = E(e^{αA} ⊗ y)` on `M_b` for a one-site observable `A`.
#[derive(Clone, Debug)]
pub struct DeformedTransfer {
    pub alpha: f64,
    /// Matrix of `T_α` on column-major vectorised `b × b` matrices.
    pub matrix: Mat<c64>,
    /// Spectral radius of `T_α`.
    pub lambda: f64,
    exp_a: Mat<c64>,
    triple: FcsTriple,
}

impl DeformedTransfer {
    pub fn apply(&self, y: &Mat<c64>) -> Mat<c64> {
        self.triple.channel(&self.exp_a.kron(y))
    }

    /// `log λ(α)`.
    pub fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    /// `ρ(T_α^n(1)) = ω(e^{αA_1} ⋯ e^{αA_n})`.
    pub fn product_expectation(&self, n: usize) -> f64 {
        let b = self.triple.bond_dim();
        let mut y = Mat::<c64>::identity(b, b);
        for _ in 0..n {
            y = self.apply(&y);
        }
        trace(&(self.triple.rho() * &y)).re
    }
}

pub fn fc_deformed_transfer(t: &FcsTriple, a: &Mat<c64>, alpha: f64) -> Result<DeformedTransfer> {
    if a.nrows() != t.site_dim() {
        return Err(crate::error::domain("observable does not act on one site"));
    }
    let exp_a = exp_herm(a, alpha)?;
    let b = t.bond_dim();
    let mut matrix = Mat::<c64>::zeros(b * b, b * b);
    for j in 0..b {
        for i in 0..b {
            let mut e = Mat::<c64>::zeros(b, b);
            e[(i, j)] = c64::new(1.0, 0.0);
            let img = t.channel(&exp_a.kron(&e));
            for q in 0..b {
                for p in 0..b {
                    matrix[(p + q * b, i + j * b)] = img[(p, q)];
                }
            }
        }
    }
    let ev = matrix.eigenvalues().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let lambda = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(DeformedTransfer { alpha, matrix, lambda, exp_a, triple: t.clone() })
}
