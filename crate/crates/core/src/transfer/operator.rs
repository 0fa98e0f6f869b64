use crate::chain::boundary::straddle_in;
use crate::chain::Interaction;
use crate::error::{domain, Result};
use crate::expansional::{expansional, kms_weight_element, Backend, WeightParams};
use crate::kernel::dense::scaled;
use crate::kernel::operator::check_cap;
use crate::kernel::tensor::partial_trace_factors;
use crate::kernel::{Interval, LocalOperator};
use crate::states::FcsTriple;
use faer::{c64, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKind {
    /// Gibbs chain: operators on `[0, M-1]`, site 0 playing the role of `B`.
    Kms,
    /// Finitely correlated chain: operators on `[-M, -1] ⊗ B`.
    Fcs,
}

/// A transfer operator `L(Q) = channel(a* Q a)` on a finite window.
///
/// Operators are dense matrices on the window, with `B` as the last tensor
/// factor for the finitely correlated kind.
#[derive(Clone, Debug)]
pub struct TruncatedTransferOperator {
    pub kind: TransferKind,
    pub alpha: f64,
    pub window: Interval,
    /// Requested expansional margin.
    pub margin: usize,
    /// Margin actually used once the weight is clipped to the window.
    pub effective_margin: usize,
    pub site_dim: usize,
    pub bond_dim: usize,
    a: Mat<c64>,
    a_adj: Mat<c64>,
    triple: Option<FcsTriple>,
}

/// `log λ + log d`, the per-site growth of `p_n` predicted by the leading
/// eigenvalue `λ` of the Gibbs transfer operator.
pub fn kms_log_increment(lambda: f64, site_dim: usize) -> f64 {
    lambda.ln() + (site_dim as f64).ln()
}

/// The Gibbs transfer operator on `[0, M-1]`:
/// `L(Q) = shift_{-1} (d^{-1} Tr_{0} ⊗ id)(a* Q a)`, re-embedded with an
/// identity at site `M-1`, where `a` is the weight element at site 1 with
/// margin `min(N, M-2)`.
pub fn build_kms_operator(
    psi: &Interaction,
    phi: &Interaction,
    beta: f64,
    alpha: f64,
    m: usize,
    n: usize,
) -> Result<TruncatedTransferOperator> {
    let range = psi.range().max(phi.range());
    if m < 2 * range + 2 {
        return Err(domain(format!("window size {m} is below 2r + 2 = {}", 2 * range + 2)));
    }
    let d = psi.site_dim();
    check_cap("transfer window", d, m, 1)?;
    let eff = n.min(m - 2);
    let p = WeightParams { psi, phi, beta, alpha };
    let w = kms_weight_element(p, 1, eff, m as i64 - 1)?;
    let window = Interval::new(0, m as i64 - 1);
    let a = w.element.embed(window)?.into_matrix();
    Ok(TruncatedTransferOperator {
        kind: TransferKind::Kms,
        alpha,
        window,
        margin: n,
        effective_margin: eff,
        site_dim: d,
        bond_dim: 1,
        a_adj: a.adjoint().to_owned(),
        a,
        triple: None,
    })
}

/// The finitely correlated transfer operator on `[-M, -1] ⊗ B`:
/// `L(Q) = 1 ⊗ (id ⊗ E)(a* Q a)` with
/// `a = E_r(α/2 Ĥ^l(-1); α/2 H[-N'-1, -2])` and `N' = min(N, M-1)`.
pub fn build_fcs_operator(
    t: &FcsTriple,
    phi: &Interaction,
    alpha: f64,
    m: usize,
    n: usize,
) -> Result<TruncatedTransferOperator> {
    let d = t.site_dim();
    if phi.site_dim() != d {
        return Err(domain("observable and triple have different site dimensions"));
    }
    let range = phi.range();
    if m < 2 * range + 2 {
        return Err(domain(format!("window size {m} is below 2r + 2 = {}", 2 * range + 2)));
    }
    check_cap("transfer window", d, m, t.bond_dim())?;
    let eff = n.min(m - 1);
    let j = Interval::new(-(eff as i64) - 1, -1);
    let surface = straddle_in(phi, -1, j, j.lo)?;
    let rest = phi.hamiltonian(Interval::new(j.lo, -2))?.embed(j)?;
    let a_j = expansional(&surface.scale(alpha / 2.0), &rest.scale(alpha / 2.0), Backend::ClosedForm)?;
    let window = Interval::new(-(m as i64), -1);
    let a_w = a_j.embed(window)?;
    let b = t.bond_dim();
    let a = a_w.into_matrix().kron(&Mat::<c64>::identity(b, b));
    Ok(TruncatedTransferOperator {
        kind: TransferKind::Fcs,
        alpha,
        window,
        margin: n,
        effective_margin: eff,
        site_dim: d,
        bond_dim: b,
        a_adj: a.adjoint().to_owned(),
        a,
        triple: Some(t.clone()),
    })
}

impl TruncatedTransferOperator {
    /// Matrix dimension of the operators the map acts on.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The weight element on the full window.
    pub fn weight(&self) -> &Mat<c64> {
        &self.a
    }

    pub fn apply(&self, q: &Mat<c64>) -> Mat<c64> {
        let x = &self.a_adj * q * &self.a;
        let d = self.site_dim;
        let n = self.dim();
        match self.kind {
            TransferKind::Kms => {
                let inner = n / d;
                let mut y = Mat::<c64>::zeros(inner, inner);
                for i in 0..d {
                    y += x.as_ref().submatrix(i * inner, i * inner, inner, inner);
                }
                scaled(&y, 1.0 / d as f64).kron(&Mat::<c64>::identity(d, d))
            }
            TransferKind::Fcs => {
                let t = self.triple.as_ref().unwrap();
                let b = self.bond_dim;
                let db = d * b;
                let outer = n / db;
                let mut z = Mat::<c64>::zeros(outer * b, outer * b);
                for jb in 0..outer {
                    for ib in 0..outer {
                        let block = x.as_ref().submatrix(ib * db, jb * db, db, db).to_owned();
                        z.as_mut().submatrix_mut(ib * b, jb * b, b, b).copy_from(&t.channel(&block));
                    }
                }
                Mat::<c64>::identity(d, d).kron(&z)
            }
        }
    }

    /// Hilbert-Schmidt adjoint of `apply`.
    pub fn apply_adjoint(&self, s: &Mat<c64>) -> Mat<c64> {
        let d = self.site_dim;
        let n = self.dim();
        let inner = n / d;
        let w = match self.kind {
            TransferKind::Kms => {
                let last = partial_trace_factors(s, &[inner, d], &[1]);
                Mat::<c64>::identity(d, d).kron(&scaled(&last, 1.0 / d as f64))
            }
            TransferKind::Fcs => {
                let t = self.triple.as_ref().unwrap();
                let first = partial_trace_factors(s, &[d, inner], &[0]);
                t.extend(&first)
            }
        };
        &self.a * w * &self.a_adj
    }

    /// Dense superoperator on column-major vectorised operators. Only for
    /// windows with at most four sites.
    pub fn dense_matrix(&self) -> Result<Mat<c64>> {
        if self.window.len() > 4 {
            return Err(domain("dense superoperator assembly is limited to windows of at most 4 sites"));
        }
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n * n, n * n);
        for j in 0..n {
            for i in 0..n {
                let mut e = Mat::<c64>::zeros(n, n);
                e[(i, j)] = c64::new(1.0, 0.0);
                let img = self.apply(&e);
                for q in 0..n {
                    for p in 0..n {
                        m[(p + q * n, i + j * n)] = img[(p, q)];
                    }
                }
            }
        }
        Ok(m)
    }

    /// Identity on the window, the canonical starting point.
    pub fn identity(&self) -> Mat<c64> {
        Mat::identity(self.dim(), self.dim())
    }

    /// Embeds a local operator on the window (times `1_B` for the finitely
    /// correlated kind).
    pub fn embed_local(&self, q: &LocalOperator) -> Result<Mat<c64>> {
        let m = q.embed(self.window)?.into_matrix();
        Ok(m.kron(&Mat::<c64>::identity(self.bond_dim, self.bond_dim)))
    }
}
