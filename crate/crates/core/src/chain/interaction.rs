use crate::error::{domain, Result};
use crate::kernel::dense::re;
use crate::kernel::operator::{check_cap, hermitian_asymmetry, op_norm};
use crate::kernel::spectral::TAU_HERM;
use crate::kernel::tensor::{embed_add_into, embed_factors};
use crate::kernel::{Interval, LocalOperator};
use crate::Error;
use faer::{c64, Mat};

/// One generator: a canonical shape `X` with `min X = 0` and the term
/// `Φ(X)` stored on the hull `[0, diam X]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    shape: Vec<i64>,
    op: LocalOperator,
}

impl Term {
    pub fn shape(&self) -> &[i64] {
        &self.shape
    }

    /// The term on its hull `[0, diam]`.
    pub fn operator(&self) -> &LocalOperator {
        &self.op
    }

    pub fn diam(&self) -> i64 {
        *self.shape.last().unwrap()
    }
}

/// Finite-range translation-invariant interaction on a chain with local
/// dimension `site_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    site_dim: usize,
    terms: Vec<Term>,
}

impl Interaction {
    /// Builds an interaction from `(shape, matrix)` generators, where the
    /// matrix acts on the sites of `shape` in the listed order.
    ///
    /// Shapes are translated to start at 0 and sorted, and terms sharing a
    /// shape are merged.
    pub fn new(site_dim: usize, generators: Vec<(Vec<i64>, Mat<c64>)>) -> Result<Self> {
        if site_dim < 2 {
            return Err(domain(format!("site dimension must be at least 2, got {site_dim}")));
        }
        let mut terms: Vec<Term> = Vec::new();
        for (k, (shape, m)) in generators.into_iter().enumerate() {
            let term = canonical_term(site_dim, shape, m).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("generator {k}: {msg}")),
                other => other,
            })?;
            match terms.iter_mut().find(|t| t.shape == term.shape) {
                Some(t) => t.op = t.op.add(&term.op)?,
                None => terms.push(term),
            }
        }
        terms.sort_by(|a, b| a.shape.cmp(&b.shape));
        Ok(Interaction { site_dim, terms })
    }

    pub fn zero(site_dim: usize) -> Self {
        Interaction { site_dim, terms: Vec::new() }
    }

    /// Interaction with the single one-site generator `m`.
    pub fn one_site(m: Mat<c64>) -> Result<Self> {
        Self::new(m.nrows(), vec![(vec![0], m)])
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// `1 + max diam X`; every shape has diameter strictly below the range.
    pub fn range(&self) -> usize {
        1 + self.terms.iter().map(|t| t.diam() as usize).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.op.matrix().norm_l2() == 0.0)
    }

    /// Sum of `Φ(X + x)` over translates whose hull lies in `window` and
    /// whose site set passes `keep`.
    pub fn sum_translates(&self, window: Interval, keep: impl Fn(&[i64]) -> bool) -> Result<LocalOperator> {
        let dim = check_cap("hamiltonian window", self.site_dim, window.len(), 1)?;
        let mut m = Mat::<c64>::zeros(dim, dim);
        let dims = vec![self.site_dim; window.len()];
        let mut sites = Vec::new();
        for t in &self.terms {
            let diam = t.diam();
            if window.is_empty() || (window.len() as i64) <= diam {
                continue;
            }
            for x in window.lo..=window.hi - diam {
                sites.clear();
                sites.extend(t.shape.iter().map(|s| s + x));
                if !keep(&sites) {
                    continue;
                }
                let start = (x - window.lo) as usize;
                let positions: Vec<usize> = (start..=start + diam as usize).collect();
                embed_add_into(&mut m, &dims, &positions, t.op.matrix(), re(1.0));
            }
        }
        LocalOperator::new(m, window, self.site_dim)
    }

    /// `H(Λ) = Σ_{I ⊂ Λ} Φ(I)`.
    pub fn hamiltonian(&self, window: Interval) -> Result<LocalOperator> {
        self.sum_translates(window, |_| true)
    }

    /// `Σ_{X ∋ 0} |X|^{-1} ‖Φ(X)‖`, which equals the sum of generator norms.
    pub fn norm(&self) -> f64 {
        self.terms.iter().map(|t| op_norm(t.op.matrix())).sum()
    }

    /// The interaction `X -> R(Φ(-X))` under the site reflection `R`.
    pub fn reflected(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let d = t.diam();
                let mut shape: Vec<i64> = t.shape.iter().map(|s| d - s).collect();
                shape.sort_unstable();
                Term { shape, op: t.op.reflected().shifted(d) }
            })
            .collect();
        let mut out = Interaction { site_dim: self.site_dim, terms };
        out.terms.sort_by(|a, b| a.shape.cmp(&b.shape));
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let terms = self.terms.iter().map(|t| Term { shape: t.shape.clone(), op: t.op.scale(c) }).collect();
        Interaction { site_dim: self.site_dim, terms }
    }

    /// `Σ_k c_k Φ_k`.
    pub fn linear_combination(parts: &[(f64, &Interaction)]) -> Result<Self> {
        let d = parts.first().map(|p| p.1.site_dim).ok_or_else(|| domain("empty linear combination"))?;
        let mut gens = Vec::new();
        for (c, phi) in parts {
            if phi.site_dim != d {
                return Err(domain("site dimensions differ"));
            }
            for t in &phi.terms {
                let hull = Interval::new(0, t.diam());
                gens.push((hull.sites().collect(), t.op.scale(*c).into_matrix()));
            }
        }
        Self::new(d, gens)
    }

    /// The same interaction seen on blocks of `l` consecutive sites, with
    /// local dimension `d^l`.
    pub fn blocked(&self, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(domain("block length must be positive"));
        }
        if l == 1 {
            return Ok(self.clone());
        }
        let bd = check_cap("blocked site", self.site_dim, l, 1)?;
        let li = l as i64;
        let mut gens = Vec::new();
        for t in &self.terms {
            for x in 0..li {
                let last_block = (t.diam() + x) / li;
                let nblocks = (last_block + 1) as usize;
                check_cap("blocked term", self.site_dim, nblocks * l, 1)?;
                let dims = vec![self.site_dim; nblocks * l];
                let positions: Vec<usize> = (x as usize..=(x + t.diam()) as usize).collect();
                let m = embed_factors(t.op.matrix(), &dims, &positions);
                gens.push(((0..=last_block).collect(), m));
            }
        }
        if gens.is_empty() {
            return Ok(Interaction::zero(bd));
        }
        Self::new(bd, gens)
    }
}

fn canonical_term(d: usize, shape: Vec<i64>, m: Mat<c64>) -> Result<Term> {
    if shape.is_empty() {
        return Err(domain("shape is empty"));
    }
    let mut sorted = shape.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(domain(format!("shape {shape:?} repeats a site")));
    }
    let k = shape.len();
    let dim = check_cap("generator", d, k, 1)?;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(domain(format!("shape {shape:?} needs a {dim}x{dim} matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let asym = hermitian_asymmetry(&m);
    let norm = m.norm_l2();
    if asym > TAU_HERM * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { asymmetry: asym, norm });
    }
    let m = crate::kernel::dense::hermitian_part(&m);
    // Sort the factors of m into ascending site order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| shape[i]);
    let m = crate::kernel::tensor::permute_factors(&m, &vec![d; k], &order);
    let lo = sorted[0];
    let canon: Vec<i64> = sorted.iter().map(|s| s - lo).collect();
    let diam = *canon.last().unwrap();
    check_cap("generator hull", d, diam as usize + 1, 1)?;
    let dims = vec![d; diam as usize + 1];
    let positions: Vec<usize> = canon.iter().map(|&s| s as usize).collect();
    let hull = embed_factors(&m, &dims, &positions);
    Ok(Term { shape: canon, op: LocalOperator::new(hull, Interval::new(0, diam), d)? })
}
