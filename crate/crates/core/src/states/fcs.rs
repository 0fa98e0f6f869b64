use crate::error::{domain, Error, Result};
use crate::kernel::dense::{hermitian_part, re, trace};
use crate::kernel::operator::{check_cap, op_norm};
use crate::kernel::spectral::{herm_eigen, TAU_HERM};
use crate::kernel::tensor::partial_trace_factors;
use crate::kernel::{Interval, LocalOperator};
use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tolerance on unitality and invariance of a triple.
pub const TRIPLE_TOL: f64 = 1e-12;
/// Modulus distance from 1 below which an eigenvalue is peripheral.
pub const TAU_PERIPH: f64 = 1e-8;
/// Largest block length tried by the primitivity reduction.
pub const L_MAX: usize = 64;

/// A finitely correlated state generator `(M_b, E, ρ)`.
///
/// `E: M_d ⊗ M_b → M_b` is the unital completely positive map
/// `E(X) = Σ_k V_k* X V_k` with Kraus operators `V_k` of shape `(d b) × b`,
/// the site factor coming first. `rho` is the faithful density matrix of the
/// state `ρ` on `M_b`, invariant under `Tr_{M_d} ∘ E*`.
///
/// The `n`-site density is `Tr_B (id ⊗ E*)^{n-1} E*(ρ)`: each step appends a
/// site between the existing sites and `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct FcsTriple {
    d: usize,
    b: usize,
    kraus: Vec<Mat<c64>>,
    rho: Mat<c64>,
}

/// Measured deviations from the defining properties of a triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripleViolations {
    /// `‖E(1 ⊗ 1) - 1‖`.
    pub unitality: f64,
    /// `‖Tr_{M_d} E*(ρ) - ρ‖`.
    pub invariance: f64,
    /// `|Tr ρ - 1|`.
    pub normalization: f64,
    /// Smallest eigenvalue of `ρ`.
    pub min_rho: f64,
}

#[derive(Clone, Debug)]
pub struct ChannelSpectrum {
    /// Eigenvalues of `Ê_1` in decreasing modulus.
    pub eigenvalues: Vec<c64>,
    /// Eigenvalues of modulus within `TAU_PERIPH` of 1 other than the leading 1.
    pub peripheral: Vec<c64>,
    /// Largest modulus among the non-leading eigenvalues.
    pub second_modulus: f64,
}

/// Outcome of the primitivity reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitivity {
    /// Block length.
    pub l: usize,
    /// Sandwich constant: `s^{-1} ρ(x) 1 ≤ Ê_1^l(x) ≤ s ρ(x) 1` for `x ≥ 0`.
    pub s: f64,
    /// Smallest ratio `<u|Ê_1^l(vv*)|u> / <v|ρ|v>` found.
    pub inf_ratio: f64,
    /// Largest ratio found.
    pub sup_ratio: f64,
}

impl FcsTriple {
    /// Validates unitality, invariance and faithfulness to `TRIPLE_TOL`.
    pub fn new(d: usize, kraus: Vec<Mat<c64>>, rho: Mat<c64>) -> Result<Self> {
        let t = Self::new_unchecked(d, kraus, rho)?;
        let v = t.violations()?;
        if v.unitality > TRIPLE_TOL {
            return Err(Error::InvalidTriple { what: "unitality E(1 ⊗ 1) = 1".into(), violation: v.unitality });
        }
        if v.normalization > TRIPLE_TOL {
            return Err(Error::InvalidTriple { what: "unit trace of ρ".into(), violation: v.normalization });
        }
        if v.invariance > TRIPLE_TOL {
            return Err(Error::InvalidTriple { what: "invariance Tr_{M_d} E*(ρ) = ρ".into(), violation: v.invariance });
        }
        if v.min_rho <= 0.0 {
            return Err(Error::InvalidTriple { what: "faithfulness of ρ".into(), violation: -v.min_rho });
        }
        Ok(t)
    }

    /// Checks only shapes; the defining properties may fail.
    pub fn new_unchecked(d: usize, kraus: Vec<Mat<c64>>, rho: Mat<c64>) -> Result<Self> {
        if d < 2 {
            return Err(domain(format!("site dimension must be at least 2, got {d}")));
        }
        let b = rho.nrows();
        if b == 0 || rho.ncols() != b {
            return Err(domain("ρ must be a non-empty square matrix"));
        }
        if kraus.is_empty() {
            return Err(domain("at least one Kraus operator is required"));
        }
        for (k, v) in kraus.iter().enumerate() {
            if v.nrows() != d * b || v.ncols() != b {
                return Err(domain(format!(
                    "Kraus operator {k} is {}x{}, expected {}x{b}",
                    v.nrows(),
                    v.ncols(),
                    d * b
                )));
            }
        }
        Ok(FcsTriple { d, b, kraus, rho })
    }

    pub fn site_dim(&self) -> usize {
        self.d
    }

    pub fn bond_dim(&self) -> usize {
        self.b
    }

    pub fn kraus(&self) -> &[Mat<c64>] {
        &self.kraus
    }

    pub fn rho(&self) -> &Mat<c64> {
        &self.rho
    }

    pub fn violations(&self) -> Result<TripleViolations> {
        let id = Mat::<c64>::identity(self.b, self.b);
        let unitality = op_norm(&(self.e1(&id) - &id));
        let invariance = op_norm(&(self.e1_dual(&self.rho) - &self.rho));
        let normalization = (trace(&self.rho) - re(1.0)).norm();
        let asym = crate::kernel::operator::hermitian_asymmetry(&self.rho);
        let min_rho = if asym > TAU_HERM * self.rho.norm_l2() {
            -asym
        } else {
            herm_eigen(&hermitian_part(&self.rho), TAU_HERM)?.values[0]
        };
        Ok(TripleViolations { unitality, invariance, normalization, min_rho })
    }

    /// `E(X)` for `X` on `M_d ⊗ M_b`.
    pub fn channel(&self, x: &Mat<c64>) -> Mat<c64> {
        let mut out = Mat::<c64>::zeros(self.b, self.b);
        for v in &self.kraus {
            out += v.adjoint() * x * v;
        }
        out
    }

    /// `E*(Y)` for `Y` on `M_b`.
    pub fn dual(&self, y: &Mat<c64>) -> Mat<c64> {
        let n = self.d * self.b;
        let mut out = Mat::<c64>::zeros(n, n);
        for v in &self.kraus {
            out += v * y * v.adjoint();
        }
        out
    }

    /// `Ê_1(x) = E(1 ⊗ x)`.
    pub fn e1(&self, x: &Mat<c64>) -> Mat<c64> {
        let one_x = Mat::<c64>::identity(self.d, self.d).kron(x);
        self.channel(&one_x)
    }

    /// `Tr_{M_d} E*(y)`, the Hilbert-Schmidt adjoint of `Ê_1`.
    pub fn e1_dual(&self, y: &Mat<c64>) -> Mat<c64> {
        partial_trace_factors(&self.dual(y), &[self.d, self.b], &[0])
    }

    /// Matrix of `Ê_1` on column-major vectorised `b × b` matrices.
    pub fn e1_matrix(&self) -> Mat<c64> {
        let b = self.b;
        let mut m = Mat::<c64>::zeros(b * b, b * b);
        for j in 0..b {
            for i in 0..b {
                let mut unit = Mat::<c64>::zeros(b, b);
                unit[(i, j)] = re(1.0);
                let img = self.e1(&unit);
                for q in 0..b {
                    for p in 0..b {
                        m[(p + q * b, i + j * b)] = img[(p, q)];
                    }
                }
            }
        }
        m
    }

    /// `(id ⊗ E*)^{n-1} E*(ρ)` on `M_d^{⊗n} ⊗ M_b`.
    pub fn extended_density(&self, n: usize) -> Result<Mat<c64>> {
        check_cap("extended FCS density", self.d, n, self.b)?;
        let mut phi = self.rho.clone();
        for _ in 0..n {
            phi = self.extend(&phi);
        }
        Ok(phi)
    }

    /// One step `X -> (id ⊗ E*)(X)` on `M_D ⊗ M_b`.
    pub fn extend(&self, x: &Mat<c64>) -> Mat<c64> {
        let (b, db) = (self.b, self.d * self.b);
        let outer = x.nrows() / b;
        let mut out = Mat::<c64>::zeros(outer * db, outer * db);
        for j in 0..outer {
            for i in 0..outer {
                let block = x.as_ref().submatrix(i * b, j * b, b, b).to_owned();
                let img = self.dual(&block);
                out.as_mut().submatrix_mut(i * db, j * db, db, db).copy_from(&img);
            }
        }
        out
    }

    /// Density matrix of the state restricted to `n` consecutive sites,
    /// supported on `[1, n]`.
    pub fn local_density(&self, n: usize) -> Result<LocalOperator> {
        if n == 0 {
            return Err(domain("volume must be positive"));
        }
        let phi = self.extended_density(n)?;
        let mut dims = vec![self.d; n];
        dims.push(self.b);
        let m = partial_trace_factors(&phi, &dims, &[n]);
        LocalOperator::new(m, Interval::new(1, n as i64), self.d)
    }

    pub fn channel_spectrum(&self) -> Result<ChannelSpectrum> {
        let m = self.e1_matrix();
        let mut ev: Vec<c64> = m.eigenvalues().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
        // The leading eigenvalue is the one closest to 1.
        let lead = (0..ev.len()).min_by(|&i, &j| (ev[i] - re(1.0)).norm().total_cmp(&(ev[j] - re(1.0)).norm())).unwrap();
        let lead_val = ev.remove(lead);
        let peripheral: Vec<c64> = ev.iter().copied().filter(|z| (z.norm() - 1.0).abs() <= TAU_PERIPH).collect();
        let second_modulus = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        ev.insert(0, lead_val);
        Ok(ChannelSpectrum { eigenvalues: ev, peripheral, second_modulus })
    }

    /// Smallest block length `l ≤ l_max` with a finite sandwich constant `s`.
    ///
    /// The ratios are optimised over pure states `v v*` from a deterministic
    /// family of starting points, so `s` is an estimate from below of the
    /// exact constant.
    pub fn primitivity_reduce(&self, l_max: usize) -> Result<Primitivity> {
        let spec = self.channel_spectrum()?;
        if !spec.peripheral.is_empty() {
            return Err(Error::NonPrimitive { peripheral: spec.peripheral });
        }
        if self.b == 1 {
            return Ok(Primitivity { l: 1, s: 1.0, inf_ratio: 1.0, sup_ratio: 1.0 });
        }
        let t1 = self.e1_matrix();
        let mut tl = t1.clone();
        let rho_e = herm_eigen(&hermitian_part(&self.rho), TAU_HERM)?;
        let rho_inv_sqrt = rho_e.apply_function(|x| 1.0 / x.sqrt());
        for l in 1..=l_max {
            let inf = optimise_ratio(&tl, &self.rho, &rho_inv_sqrt, Extreme::Min);
            if inf > 1e-10 {
                let sup = optimise_ratio(&tl, &self.rho, &rho_inv_sqrt, Extreme::Max);
                return Ok(Primitivity { l, s: sup.max(1.0 / inf).max(1.0), inf_ratio: inf, sup_ratio: sup });
            }
            tl = &tl * &t1;
        }
        Err(Error::BlockingExhausted { l_max, second_modulus: spec.second_modulus })
    }

    /// `Ê_1^l(x)`.
    pub fn e1_power(&self, x: &Mat<c64>, l: usize) -> Mat<c64> {
        let mut y = x.clone();
        for _ in 0..l {
            y = self.e1(&y);
        }
        y
    }

    /// How far `x ≥ 0` is from satisfying `s^{-1} ρ(x) ≤ Ê_1^l(x) ≤ s ρ(x)`,
    /// relative to `ρ(x)`. Non-positive means the sandwich holds.
    pub fn cone_violation(&self, l: usize, s: f64, x: &Mat<c64>) -> Result<f64> {
        let y = hermitian_part(&self.e1_power(x, l));
        let rx = trace(&(&self.rho * x)).re;
        let e = herm_eigen(&y, TAU_HERM)?;
        let lo = e.values[0];
        let hi = *e.values.last().unwrap();
        Ok(((rx / s - lo) / rx).max((hi - s * rx) / rx))
    }

    /// The triple generating the same state on blocks of `l` sites.
    pub fn blocked(&self, l: usize) -> Result<FcsTriple> {
        if l == 0 {
            return Err(domain("block length must be positive"));
        }
        let dl = check_cap("blocked site", self.d, l, 1)?;
        check_cap("blocked Kraus family", self.kraus.len(), l, 1)?;
        let mut ops: Vec<Mat<c64>> = self.kraus.clone();
        let mut outer = 1usize;
        for _ in 1..l {
            outer *= self.d;
            let mut next = Vec::with_capacity(ops.len() * self.kraus.len());
            for w in &ops {
                for v in &self.kraus {
                    let lifted = Mat::<c64>::identity(outer, outer).kron(v);
                    next.push(&lifted * w);
                }
            }
            ops = next;
        }
        FcsTriple::new(dl, ops, self.rho.clone())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Extreme {
    Min,
    Max,
}

/// Applies a `b² × b²` matrix to a column-major vectorised `b × b` matrix.
fn apply_vec(t: &Mat<c64>, x: &Mat<c64>) -> Mat<c64> {
    let b = x.nrows();
    let v = Mat::<c64>::from_fn(b * b, 1, |k, _| x[(k % b, k / b)]);
    let w = t * &v;
    Mat::from_fn(b, b, |i, j| w[(i + j * b, 0)])
}

fn outer(v: &Mat<c64>) -> Mat<c64> {
    v * v.adjoint()
}

fn extreme_vector(h: &Mat<c64>, which: Extreme) -> (f64, Mat<c64>) {
    let e = herm_eigen(&hermitian_part(h), f64::INFINITY).expect("Hermitian part");
    let k = if which == Extreme::Min { 0 } else { e.dim() - 1 };
    let u = e.vectors();
    (e.values[k], u.as_ref().submatrix(0, k, e.dim(), 1).to_owned())
}

/// Alternating optimisation of `<u|T(vv*)|u> / <v|ρ|v>` over unit `u` and
/// nonzero `v`.
fn optimise_ratio(t: &Mat<c64>, rho: &Mat<c64>, rho_inv_sqrt: &Mat<c64>, which: Extreme) -> f64 {
    let b = rho.nrows();
    let t_adj = t.adjoint().to_owned();
    let mut seeds: Vec<Mat<c64>> = Vec::new();
    let unit = |i: usize| Mat::<c64>::from_fn(b, 1, |k, _| if k == i { re(1.0) } else { re(0.0) });
    for i in 0..b {
        seeds.push(unit(i));
        for j in i + 1..b {
            for phase in [re(1.0), re(-1.0), c64::new(0.0, 1.0), c64::new(0.0, -1.0)] {
                seeds.push(Mat::from_fn(b, 1, |k, _| {
                    if k == i {
                        re(1.0)
                    } else if k == j {
                        phase
                    } else {
                        re(0.0)
                    }
                }));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..16 {
        seeds.push(crate::models::random_matrix(&mut rng, b).as_ref().submatrix(0, 0, b, 1).to_owned());
    }
    let better = |a: f64, b: f64| if which == Extreme::Min { a.min(b) } else { a.max(b) };
    let mut best = if which == Extreme::Min { f64::INFINITY } else { f64::NEG_INFINITY };
    for mut v in seeds {
        let mut value = f64::NAN;
        for _ in 0..200 {
            let rv = (v.adjoint() * rho * &v)[(0, 0)].re;
            let (lam, u) = extreme_vector(&apply_vec(t, &outer(&v)), which);
            let current = lam / rv;
            best = better(best, current);
            if (value - current).abs() <= 1e-15 * current.abs().max(1e-300) {
                break;
            }
            value = current;
            // For fixed u the ratio is a generalised Rayleigh quotient in v.
            let a = apply_vec(&t_adj, &outer(&u));
            let (_, w) = extreme_vector(&(rho_inv_sqrt * &a * rho_inv_sqrt), which);
            v = rho_inv_sqrt * &w;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::dense::scaled;
    use crate::models::{
        depolarizing_triple, markov_chain_triple, maximally_mixed_product, period_two_triple, product_triple,
        random_density, random_primitive_triple, random_psd,
    };

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn scalar_bond_gives_product_state() {
        let mut r = rng(1);
        let omega = random_density(&mut r, 2);
        let t = product_triple(&omega).unwrap();
        let rho3 = t.local_density(3).unwrap();
        let expect = omega.kron(&omega).kron(&omega);
        assert!((rho3.matrix() - &expect).norm_l2() < 1e-13);
    }

    #[test]
    fn marginals_are_compatible() {
        let t = random_primitive_triple(&mut rng(2), 2, 2, 0.5).unwrap();
        let w4 = t.local_density(4).unwrap();
        let w3 = t.local_density(3).unwrap();
        let right = w4.partial_trace(&[4]).unwrap();
        let left = w4.partial_trace(&[1]).unwrap().shifted(-1);
        for m in [right, left] {
            let err = (m.matrix() - w3.matrix()).col_iter().flat_map(|c| c.iter().map(|z| z.norm()).collect::<Vec<_>>()).fold(0.0, f64::max);
            assert!(err <= 1e-11, "{err}");
        }
    }

    #[test]
    fn local_density_is_a_state() {
        let t = random_primitive_triple(&mut rng(3), 2, 3, 0.4).unwrap();
        let w = t.local_density(4).unwrap();
        assert!((w.trace().re - 1.0).abs() < 1e-12);
        let e = herm_eigen(&hermitian_part(w.matrix()), TAU_HERM).unwrap();
        assert!(e.values[0] >= -1e-12);
    }

    #[test]
    fn spectra() {
        let s = maximally_mixed_product(2).channel_spectrum().unwrap();
        assert_eq!(s.eigenvalues.len(), 1);
        assert!((s.eigenvalues[0] - re(1.0)).norm() < 1e-14);
        let mut r = rng(4);
        let dep = depolarizing_triple(&random_density(&mut r, 2), &random_density(&mut r, 3)).unwrap();
        let s = dep.channel_spectrum().unwrap();
        assert!((s.eigenvalues[0] - re(1.0)).norm() < 1e-12);
        assert!(s.eigenvalues[1..].iter().all(|z| z.norm() < 1e-12));
        let p = period_two_triple().channel_spectrum().unwrap();
        assert_eq!(p.peripheral.len(), 1);
        assert!((p.peripheral[0] + re(1.0)).norm() < 1e-12);
    }

    #[test]
    fn primitivity_trivial_cases() {
        let p = maximally_mixed_product(3).primitivity_reduce(L_MAX).unwrap();
        assert_eq!((p.l, p.s), (1, 1.0));
        let mut r = rng(5);
        let dep = depolarizing_triple(&random_density(&mut r, 2), &random_density(&mut r, 2)).unwrap();
        let p = dep.primitivity_reduce(L_MAX).unwrap();
        assert_eq!(p.l, 1);
        assert!((p.s - 1.0).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn primitivity_needs_blocking_for_markov_chain() {
        let t = markov_chain_triple(&[vec![0.0, 1.0], vec![0.5, 0.5]], &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let p = t.primitivity_reduce(L_MAX).unwrap();
        assert_eq!(p.l, 2);
        assert!(matches!(t.primitivity_reduce(1), Err(Error::BlockingExhausted { l_max: 1, .. })));
        assert!(matches!(period_two_triple().primitivity_reduce(L_MAX), Err(Error::NonPrimitive { .. })));
    }

    #[test]
    fn random_cone_test() {
        let mut r = rng(6);
        let t = random_primitive_triple(&mut r, 2, 2, 0.5).unwrap();
        assert!((t.channel_spectrum().unwrap().second_modulus - 0.5).abs() < 1e-10);
        let p = t.primitivity_reduce(L_MAX).unwrap();
        for _ in 0..100 {
            let x = random_psd(&mut r, 2);
            assert!(t.cone_violation(p.l, p.s, &x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn iterates_converge_to_state() {
        let mut r = rng(7);
        let t = random_primitive_triple(&mut r, 2, 2, 0.5).unwrap();
        let gap = t.channel_spectrum().unwrap().second_modulus;
        let x = crate::models::random_hermitian(&mut r, 2);
        let rx = trace(&(t.rho() * &x));
        let mut y = x.clone();
        for k in 1..=50 {
            y = t.e1(&y);
            let res = op_norm(&(&y - Mat::<c64>::identity(2, 2) * faer::Scale(rx)));
            assert!(res <= 2.0 * gap.powi(k) * op_norm(&x) + 1e-14, "k={k}");
        }
    }

    #[test]
    fn blocking_preserves_the_state() {
        let t = random_primitive_triple(&mut rng(8), 2, 2, 0.5).unwrap();
        let b2 = t.blocked(2).unwrap();
        assert_eq!(b2.site_dim(), 4);
        let a = t.local_density(4).unwrap();
        let b = b2.local_density(2).unwrap();
        assert!((a.matrix() - b.matrix()).norm_l2() < 1e-12);
    }

    #[test]
    fn invalid_triples_are_refused() {
        let t = random_primitive_triple(&mut rng(9), 2, 2, 0.5).unwrap();
        let mut rho = t.rho().clone();
        rho[(0, 0)] += re(1e-3);
        rho[(1, 1)] -= re(1e-3);
        match FcsTriple::new(2, t.kraus().to_vec(), rho) {
            Err(Error::InvalidTriple { what, violation }) => {
                assert!(what.contains("invariance"));
                assert!(violation > 4e-4 && violation < 2e-3, "{violation}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let half: Vec<Mat<c64>> = t.kraus().iter().map(|v| scaled(v, 0.5)).collect();
        assert!(matches!(FcsTriple::new(2, half, t.rho().clone()), Err(Error::InvalidTriple { .. })));
    }
}
