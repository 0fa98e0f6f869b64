//! Standard operators, interactions and triples used by examples and tests.

use crate::chain::Interaction;
use crate::error::Result;
use crate::kernel::dense::{re, scaled};
use crate::kernel::operator::op_norm;
use crate::kernel::spectral::{herm_eigen, TAU_HERM};
use crate::states::FcsTriple;
use faer::{c64, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

pub mod pauli {
    use faer::{c64, Mat};

    fn m2(a: [[c64; 2]; 2]) -> Mat<c64> {
        Mat::from_fn(2, 2, |i, j| a[i][j])
    }

    pub fn x() -> Mat<c64> {
        let (o, l) = (c64::new(0.0, 0.0), c64::new(1.0, 0.0));
        m2([[o, l], [l, o]])
    }

    pub fn y() -> Mat<c64> {
        let o = c64::new(0.0, 0.0);
        m2([[o, c64::new(0.0, -1.0)], [c64::new(0.0, 1.0), o]])
    }

    pub fn z() -> Mat<c64> {
        let (o, l) = (c64::new(0.0, 0.0), c64::new(1.0, 0.0));
        m2([[l, o], [o, -l]])
    }
}

/// Matrix with independent standard complex Gaussian entries, scaled by `1/sqrt(n)`.
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> Mat<c64> {
    let s = 1.0 / (2.0 * n as f64).sqrt();
    Mat::from_fn(n, n, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c64::new(a * s, b * s)
    })
}

/// Random Hermitian matrix from the Gaussian unitary ensemble.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> Mat<c64> {
    let g = random_matrix(rng, n);
    scaled(&(&g + g.adjoint()), 0.5)
}

/// Random Hermitian matrix with operator norm exactly one.
pub fn random_hermitian_unit<R: Rng>(rng: &mut R, n: usize) -> Mat<c64> {
    let h = random_hermitian(rng, n);
    let nrm = op_norm(&h);
    scaled(&h, 1.0 / nrm)
}

/// Random positive semidefinite matrix `g g*`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> Mat<c64> {
    let g = random_matrix(rng, n);
    &g * g.adjoint()
}

/// Random positive definite matrix with eigenvalues bounded away from zero.
pub fn random_positive<R: Rng>(rng: &mut R, n: usize) -> Mat<c64> {
    random_psd(rng, n) + Mat::<c64>::identity(n, n) * faer::Scale(re(0.05))
}

/// Haar-distributed unitary via QR of a Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> Mat<c64> {
    let g = random_matrix(rng, n);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    Mat::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64::new(1.0, 0.0) };
        q[(i, j)] * phase
    })
}

/// One-site magnetisation `Φ({0}) = σ^z`.
pub fn magnetization() -> Interaction {
    Interaction::one_site(pauli::z()).expect("valid generator")
}

/// `Φ({0,1}) = J σ^z ⊗ σ^z`, `Φ({0}) = h σ^x`.
pub fn transverse_ising(j: f64, h: f64) -> Result<Interaction> {
    Interaction::new(2, vec![(vec![0, 1], scaled(&pauli::z().kron(&pauli::z()), j)), (vec![0], scaled(&pauli::x(), h))])
}

/// `Φ({0,1}) = J σ^x ⊗ σ^x`.
pub fn xx_coupling(j: f64) -> Result<Interaction> {
    Interaction::new(2, vec![(vec![0, 1], scaled(&pauli::x().kron(&pauli::x()), j))])
}

/// Product state with one-site density `omega` as a triple with `b = 1`.
pub fn product_triple(omega: &Mat<c64>) -> Result<FcsTriple> {
    let d = omega.nrows();
    let e = herm_eigen(omega, TAU_HERM)?;
    let u = e.vectors();
    let kraus = (0..d)
        .filter(|&k| e.values[k] > 0.0)
        .map(|k| Mat::from_fn(d, 1, |i, _| u[(i, k)] * e.values[k].sqrt()))
        .collect();
    FcsTriple::new(d, kraus, Mat::identity(1, 1))
}

/// Infinite-temperature product state.
pub fn maximally_mixed_product(d: usize) -> FcsTriple {
    let s = 1.0 / (d as f64).sqrt();
    let kraus = (0..d).map(|k| Mat::from_fn(d, 1, |i, _| re(if i == k { s } else { 0.0 }))).collect();
    FcsTriple::new(d, kraus, Mat::identity(1, 1)).expect("valid triple")
}

/// Triple with `E(x ⊗ y) = Tr(σ x) Tr(ρ y) 1`, so that `Ê_1` is the rank-one
/// map onto `ρ`.
pub fn depolarizing_triple(sigma: &Mat<c64>, rho: &Mat<c64>) -> Result<FcsTriple> {
    let d = sigma.nrows();
    let b = rho.nrows();
    let es = herm_eigen(sigma, TAU_HERM)?;
    let er = herm_eigen(rho, TAU_HERM)?;
    let (us, ur) = (es.vectors(), er.vectors());
    let mut kraus = Vec::new();
    for s in 0..d {
        for t in 0..b {
            let w = (es.values[s].max(0.0) * er.values[t].max(0.0)).sqrt();
            if w == 0.0 {
                continue;
            }
            for m in 0..b {
                // w |s> ⊗ |t><m|
                kraus.push(Mat::from_fn(d * b, b, |row, col| {
                    if col == m {
                        us[(row / b, s)] * ur[(row % b, t)] * w
                    } else {
                        re(0.0)
                    }
                }));
            }
        }
    }
    FcsTriple::new(d, kraus, rho.clone())
}

/// Random primitive triple with `ρ = 1/b` and `Ê_1` self-adjoint for the
/// Hilbert-Schmidt inner product, whose second eigenvalue has modulus `gap`.
///
/// The channel mixes a random-unitary part with a depolarising part; the
/// mixing weight is chosen to place the second eigenvalue exactly.
pub fn random_primitive_triple<R: Rng>(rng: &mut R, d: usize, b: usize, gap: f64) -> Result<FcsTriple> {
    if !(0.0..1.0).contains(&gap) || b < 2 {
        return Err(crate::error::domain("random primitive triple needs 0 ≤ gap < 1 and b ≥ 2"));
    }
    let rho = scaled(&Mat::<c64>::identity(b, b), 1.0 / b as f64);
    for _ in 0..100 {
        let count = 3;
        let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut unitary_part = Vec::new();
        for &w in &raw {
            let u = random_unitary(rng, b);
            let site_basis = random_unitary(rng, d);
            for i in 0..d {
                let mirrored = i >= d - d / 2;
                let middle = d % 2 == 1 && i == d / 2;
                let g = if middle {
                    Mat::identity(b, b)
                } else if mirrored {
                    u.adjoint().to_owned()
                } else {
                    u.clone()
                };
                let amp = (w / total / d as f64).sqrt();
                let e_i = Mat::from_fn(d, 1, |r, _| site_basis[(r, i)] * amp);
                unitary_part.push(e_i.kron(&g));
            }
        }
        let r = FcsTriple::new(d, unitary_part.clone(), rho.clone())?;
        let second = r.channel_spectrum()?.second_modulus;
        if second < gap + 0.05 {
            continue;
        }
        let keep = gap / second;
        let sigma = random_density(rng, d);
        let dep = depolarizing_triple(&sigma, &rho)?;
        let mut kraus: Vec<Mat<c64>> = unitary_part.iter().map(|v| scaled(v, keep.sqrt())).collect();
        kraus.extend(dep.kraus().iter().map(|v| scaled(v, (1.0 - keep).sqrt())));
        return FcsTriple::new(d, kraus, rho);
    }
    Err(crate::error::domain("could not draw a random-unitary channel with a large enough second eigenvalue"))
}

/// Random full-rank density matrix.
pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> Mat<c64> {
    let p = random_positive(rng, n);
    let t = crate::kernel::dense::trace(&p).re;
    scaled(&p, 1.0 / t)
}

/// Classical Markov chain with transition matrix `p` (rows sum to one) as a
/// triple on `M_n`: the state records the chain's trajectory in the site basis.
pub fn markov_chain_triple(p: &[Vec<f64>], stationary: &[f64]) -> Result<FcsTriple> {
    let n = p.len();
    let mut kraus = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if p[i][j] == 0.0 {
                continue;
            }
            let a = p[i][j].sqrt();
            // sqrt(P_ij) |j> ⊗ |j><i|
            kraus.push(Mat::from_fn(n * n, n, |row, col| {
                if col == i && row == j * n + j {
                    re(a)
                } else {
                    re(0.0)
                }
            }));
        }
    }
    let rho = Mat::from_fn(n, n, |i, j| re(if i == j { stationary[i] } else { 0.0 }));
    FcsTriple::new(n, kraus, rho)
}

/// Two-state chain that alternates deterministically: `Ê_1` has eigenvalue -1.
pub fn period_two_triple() -> FcsTriple {
    markov_chain_triple(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[0.5, 0.5]).expect("valid triple")
}
