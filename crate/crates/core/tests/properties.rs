use faer::{c64, Mat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinldp_core::chain::Interaction;
use spinldp_core::expansional::{expansional_identities_check, Backend};
use spinldp_core::kernel::expm::expm;
use spinldp_core::kernel::operator::op_norm;
use spinldp_core::kernel::{Interval, LocalOperator};
use spinldp_core::ldp::{legendre_transform, spectral_measure, ChainState, FcsMoments, GibbsMoments, RateCurve};
use spinldp_core::models::{magnetization, product_triple, random_hermitian, random_hermitian_unit, random_matrix};
use spinldp_core::numeric::linspace;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

fn diag2(p: f64) -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| c64::new(if i != j { 0.0 } else if i == 0 { p } else { 1.0 - p }, 0.0))
}

fn random_one_site(seed: u64) -> Interaction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Interaction::one_site(random_hermitian(&mut rng, 2)).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn intervals_intersect_and_hull(a in -5i64..5, la in 0i64..5, b in -5i64..5, lb in 0i64..5) {
        let i = Interval::new(a, a + la);
        let j = Interval::new(b, b + lb);
        let cap = i.intersect(&j);
        let hull = i.hull(&j);
        prop_assert!(hull.contains_interval(&i) && hull.contains_interval(&j));
        for x in -12..12 {
            prop_assert_eq!(cap.contains(x), i.contains(x) && j.contains(x));
        }
    }

    #[test]
    fn embedding_then_tracing_scales(seed in any::<u64>(), lo in -3i64..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = LocalOperator::new(random_matrix(&mut rng, 4), Interval::new(lo, lo + 1), 2).unwrap();
        let big = q.embed(Interval::new(lo - 1, lo + 2)).unwrap();
        let back = big.partial_trace(&[lo - 1, lo + 2]).unwrap();
        let diff = back.sub(&q.scale(4.0)).unwrap();
        prop_assert!(diff.frobenius_norm() < 1e-12);
    }

    #[test]
    fn exponential_inverse_pair(seed in any::<u64>(), scale in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, 4) * faer::Scale(c64::new(scale, 0.0));
        let minus = &a * faer::Scale(c64::new(-1.0, 0.0));
        let prod = expm(&a).unwrap() * expm(&minus).unwrap();
        prop_assert!(op_norm(&(prod - Mat::<c64>::identity(4, 4))) < 1e-10);
    }

    #[test]
    fn expansional_identities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Interval::new(0, 1);
        let mut draw = || LocalOperator::new(random_hermitian_unit(&mut rng, 4), w, 2).unwrap();
        let (q1, q2, h, p) = (draw(), draw(), draw(), draw());
        let (r1, r2) = expansional_identities_check(&q1, &q2, &h, &p, Backend::ClosedForm).unwrap();
        prop_assert!(r1 < 1e-9 && r2 < 1e-9);
    }

    #[test]
    fn jensen_lower_bound(p in 0.05f64..0.95, alpha in -3.0f64..3.0) {
        let t = product_triple(&diag2(p)).unwrap();
        let m = FcsMoments::new(&t, &magnetization(), 5).unwrap();
        prop_assert!(m.log_expectation(alpha) / 5.0 >= alpha * (2.0 * p - 1.0) - 1e-12);
    }

    #[test]
    fn measure_is_normalised_and_matches_moments(seed in any::<u64>(), beta in 0.0f64..2.0, alpha in -2.0f64..2.0) {
        let psi = random_one_site(seed);
        let phi = magnetization();
        let n = 4;
        let m = spectral_measure(&ChainState::Gibbs { psi: psi.clone(), beta }, &phi, n).unwrap();
        prop_assert!((m.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(m.atoms.iter().all(|a| a.1 >= -1e-15));
        prop_assert!(m.atoms.windows(2).all(|w| w[0].0 < w[1].0));
        let g = GibbsMoments::new(&psi, &phi, beta, n).unwrap();
        prop_assert!((m.log_mgf(alpha) * n as f64 - g.log_expectation(alpha)).abs() < 1e-10);
    }

    #[test]
    fn mgf_is_convex_and_vanishes_at_zero(seed in any::<u64>(), beta in 0.0f64..2.0) {
        let psi = random_one_site(seed);
        let g = GibbsMoments::new(&psi, &magnetization(), beta, 4).unwrap();
        prop_assert!(g.log_expectation(0.0).abs() < 1e-12);
        let h = 0.05;
        for a in linspace(-2.0, 2.0, 9) {
            let second = g.log_expectation(a + h) - 2.0 * g.log_expectation(a) + g.log_expectation(a - h);
            prop_assert!(second >= -1e-10);
        }
    }

    #[test]
    fn rate_is_nonnegative_and_biconjugate(a in 0.2f64..2.0, b in 0.3f64..1.5, c in -0.5f64..0.5) {
        let alphas = linspace(-3.0, 3.0, 241);
        let f: Vec<f64> = alphas.iter().map(|x| a * (b * x).cosh().ln() + c * x).collect();
        let curve = RateCurve::from_samples(alphas.clone(), f.clone(), vec![0.0; alphas.len()]).unwrap();
        let rate = legendre_transform(&curve).unwrap();
        prop_assert!(rate.i_values.iter().all(|&i| i >= -1e-9));
        prop_assert!(rate.rate_at(c).abs() < 1e-6);
        for (k, &x) in alphas.iter().enumerate().step_by(20).skip(1) {
            if x.abs() < 2.5 {
                prop_assert!((rate.biconjugate(x) - f[k]).abs() < 1e-4, "alpha {}", x);
            }
        }
    }
}
