use std::sync::Arc;

use opspace::linalg::{c, spectral_norm, CMat};
use opspace::random::{random_element, random_matrix, random_subspace, rng_from_seed};
use opspace::{cb_norm, induced_norm, min_tensor, ConcreteSpace, EstimatorConfig, LinearMapRep, TensorElement};
use proptest::prelude::*;

fn space(seed: u64, d: usize, m: usize) -> Arc<ConcreteSpace> {
    Arc::new(random_subspace(&mut rng_from_seed(seed), d, m.min(d * d), "E"))
}

fn cfg(seed: u64) -> EstimatorConfig {
    EstimatorConfig {
        restarts: 4,
        seed,
        ..EstimatorConfig::default()
    }
}

fn random_map(seed: u64, e: Arc<ConcreteSpace>, f: Arc<ConcreteSpace>) -> LinearMapRep {
    let coeff = random_matrix(&mut rng_from_seed(seed), f.dim(), e.dim());
    LinearMapRep::new(e, f, coeff, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn min_norm_is_multiplicative(seed in any::<u64>(), d in 1usize..3, m in 1usize..4, n in 1usize..3, k in 1usize..3) {
        let mut rng = rng_from_seed(seed);
        let x = random_element(&mut rng, space(seed ^ 1, d, m), n);
        let y = random_element(&mut rng, space(seed ^ 2, 2, m), k);
        let z = min_tensor(&x, &y).unwrap();
        let expect = x.min_norm() * y.min_norm();
        prop_assert!((z.min_norm() - expect).abs() <= 1e-9 * expect.max(1.0));
    }

    #[test]
    fn direct_sum_takes_the_max(seed in any::<u64>(), d in 1usize..4, n in 1usize..3, k in 1usize..3) {
        let e = space(seed, d, 2);
        let mut rng = rng_from_seed(seed);
        let x = random_element(&mut rng, e.clone(), n);
        let y = random_element(&mut rng, e, k).scale(c(0.5, 0.0));
        let s = x.direct_sum(&y).unwrap().min_norm();
        prop_assert!((s - x.min_norm().max(y.min_norm())).abs() <= 1e-10 * s.max(1.0));
    }

    #[test]
    fn compression_is_contractive(seed in any::<u64>(), d in 1usize..4, n in 1usize..4, p in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let x = random_element(&mut rng, space(seed, d, 2), n);
        let alpha: CMat = random_matrix(&mut rng, p, n);
        let beta: CMat = random_matrix(&mut rng, n, p);
        let y = x.compress(&alpha, &beta).unwrap();
        let bound = spectral_norm(&alpha) * x.min_norm() * spectral_norm(&beta);
        prop_assert!(y.min_norm() <= bound * (1.0 + 1e-10));
    }

    #[test]
    fn flip_preserves_min_norm(seed in any::<u64>(), n in 1usize..3) {
        let mut rng = rng_from_seed(seed);
        let x = random_element(&mut rng, space(seed ^ 1, 2, 3), n);
        let y = random_element(&mut rng, space(seed ^ 2, 2, 2), 1);
        let u = TensorElement::from_min_tensor(&x, &y).unwrap();
        prop_assert!((u.flip().min_norm() - u.min_norm()).abs() <= 1e-10 * u.min_norm().max(1.0));
    }

    #[test]
    fn induced_bracket_contains_sampled_ratios(seed in any::<u64>(), d in 2usize..4, m in 1usize..4) {
        let e = space(seed, d, m);
        let f = space(seed ^ 7, 2, 3);
        let phi = random_map(seed ^ 11, e.clone(), f);
        let est = induced_norm(&phi, &cfg(seed)).unwrap();
        prop_assert!(est.lower <= est.upper * (1.0 + 1e-9));
        let mut rng = rng_from_seed(seed ^ 13);
        for _ in 0..8 {
            let x = random_element(&mut rng, e.clone(), 1);
            let ratio = phi.apply(&x).unwrap().min_norm() / x.min_norm();
            prop_assert!(ratio <= est.upper * (1.0 + 1e-9));
        }
    }

    #[test]
    fn cb_profile_is_nondecreasing(seed in any::<u64>(), m in 1usize..4) {
        let e = space(seed, 2, m);
        let phi = random_map(seed ^ 3, e.clone(), e);
        let est = cb_norm(&phi, 2, &cfg(seed)).unwrap();
        for w in est.level_profile.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        prop_assert!(est.lower <= est.upper * (1.0 + 1e-9));
    }
}
