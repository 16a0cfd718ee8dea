mod common;

use kgband::belief::{
    apply_basis, prior_from_attributes, sigma_tilde_attribute, sigma_tilde_full, update_attribute,
    update_full, BasisSpec,
};
use kgband::linalg::{is_psd, is_symmetric};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weight_and_full_trajectories_agree(seed in any::<u64>(), m in 1usize..=30, l in 1usize..=8) {
        let eq = common::conjugate_trajectory(seed, m, l, 40);
        prop_assert!(eq.max_deviation <= 1e-8, "deviation {}", eq.max_deviation);
        prop_assert!(eq.choices_agree);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn updates_keep_covariances_valid_and_shrinking(seed in any::<u64>(), m in 1usize..=12, x in 0usize..12, y in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = common::random_belief(&mut rng, m);
        let x = x % m;
        let next = update_full(&b, x, y).unwrap();
        prop_assert!(is_symmetric(next.sigma()));
        prop_assert!(is_psd(next.sigma()));
        prop_assert!(next.sigma()[(x, x)] <= b.sigma()[(x, x)]);
        prop_assert!(next.sigma().trace() <= b.sigma().trace() + 1e-12);
    }

    #[test]
    fn weight_updates_shrink_the_prior(seed in any::<u64>(), m in 1usize..=12, l in 1usize..=6, x in 0usize..12, y in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ab, features, lambda) = common::random_attribute_instance(&mut rng, m, l);
        let x = x % m;
        let next = update_attribute(&ab, &features.row(x), y, lambda[x]).unwrap();
        prop_assert!(is_symmetric(next.c_matrix()));
        prop_assert!(is_psd(next.c_matrix()));
        prop_assert!(next.c_matrix().trace() <= ab.c_matrix().trace() + 1e-12);
    }

    #[test]
    fn observing_the_mean_keeps_the_mean(seed in any::<u64>(), m in 1usize..=12, x in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = common::random_belief(&mut rng, m);
        let x = x % m;
        let next = update_full(&b, x, b.mu()[x]).unwrap();
        prop_assert!((next.mu() - b.mu()).amax() <= 1e-12);
    }

    #[test]
    fn weight_sigma_tilde_matches_projection(seed in any::<u64>(), m in 1usize..=20, l in 1usize..=6, x in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ab, features, lambda) = common::random_attribute_instance(&mut rng, m, l);
        let x = x % m;
        let full = prior_from_attributes(&ab, &features, lambda.clone()).unwrap();
        let a = sigma_tilde_attribute(&ab, &features, x, lambda[x]).unwrap();
        let f = sigma_tilde_full(&full, x).unwrap();
        prop_assert!((a - f).amax() <= 1e-10);
    }

    #[test]
    fn degree_one_basis_only_prepends_the_intercept(raw in prop::collection::vec(-1e6f64..1e6, 1..10)) {
        let phi = apply_basis(&BasisSpec::linear(raw.len()), &raw).unwrap();
        prop_assert_eq!(phi[0], 1.0);
        prop_assert_eq!(phi.rows(1, raw.len()).into_owned(), DVector::from_vec(raw));
    }
}
