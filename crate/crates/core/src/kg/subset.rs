//! Monte-Carlo reduction of the alternative set to the most promising `K`.
//!
//! Alternatives are ranked by how often they are the sample-wise maximum of
//! draws from the current belief. Ties fall back to the posterior mean, then
//! to the lower index.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::belief::{AttributeBelief, BeliefState, FeatureMatrix};
use crate::error::{Error, Result};
use crate::linalg::{argmax, cholesky_with_jitter};

fn check_sizes(m: usize, k: usize, samples: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::Config(format!(
            "subset size {k} must lie in 1..={m}"
        )));
    }
    if samples == 0 {
        return Err(Error::Config(
            "Monte-Carlo sample count must be at least 1".into(),
        ));
    }
    Ok(())
}

fn top_k(counts: &[u64], mu: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then(mu[b].total_cmp(&mu[a]))
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = order.into_iter().take(k).collect();
    chosen.sort_unstable();
    chosen
}

/// Draws `samples` vectors `mu + factor * z` with `z` of length `factor.ncols()`
/// and counts, per alternative, how often it is the largest entry.
fn count_maxima(mu: &DVector<f64>, factor: &DMatrix<f64>, samples: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; mu.len()];
    let mut z = DVector::<f64>::zeros(factor.ncols());
    let mut draw = mu.clone();
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        draw.copy_from(mu);
        draw.gemv(1.0, factor, &z, 1.0);
        counts[argmax(draw.iter().copied())] += 1;
    }
    counts
}

/// Indices (ascending) of the `k` alternatives most often sampled as best.
pub fn subset_reduce(b: &BeliefState, k: usize, samples: usize, seed: u64) -> Result<Vec<usize>> {
    let m = b.len();
    check_sizes(m, k, samples)?;
    if k == m {
        return Ok((0..m).collect());
    }
    let factor = cholesky_with_jitter(b.sigma())?;
    let counts = count_maxima(b.mu(), &factor, samples, seed);
    Ok(top_k(&counts, b.mu(), k))
}

/// Same ranking as [`subset_reduce`] for the belief `N(X theta, X C X^T)`,
/// sampled in weight space so the cost per draw is O(M L).
pub fn subset_reduce_attribute(
    ab: &AttributeBelief,
    features: &FeatureMatrix,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let m = features.alternatives();
    check_sizes(m, k, samples)?;
    if k == m {
        return Ok((0..m).collect());
    }
    let mu = ab.predicted_means(features)?;
    let factor = features.matrix() * cholesky_with_jitter(ab.c_matrix())?;
    let counts = count_maxima(&mu, &factor, samples, seed);
    Ok(top_k(&counts, &mu, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn full_size_subset_is_everything() {
        let b = BeliefState::new(
            dvector![1.0, 0.0, 2.0],
            DMatrix::identity(3, 3),
            dvector![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(subset_reduce(&b, 3, 10, 1).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn near_certain_winner_is_always_kept() {
        let b = BeliefState::new(
            dvector![10.0, 0.0, 0.0],
            DMatrix::identity(3, 3) * 1e-12,
            dvector![1.0, 1.0, 1.0],
        )
        .unwrap();
        for seed in 0..20 {
            assert!(subset_reduce(&b, 1, 50, seed).unwrap().contains(&0));
        }
    }

    #[test]
    fn zero_covariance_falls_back_to_mean_order() {
        let b = BeliefState::new(
            dvector![0.0, 3.0, 1.0, 2.0],
            DMatrix::zeros(4, 4),
            DVector::from_element(4, 1.0),
        )
        .unwrap();
        assert_eq!(subset_reduce(&b, 2, 10, 0).unwrap(), vec![1, 3]);
    }

    #[test]
    fn reduction_is_deterministic_per_seed() {
        let b = BeliefState::new(
            DVector::zeros(6),
            DMatrix::identity(6, 6),
            DVector::from_element(6, 1.0),
        )
        .unwrap();
        assert_eq!(
            subset_reduce(&b, 3, 200, 42).unwrap(),
            subset_reduce(&b, 3, 200, 42).unwrap()
        );
    }

    #[test]
    fn invalid_sizes_are_rejected() {
        let b = BeliefState::new(
            DVector::zeros(2),
            DMatrix::identity(2, 2),
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        assert!(matches!(subset_reduce(&b, 0, 10, 0), Err(Error::Config(_))));
        assert!(matches!(subset_reduce(&b, 3, 10, 0), Err(Error::Config(_))));
        assert!(matches!(subset_reduce(&b, 1, 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn attribute_sampling_tracks_the_best_region() {
        let raw: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let x = FeatureMatrix::from_raw(&raw, crate::belief::BasisSpec::linear(1)).unwrap();
        let ab = AttributeBelief::new(dvector![0.0, 5.0], DMatrix::identity(2, 2) * 0.01).unwrap();
        let subset = subset_reduce_attribute(&ab, &x, 5, 500, 3).unwrap();
        assert_eq!(subset, vec![45, 46, 47, 48, 49]);
    }
}
