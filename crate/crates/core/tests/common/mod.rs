#![allow(dead_code)]

use kgband::belief::{
    prior_from_attributes, update_attribute, update_full, AttributeBelief, BeliefState,
    FeatureMatrix,
};
use kgband::config::{build_scenario, default_experiment, default_tx_positions};
use kgband::harness::{ExperimentConfig, Selector};
use kgband::kg::{kgcb_step, BeliefView, PolicyConfig};
use kgband::positioning::Position2D;
use kgband::spectrum::BandPlan;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn random_psd<R: Rng>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a * a.transpose()) / m as f64
}

/// Random mean, random PSD covariance, noise variances in [0.1, 10].
pub fn random_belief<R: Rng>(rng: &mut R, m: usize) -> BeliefState {
    let mu = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma = random_psd(rng, m);
    let lambda = DVector::from_fn(m, |_, _| rng.random_range(0.1..=10.0));
    BeliefState::new(mu, sigma, lambda).unwrap()
}

/// Weight belief with a random PSD prior, random features with an intercept
/// column and noise variances in [0.1, 10].
pub fn random_attribute_instance<R: Rng>(
    rng: &mut R,
    m: usize,
    l: usize,
) -> (AttributeBelief, FeatureMatrix, DVector<f64>) {
    let x = DMatrix::from_fn(m, l, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.sample::<f64, _>(StandardNormal)
        }
    });
    let theta = DVector::from_fn(l, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c = random_psd(rng, l);
    let lambda = DVector::from_fn(m, |_, _| rng.random_range(0.1..=10.0));
    (
        AttributeBelief::new(theta, c).unwrap(),
        FeatureMatrix::from_matrix(x).unwrap(),
        lambda,
    )
}

pub struct Equivalence {
    pub max_deviation: f64,
    pub choices_agree: bool,
}

/// Runs `steps` KG-driven measurements on the weight belief and on its full
/// projection side by side and reports the largest entrywise gap between
/// `(X theta, X C X^T)` and `(mu, Sigma)`.
pub fn conjugate_trajectory(seed: u64, m: usize, l: usize, steps: usize) -> Equivalence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ab, features, lambda) = random_attribute_instance(&mut rng, m, l);
    let mut full = prior_from_attributes(&ab, &features, lambda.clone()).unwrap();
    let truth = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let policy = PolicyConfig::default();
    let mut max_deviation: f64 = 0.0;
    let mut choices_agree = true;
    for n in 0..steps {
        let a = kgcb_step(
            BeliefView::Attribute {
                belief: &ab,
                features: &features,
                lambda: &lambda,
            },
            &policy,
            n,
        )
        .unwrap()
        .chosen;
        let f = kgcb_step(BeliefView::Full(&full), &policy, n)
            .unwrap()
            .chosen;
        choices_agree &= a == f;
        let noise: f64 = rng.sample(StandardNormal);
        let y = truth[a] + lambda[a].sqrt() * noise;
        ab = update_attribute(&ab, &features.row(a), y, lambda[a]).unwrap();
        full = update_full(&full, a, y).unwrap();
        let projected = prior_from_attributes(&ab, &features, lambda.clone()).unwrap();
        max_deviation = max_deviation
            .max((projected.mu() - full.mu()).amax())
            .max((projected.sigma() - full.sigma()).amax());
    }
    Equivalence {
        max_deviation,
        choices_agree,
    }
}

/// Straight constant-speed drive through a 200 m square of transmitters with
/// exact path loss: 500 sweeps, no shadowing, no smoothing.
pub fn noiseless_config(bands: usize) -> ExperimentConfig {
    let mut cfg = default_experiment();
    let plan = BandPlan {
        shadow_sigma: 0.0,
        ..BandPlan::default()
    };
    let start = Position2D::new(15.0, 25.0);
    let end = Position2D::new(185.0, 170.0);
    let spacing = start.distance_to(&end) / 499.0;
    cfg.scenario = build_scenario(
        &plan,
        bands,
        default_tx_positions(),
        vec![start, end],
        spacing,
        1.0,
        30.0,
        1,
    )
    .unwrap();
    cfg.smoothing_window = 1;
    cfg.runs_n = 1;
    cfg
}

/// Small noisy configuration for statistics over many runs.
pub fn small_noisy_config(bands: usize, selector: Selector, runs: usize) -> ExperimentConfig {
    let mut cfg = default_experiment();
    cfg.scenario = build_scenario(
        &BandPlan::default(),
        bands,
        default_tx_positions(),
        vec![Position2D::new(40.0, 40.0), Position2D::new(160.0, 60.0)],
        3.0,
        1.0,
        30.0,
        100,
    )
    .unwrap();
    cfg.selector = selector;
    cfg.runs_n = runs;
    cfg
}
