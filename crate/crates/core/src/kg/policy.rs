use nalgebra::DVector;

use super::{
    kg_factor_all, kg_factor_all_attribute, select_offline, select_online, subset_reduce,
    subset_reduce_attribute, KgScores,
};
use crate::belief::{AttributeBelief, BeliefState, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    Offline,
    Online,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    /// Measurement budget N per selection epoch.
    pub budget_n: usize,
    /// Restrict scoring to this many Monte-Carlo-promising alternatives.
    pub subset_k: Option<usize>,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            mode: PolicyMode::Offline,
            budget_n: 20,
            subset_k: None,
            mc_samples: 1000,
            seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self, alternatives: usize) -> Result<()> {
        if self.budget_n == 0 {
            return Err(Error::Config("budget_n must be at least 1".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be at least 1".into()));
        }
        if let Some(k) = self.subset_k {
            if k == 0 || k > alternatives {
                return Err(Error::Config(format!(
                    "subset_k = {k} must lie in 1..={alternatives}"
                )));
            }
        }
        Ok(())
    }
}

/// The belief a policy step reads from.
#[derive(Debug, Clone, Copy)]
pub enum BeliefView<'a> {
    Full(&'a BeliefState),
    Attribute {
        belief: &'a AttributeBelief,
        features: &'a FeatureMatrix,
        lambda: &'a DVector<f64>,
    },
}

impl BeliefView<'_> {
    pub fn alternatives(&self) -> usize {
        match self {
            BeliefView::Full(b) => b.len(),
            BeliefView::Attribute { features, .. } => features.alternatives(),
        }
    }

    pub fn means(&self) -> Result<DVector<f64>> {
        match self {
            BeliefView::Full(b) => Ok(b.mu().clone()),
            BeliefView::Attribute {
                belief, features, ..
            } => belief.predicted_means(features),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Chosen alternative, as a global index.
    pub chosen: usize,
    /// Scores over the evaluated alternatives: all of them, or `subset` in order.
    pub scores: KgScores,
    pub subset: Option<Vec<usize>>,
}

/// Per-step RNG seed derived from the policy seed.
pub fn step_seed(seed: u64, n: usize) -> u64 {
    let mut z = seed
        ^ (n as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn score_and_pick(
    view: BeliefView<'_>,
    policy: &PolicyConfig,
    n: usize,
) -> Result<(usize, KgScores)> {
    let scores = match view {
        BeliefView::Full(b) => kg_factor_all(b)?,
        BeliefView::Attribute {
            belief,
            features,
            lambda,
        } => kg_factor_all_attribute(belief, features, lambda)?,
    };
    let chosen = match policy.mode {
        PolicyMode::Offline => select_offline(&scores),
        PolicyMode::Online => {
            let mu: Vec<f64> = view.means()?.iter().copied().collect();
            select_online(&mu, &scores, n, policy.budget_n)?
        }
    };
    Ok((chosen, scores))
}

/// One KGCB decision at measurement step `n` of the current budget.
///
/// With `subset_k` set, only the alternatives returned by the Monte-Carlo
/// reduction are scored and the winner is mapped back to its global index.
pub fn kgcb_step(view: BeliefView<'_>, policy: &PolicyConfig, n: usize) -> Result<StepOutcome> {
    let m = view.alternatives();
    policy.validate(m)?;
    let k = match policy.subset_k {
        Some(k) if k < m => k,
        _ => {
            let (chosen, scores) = score_and_pick(view, policy, n)?;
            return Ok(StepOutcome {
                chosen,
                scores,
                subset: None,
            });
        }
    };
    let seed = step_seed(policy.seed, n);
    let (subset, (local, scores)) = match view {
        BeliefView::Full(b) => {
            let subset = subset_reduce(b, k, policy.mc_samples, seed)?;
            let reduced = b.restrict(&subset);
            let picked = score_and_pick(BeliefView::Full(&reduced), policy, n)?;
            (subset, picked)
        }
        BeliefView::Attribute {
            belief,
            features,
            lambda,
        } => {
            let subset = subset_reduce_attribute(belief, features, k, policy.mc_samples, seed)?;
            let reduced_features = features.select_rows(&subset);
            let reduced_lambda = lambda.select_rows(&subset);
            let picked = score_and_pick(
                BeliefView::Attribute {
                    belief,
                    features: &reduced_features,
                    lambda: &reduced_lambda,
                },
                policy,
                n,
            )?;
            (subset, picked)
        }
    };
    Ok(StepOutcome {
        chosen: subset[local],
        scores,
        subset: Some(subset),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dvector, DMatrix};

    fn belief() -> BeliefState {
        BeliefState::new(
            dvector![0.1, 0.4, -0.2, 0.3],
            DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.3 }),
            DVector::from_element(4, 0.5),
        )
        .unwrap()
    }

    #[test]
    fn full_size_subset_matches_plain_path() {
        let b = belief();
        let plain = PolicyConfig::default();
        let with_subset = PolicyConfig {
            subset_k: Some(4),
            ..plain.clone()
        };
        let a = kgcb_step(BeliefView::Full(&b), &plain, 0).unwrap();
        let s = kgcb_step(BeliefView::Full(&b), &with_subset, 0).unwrap();
        assert_eq!(a.chosen, s.chosen);
        assert_eq!(a.scores, s.scores);
    }

    #[test]
    fn subset_winner_is_a_subset_member() {
        let b = belief();
        let policy = PolicyConfig {
            subset_k: Some(2),
            mc_samples: 200,
            seed: 9,
            ..PolicyConfig::default()
        };
        let out = kgcb_step(BeliefView::Full(&b), &policy, 3).unwrap();
        let subset = out.subset.unwrap();
        assert_eq!(subset.len(), 2);
        assert!(subset.contains(&out.chosen));
        assert_eq!(out.scores.len(), 2);
    }

    #[test]
    fn oversized_subset_is_a_config_error() {
        let b = belief();
        let policy = PolicyConfig {
            subset_k: Some(5),
            ..PolicyConfig::default()
        };
        assert!(matches!(
            kgcb_step(BeliefView::Full(&b), &policy, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn online_mode_exploits_at_horizon_end() {
        let b = belief();
        let policy = PolicyConfig {
            mode: PolicyMode::Online,
            budget_n: 3,
            ..PolicyConfig::default()
        };
        let out = kgcb_step(BeliefView::Full(&b), &policy, 3).unwrap();
        assert_eq!(out.chosen, 1);
    }

    #[test]
    fn step_seeds_differ_between_steps() {
        assert_ne!(step_seed(7, 0), step_seed(7, 1));
        assert_eq!(step_seed(7, 4), step_seed(7, 4));
    }
}
