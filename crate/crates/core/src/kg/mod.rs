//! Knowledge-gradient scoring and measurement selection.
//!
//! For every alternative `x` the KG factor is the expected increase of the
//! best posterior mean after one more measurement of `x`. With a Gaussian
//! belief that expectation is `kg_h(mu, sigma_tilde(x))`, evaluated on the
//! upper envelope of the lines `mu_i + sigma_tilde_i z`.

mod envelope;
mod policy;
mod subset;

use nalgebra::DVector;

pub use envelope::{dominant_lines, kg_h, log_f_neg, DominantSet, LineSet, PARALLEL_TOLERANCE};
pub use policy::{kgcb_step, step_seed, BeliefView, PolicyConfig, PolicyMode, StepOutcome};
pub use subset::{subset_reduce, subset_reduce_attribute};

use crate::belief::{sigma_tilde_full, AttributeBelief, BeliefState, FeatureMatrix};
use crate::error::{Error, Result};
use crate::linalg::argmax;

/// KG factor per alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct KgScores {
    v: Vec<f64>,
}

impl KgScores {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Dimension("scores must be non-empty".into()));
        }
        if let Some(x) = v.iter().position(|s| !(*s >= -1e-12)) {
            return Err(Error::NumericalDegeneracy(format!(
                "KG factor {} for alternative {x} is negative or NaN",
                v[x]
            )));
        }
        Ok(Self { v })
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// KG factors over the full covariance.
pub fn kg_factor_all(b: &BeliefState) -> Result<KgScores> {
    let p: Vec<f64> = b.mu().iter().copied().collect();
    let v = (0..b.len())
        .map(|x| {
            let q = sigma_tilde_full(b, x)?;
            Ok(kg_h(&LineSet::new(p.clone(), q.iter().copied().collect())?))
        })
        .collect::<Result<Vec<f64>>>()?;
    KgScores::new(v)
}

/// KG factors from a weight belief, one covariance column at a time.
pub fn kg_factor_all_attribute(
    ab: &AttributeBelief,
    features: &FeatureMatrix,
    lambda: &DVector<f64>,
) -> Result<KgScores> {
    let m = features.alternatives();
    if lambda.len() != m {
        return Err(Error::Dimension(format!(
            "lambda has length {}, expected {m}",
            lambda.len()
        )));
    }
    let p: Vec<f64> = ab.predicted_means(features)?.iter().copied().collect();
    // X C is shared by every column X C x_row^T
    let xc = features.matrix() * ab.c_matrix();
    let mut v = Vec::with_capacity(m);
    for x in 0..m {
        let q = &xc * features.row(x);
        let denom = lambda[x] + q[x];
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::NumericalDegeneracy(format!(
                "predictive variance {denom} is not positive"
            )));
        }
        let scale = denom.sqrt().recip();
        let slopes: Vec<f64> = q.iter().map(|s| s * scale).collect();
        v.push(kg_h(&LineSet::new(p.clone(), slopes)?));
    }
    KgScores::new(v)
}

/// Alternative with the largest KG factor; ties go to the lowest index.
pub fn select_offline(scores: &KgScores) -> usize {
    argmax(scores.v.iter().copied())
}

/// Online decision score `mu_x + (N - n) v_x`; the belief itself is not touched.
pub fn select_online(mu: &[f64], scores: &KgScores, n: usize, budget_n: usize) -> Result<usize> {
    if mu.len() != scores.len() {
        return Err(Error::Dimension(format!(
            "{} means but {} scores",
            mu.len(),
            scores.len()
        )));
    }
    let remaining = budget_n.saturating_sub(n) as f64;
    Ok(argmax(
        mu.iter().zip(&scores.v).map(|(m, v)| m + remaining * v),
    ))
}
