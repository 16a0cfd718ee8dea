//! Multivariate-normal beliefs over the value of each alternative.
//!
//! Two representations are kept side by side:
//!
//! * [`BeliefState`] holds the mean vector and the full `M x M` covariance.
//! * [`AttributeBelief`] holds the weights of a model `value = X theta` and
//!   their `L x L` covariance. The implied belief over alternatives is
//!   `N(X theta, X C X^T)`, which is never materialized on the hot path.
//!
//! Both are updated with the conjugate normal recursion for a single noisy
//! observation of one alternative with known noise variance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_covariance, check_finite, symmetrize};

/// Monomial exponent per raw feature. The intercept column is implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSpec {
    degrees: Vec<u32>,
}

impl BasisSpec {
    pub fn new(degrees: Vec<u32>) -> Result<Self> {
        if let Some(pos) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::Config(format!(
                "basis degree at position {pos} must be at least 1"
            )));
        }
        Ok(Self { degrees })
    }

    /// Degree one for every raw feature: a plain linear model with intercept.
    pub fn linear(raw_features: usize) -> Self {
        Self {
            degrees: vec![1; raw_features],
        }
    }

    /// `[X1, X2^2, X3^3, X4^4, X5^5, X6^6]`.
    pub fn default_nonlinear() -> Self {
        Self {
            degrees: (1..=6).collect(),
        }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Number of model weights, intercept included.
    pub fn width(&self) -> usize {
        self.degrees.len() + 1
    }

    pub fn is_linear(&self) -> bool {
        self.degrees.iter().all(|&d| d == 1)
    }
}

/// Maps raw features to `[1, raw[0]^d0, raw[1]^d1, ...]`.
pub fn apply_basis(basis: &BasisSpec, raw: &[f64]) -> Result<DVector<f64>> {
    if raw.len() != basis.degrees.len() {
        return Err(Error::Dimension(format!(
            "basis expects {} raw features, got {}",
            basis.degrees.len(),
            raw.len()
        )));
    }
    let mut out = DVector::zeros(basis.width());
    out[0] = 1.0;
    for (k, (&value, &degree)) in raw.iter().zip(&basis.degrees).enumerate() {
        out[k + 1] = value.powi(degree as i32);
    }
    Ok(out)
}

/// Feature rows of every alternative after the basis has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    x: DMatrix<f64>,
    basis: BasisSpec,
}

impl FeatureMatrix {
    /// Builds the matrix from one raw feature vector per alternative.
    pub fn from_raw(raw_rows: &[Vec<f64>], basis: BasisSpec) -> Result<Self> {
        if raw_rows.is_empty() {
            return Err(Error::Dimension(
                "feature matrix needs at least one row".into(),
            ));
        }
        let width = basis.width();
        let mut x = DMatrix::zeros(raw_rows.len(), width);
        for (m, raw) in raw_rows.iter().enumerate() {
            let row = apply_basis(&basis, raw)?;
            x.row_mut(m).copy_from(&row.transpose());
        }
        Ok(Self { x, basis })
    }

    /// Wraps an already-expanded matrix. Column 0 must be the intercept.
    pub fn from_matrix(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Dimension("feature matrix must be non-empty".into()));
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::Dimension(
                "column 0 of the feature matrix must be all ones".into(),
            ));
        }
        let basis = BasisSpec::linear(x.ncols() - 1);
        Ok(Self { x, basis })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// Number of alternatives M.
    pub fn alternatives(&self) -> usize {
        self.x.nrows()
    }

    /// Number of weights L.
    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, m: usize) -> DVector<f64> {
        self.x.row(m).transpose()
    }

    /// Rows restricted to the given alternatives, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            x: self.x.select_rows(rows),
            basis: self.basis.clone(),
        }
    }
}

/// Full-form belief over M alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl BeliefState {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, lambda: DVector<f64>) -> Result<Self> {
        let m = mu.len();
        if m == 0 {
            return Err(Error::Dimension(
                "belief needs at least one alternative".into(),
            ));
        }
        if sigma.nrows() != m || sigma.ncols() != m || lambda.len() != m {
            return Err(Error::Dimension(format!(
                "mu has length {m}, sigma is {}x{}, lambda has length {}",
                sigma.nrows(),
                sigma.ncols(),
                lambda.len()
            )));
        }
        if let Some(x) = lambda.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Domain(format!(
                "measurement noise variance for alternative {x} must be positive"
            )));
        }
        check_finite(&mu, "belief mean")?;
        check_covariance(&sigma, "belief covariance")?;
        Ok(Self { mu, sigma, lambda })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Belief over a subset of alternatives, in the order given.
    pub fn restrict(&self, indices: &[usize]) -> BeliefState {
        BeliefState {
            mu: self.mu.select_rows(indices),
            sigma: self.sigma.select_rows(indices).select_columns(indices),
            lambda: self.lambda.select_rows(indices),
        }
    }

    /// Covariance entries held in memory.
    pub fn covariance_entries(&self) -> usize {
        self.sigma.len()
    }
}

/// Weight-space belief `theta ~ N(theta, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeBelief {
    theta: DVector<f64>,
    c_matrix: DMatrix<f64>,
}

impl AttributeBelief {
    pub fn new(theta: DVector<f64>, c_matrix: DMatrix<f64>) -> Result<Self> {
        let l = theta.len();
        if l == 0 || c_matrix.nrows() != l || c_matrix.ncols() != l {
            return Err(Error::Dimension(format!(
                "theta has length {l}, C is {}x{}",
                c_matrix.nrows(),
                c_matrix.ncols()
            )));
        }
        check_finite(&theta, "weight mean")?;
        check_covariance(&c_matrix, "weight covariance")?;
        Ok(Self { theta, c_matrix })
    }

    /// Zero-mean prior with a diagonal covariance.
    pub fn diagonal_prior(width: usize, variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::Domain("prior variance must be non-negative".into()));
        }
        Self::new(
            DVector::zeros(width),
            DMatrix::from_diagonal_element(width, width, variance),
        )
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn c_matrix(&self) -> &DMatrix<f64> {
        &self.c_matrix
    }

    pub fn width(&self) -> usize {
        self.theta.len()
    }

    /// Predicted mean of every alternative, `X theta`.
    pub fn predicted_means(&self, features: &FeatureMatrix) -> Result<DVector<f64>> {
        check_width(self, features)?;
        Ok(features.matrix() * &self.theta)
    }

    /// Covariance entries held in memory for the implied belief over
    /// `features.alternatives()` alternatives: `C` plus the feature matrix.
    pub fn covariance_entries(&self, features: &FeatureMatrix) -> usize {
        self.c_matrix.len() + features.matrix().len()
    }
}

fn check_width(ab: &AttributeBelief, features: &FeatureMatrix) -> Result<()> {
    if features.width() != ab.width() {
        return Err(Error::Dimension(format!(
            "feature matrix has {} columns but the weight belief has {}",
            features.width(),
            ab.width()
        )));
    }
    Ok(())
}

/// Projects a weight belief to alternatives: `mu = X theta`, `Sigma = X C X^T`.
///
/// The returned state carries `lambda` as given.
pub fn prior_from_attributes(
    theta0: &AttributeBelief,
    features: &FeatureMatrix,
    lambda: DVector<f64>,
) -> Result<BeliefState> {
    check_width(theta0, features)?;
    let x = features.matrix();
    let mu = x * &theta0.theta;
    let mut sigma = x * &theta0.c_matrix * x.transpose();
    symmetrize(&mut sigma);
    BeliefState::new(mu, sigma, lambda)
}

fn check_index(x: usize, m: usize) -> Result<()> {
    if x >= m {
        return Err(Error::Dimension(format!(
            "alternative {x} out of range for {m} alternatives"
        )));
    }
    Ok(())
}

fn positive_denominator(value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericalDegeneracy(format!(
            "predictive variance {value} is not positive"
        )))
    }
}

/// Posterior after observing `y` for alternative `x`.
pub fn update_full(b: &BeliefState, x: usize, y: f64) -> Result<BeliefState> {
    check_index(x, b.len())?;
    let denom = positive_denominator(b.lambda[x] + b.sigma[(x, x)])?;
    let column = b.sigma.column(x).into_owned();
    let mu = &b.mu + &column * ((y - b.mu[x]) / denom);
    let mut sigma = &b.sigma - (&column * column.transpose()) / denom;
    symmetrize(&mut sigma);
    check_covariance(&sigma, "posterior covariance")?;
    Ok(BeliefState {
        mu,
        sigma,
        lambda: b.lambda.clone(),
    })
}

/// Change in the mean vector per unit standardized observation of `x`.
pub fn sigma_tilde_full(b: &BeliefState, x: usize) -> Result<DVector<f64>> {
    check_index(x, b.len())?;
    let denom = positive_denominator(b.lambda[x] + b.sigma[(x, x)])?;
    Ok(b.sigma.column(x) / denom.sqrt())
}

/// Posterior weight belief after observing `y` at feature row `xrow`.
pub fn update_attribute(
    ab: &AttributeBelief,
    xrow: &DVector<f64>,
    y: f64,
    lambda_x: f64,
) -> Result<AttributeBelief> {
    if xrow.len() != ab.width() {
        return Err(Error::Dimension(format!(
            "feature row has length {}, weight belief has {}",
            xrow.len(),
            ab.width()
        )));
    }
    let c_x = &ab.c_matrix * xrow;
    let gamma = positive_denominator(lambda_x + xrow.dot(&c_x))?;
    let innovation = y - ab.theta.dot(xrow);
    let theta = &ab.theta + &c_x * (innovation / gamma);
    let mut c_matrix = &ab.c_matrix - (&c_x * c_x.transpose()) / gamma;
    symmetrize(&mut c_matrix);
    check_covariance(&c_matrix, "posterior weight covariance")?;
    Ok(AttributeBelief { theta, c_matrix })
}

/// Column `Sigma e_x = X C x_row` of the implied covariance, computed in O(M L).
pub fn covariance_column(
    ab: &AttributeBelief,
    features: &FeatureMatrix,
    x: usize,
) -> Result<DVector<f64>> {
    check_width(ab, features)?;
    check_index(x, features.alternatives())?;
    let c_row = &ab.c_matrix * features.row(x);
    Ok(features.matrix() * c_row)
}

/// Attribute-form counterpart of [`sigma_tilde_full`].
pub fn sigma_tilde_attribute(
    ab: &AttributeBelief,
    features: &FeatureMatrix,
    x: usize,
    lambda_x: f64,
) -> Result<DVector<f64>> {
    let column = covariance_column(ab, features, x)?;
    let denom = positive_denominator(lambda_x + column[x])?;
    Ok(column / denom.sqrt())
}
