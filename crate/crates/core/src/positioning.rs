//! Ranging from received signal strength, planar multilateration and
//! trajectory smoothing.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};

/// Largest accepted condition number of a multilateration system.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Position2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Free-space loss in dB at `d` meters for a carrier of `fc` MHz.
pub fn free_space_pl0(fc_mhz: f64, d: f64) -> Result<f64> {
    if !(fc_mhz > 0.0 && d > 0.0) {
        return Err(Error::Domain(format!(
            "free-space loss needs positive frequency and distance, got fc={fc_mhz} MHz, d={d} m"
        )));
    }
    Ok(20.0 * d.log10() + 20.0 * fc_mhz.log10() - 27.55)
}

/// Log-distance path-loss model for one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    /// Reference distance in meters.
    pub d0: f64,
    /// Path-loss exponent.
    pub n_pl: f64,
    /// Central frequency in MHz.
    pub fc: f64,
    /// Standard deviation of log-normal shadowing in dB.
    pub shadow_sigma: f64,
    /// Loss at the reference distance in dB.
    pub pl0: f64,
}

impl PathLossModel {
    /// Model whose reference loss is the free-space loss at `d0`.
    pub fn new(fc_mhz: f64, d0: f64, n_pl: f64, shadow_sigma: f64) -> Result<Self> {
        if !(n_pl > 0.0 && n_pl <= 10.0) {
            return Err(Error::Domain(format!(
                "path-loss exponent {n_pl} outside (0, 10]"
            )));
        }
        if !(shadow_sigma >= 0.0 && shadow_sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "shadowing deviation {shadow_sigma} must be non-negative"
            )));
        }
        let pl0 = free_space_pl0(fc_mhz, d0)?;
        Ok(Self {
            d0,
            n_pl,
            fc: fc_mhz,
            shadow_sigma,
            pl0,
        })
    }
}

/// Loss in dB at distance `d`, plus an additive shadowing term.
pub fn pl_from_distance(model: &PathLossModel, d: f64, shadow: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance {d} must be positive")));
    }
    Ok(model.pl0 + 10.0 * model.n_pl * (d / model.d0).log10() + shadow)
}

/// Inverse of [`pl_from_distance`] without shadowing.
pub fn distance_from_pl(model: &PathLossModel, pl: f64) -> f64 {
    model.d0 * 10f64.powf((pl - model.pl0) / (10.0 * model.n_pl))
}

/// Linearizes the range equations by subtracting the first anchor's equation
/// from every other one, giving `A p = b` with `I - 1` rows.
pub fn build_linear_system(tx: &[Position2D], d: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if tx.len() < 4 {
        return Err(Error::InsufficientAnchors {
            needed: 4,
            got: tx.len(),
        });
    }
    if d.len() != tx.len() {
        return Err(Error::Dimension(format!(
            "{} anchors but {} distances",
            tx.len(),
            d.len()
        )));
    }
    let rows = tx.len() - 1;
    let first = tx[0];
    let mut a = DMatrix::zeros(rows, 2);
    let mut b = DVector::zeros(rows);
    for j in 0..rows {
        let other = tx[j + 1];
        a[(j, 0)] = 2.0 * (first.x - other.x);
        a[(j, 1)] = 2.0 * (first.y - other.y);
        b[j] = first.x * first.x - other.x * other.x + first.y * first.y - other.y * other.y
            + d[j + 1] * d[j + 1]
            - d[0] * d[0];
    }
    Ok((a, b))
}

/// Least-squares solution of `A p = b` through the singular value decomposition.
pub fn lsq_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Position2D> {
    if a.ncols() != 2 || a.nrows() != b.len() || a.nrows() < 2 {
        return Err(Error::Dimension(format!(
            "expected an n x 2 system with n >= 2, got {}x{} and {} right-hand sides",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > 0.0) || s_max / s_min > MAX_CONDITION {
        return Err(Error::RankDeficient(format!(
            "singular values {s_max:e} / {s_min:e}"
        )));
    }
    let sol = svd
        .solve(b, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    Ok(Position2D::new(sol[0], sol[1]))
}

/// Multilaterated position from anchors and ranges.
pub fn multilaterate(tx: &[Position2D], d: &[f64]) -> Result<Position2D> {
    let (a, b) = build_linear_system(tx, d)?;
    lsq_solve(&a, &b)
}

/// Result of a transmitter position fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxFit {
    pub position: Position2D,
    pub iterations: usize,
}

pub const GAUSS_NEWTON_MAX_ITERATIONS: usize = 100;
pub const GAUSS_NEWTON_STEP_TOLERANCE: f64 = 1e-9;

/// Locates a transmitter from receiver positions with known ranges by
/// Gauss-Newton on `sum_k (|p_k - q| - d_k)^2`, starting at the centroid.
pub fn estimate_tx_positions(receiver_track: &[Position2D], d_per_epoch: &[f64]) -> Result<TxFit> {
    if receiver_track.len() < 3 {
        return Err(Error::InsufficientAnchors {
            needed: 3,
            got: receiver_track.len(),
        });
    }
    if receiver_track.len() != d_per_epoch.len() {
        return Err(Error::Dimension(format!(
            "{} receiver positions but {} ranges",
            receiver_track.len(),
            d_per_epoch.len()
        )));
    }
    let n = receiver_track.len() as f64;
    let cx = receiver_track.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = receiver_track.iter().map(|p| p.y).sum::<f64>() / n;

    // spread of the receivers must span the plane
    let mut scatter = Matrix2::zeros();
    for p in receiver_track {
        let v = Vector2::new(p.x - cx, p.y - cy);
        scatter += v * v.transpose();
    }
    let eig = scatter.symmetric_eigenvalues();
    if !(eig.min() > 1e-12 * eig.max().max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient(
            "receiver positions are collinear".into(),
        ));
    }

    let mut q = Vector2::new(cx, cy);
    let mut last_step = f64::INFINITY;
    for iteration in 1..=GAUSS_NEWTON_MAX_ITERATIONS {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (p, &d) in receiver_track.iter().zip(d_per_epoch) {
            let diff = q - Vector2::new(p.x, p.y);
            let range = diff.norm();
            if range == 0.0 {
                continue;
            }
            let grad = diff / range;
            jtj += grad * grad.transpose();
            jtr += grad * (range - d);
        }
        let step = jtj
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("singular Gauss-Newton normal matrix".into()))?
            * -jtr;
        q += step;
        last_step = step.norm();
        if last_step < GAUSS_NEWTON_STEP_TOLERANCE {
            return Ok(TxFit {
                position: Position2D::new(q.x, q.y),
                iterations: iteration,
            });
        }
    }
    Err(Error::Convergence {
        iterations: GAUSS_NEWTON_MAX_ITERATIONS,
        last_step,
    })
}

/// Vehicle state `[x, y, vx, vy]` and its error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState {
    pub state: Vector4<f64>,
    pub p_matrix: Matrix4<f64>,
}

impl EkfState {
    pub fn new(state: Vector4<f64>, p_matrix: Matrix4<f64>) -> Result<Self> {
        if !is_psd4(&p_matrix) {
            return Err(Error::NumericalDegeneracy(
                "state covariance is not symmetric positive semi-definite".into(),
            ));
        }
        Ok(Self { state, p_matrix })
    }

    pub fn position(&self) -> Position2D {
        Position2D::new(self.state[0], self.state[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfConfig {
    pub dt: f64,
    pub f_matrix: Matrix4<f64>,
    pub h_matrix: Matrix2x4<f64>,
    pub q_matrix: Matrix4<f64>,
    pub r_matrix: Matrix2<f64>,
}

pub const DEFAULT_ACCEL_SIGMA: f64 = 0.5;
pub const DEFAULT_MEASUREMENT_VARIANCE: f64 = 4.0;

impl EkfConfig {
    pub fn new(
        dt: f64,
        f_matrix: Matrix4<f64>,
        h_matrix: Matrix2x4<f64>,
        q_matrix: Matrix4<f64>,
        r_matrix: Matrix2<f64>,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step {dt} must be positive")));
        }
        if !is_psd4(&q_matrix) {
            return Err(Error::Config(
                "process noise Q must be symmetric PSD".into(),
            ));
        }
        if (r_matrix - r_matrix.transpose()).amax() > 1e-12 || r_matrix.cholesky().is_none() {
            return Err(Error::Config(
                "measurement noise R must be symmetric positive definite".into(),
            ));
        }
        Ok(Self {
            dt,
            f_matrix,
            h_matrix,
            q_matrix,
            r_matrix,
        })
    }

    /// Constant-velocity motion with discretized white-acceleration noise of
    /// standard deviation `accel_sigma`, observing position with variance
    /// `measurement_variance` per axis.
    pub fn constant_velocity(dt: f64, accel_sigma: f64, measurement_variance: f64) -> Result<Self> {
        #[rustfmt::skip]
        let f = Matrix4::new(
            1.0, 0.0, dt, 0.0,
            0.0, 1.0, 0.0, dt,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let h = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        let g = Matrix4::from_diagonal(&Vector4::new(0.5 * dt * dt, 0.5 * dt * dt, dt, dt));
        // per axis the noise gain is [dt^2/2, dt], correlated between position and velocity
        let mut q = Matrix4::zeros();
        for axis in 0..2 {
            let (pos, vel) = (axis, axis + 2);
            q[(pos, pos)] = g[(pos, pos)] * g[(pos, pos)];
            q[(pos, vel)] = g[(pos, pos)] * g[(vel, vel)];
            q[(vel, pos)] = q[(pos, vel)];
            q[(vel, vel)] = g[(vel, vel)] * g[(vel, vel)];
        }
        q *= accel_sigma * accel_sigma;
        Self::new(dt, f, h, q, Matrix2::identity() * measurement_variance)
    }
}

fn is_psd4(m: &Matrix4<f64>) -> bool {
    if m.iter().any(|v| !v.is_finite()) || (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return false;
    }
    let eig = m.symmetric_eigenvalues();
    eig.min() >= -1e-9 * m.trace().abs().max(f64::MIN_POSITIVE)
}

fn symmetrize4(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Time update: `x' = F x`, `P' = F P F^T + Q`.
pub fn ekf_predict(s: &EkfState, cfg: &EkfConfig) -> EkfState {
    let f = &cfg.f_matrix;
    EkfState {
        state: f * s.state,
        p_matrix: symmetrize4(&(f * s.p_matrix * f.transpose() + cfg.q_matrix)),
    }
}

/// Measurement update with a linearized measurement map: `predicted` is
/// `h(x)` and `jacobian` its derivative at the current state.
pub fn ekf_update_linearized(
    s: &EkfState,
    z: Vector2<f64>,
    predicted: Vector2<f64>,
    jacobian: &Matrix2x4<f64>,
    r: &Matrix2<f64>,
) -> Result<EkfState> {
    let innovation_cov = jacobian * s.p_matrix * jacobian.transpose() + r;
    let inv = innovation_cov
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::NumericalDegeneracy("innovation covariance is singular".into()))?;
    let gain = s.p_matrix * jacobian.transpose() * inv;
    let state = s.state + gain * (z - predicted);
    let p = (Matrix4::identity() - gain * jacobian) * s.p_matrix;
    Ok(EkfState {
        state,
        p_matrix: symmetrize4(&p),
    })
}

/// Measurement update with the configured linear position measurement.
pub fn ekf_update(s: &EkfState, z: Position2D, cfg: &EkfConfig) -> Result<EkfState> {
    let h = &cfg.h_matrix;
    ekf_update_linearized(s, Vector2::new(z.x, z.y), h * s.state, h, &cfg.r_matrix)
}
