//! Small dense helpers shared by the belief and policy modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on eigenvalues below zero, as a fraction of the trace.
pub const PSD_TOLERANCE: f64 = 1e-9;

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| {
        (0..i).all(|j| {
            let a = m[(i, j)];
            (a - m[(j, i)]).abs() <= 1e-12 * a.abs().max(1.0)
        })
    })
}

/// Checks that the smallest eigenvalue of a symmetric matrix is at least
/// `-PSD_TOLERANCE * trace`.
///
/// `A + tau I` is positive definite exactly when `lambda_min(A) > -tau`, so a
/// Cholesky attempt on the shifted matrix answers the question in O(n^3 / 3).
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let trace = m.trace();
    if trace < 0.0 {
        return false;
    }
    if trace == 0.0 {
        return m.iter().all(|&v| v == 0.0);
    }
    let tau = PSD_TOLERANCE * trace;
    let mut shifted = m.clone();
    for i in 0..m.nrows() {
        shifted[(i, i)] += tau;
    }
    shifted.cholesky().is_some()
}

pub(crate) fn check_covariance(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !is_symmetric(m) {
        return Err(Error::NumericalDegeneracy(format!(
            "{what} is not symmetric"
        )));
    }
    if !is_psd(m) {
        return Err(Error::NumericalDegeneracy(format!(
            "{what} is not positive semi-definite"
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalDegeneracy(format!(
            "{what} has non-finite entries"
        )))
    }
}

/// Lower Cholesky factor, retrying once with `1e-10 * trace` added to the diagonal.
pub(crate) fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.l());
    }
    let n = m.nrows();
    let mut jitter = 1e-10 * m.trace();
    if jitter <= 0.0 {
        // zero matrix: any positive jitter keeps the factor at numerical zero
        jitter = f64::MIN_POSITIVE.sqrt();
    }
    let shifted = m + DMatrix::<f64>::identity(n, n) * jitter;
    shifted
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NumericalDegeneracy("Cholesky failed after diagonal jitter".into()))
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val || (i == 0 && v.is_nan()) {
            best = i;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_check_accepts_rank_deficient_and_rejects_indefinite() {
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert!(is_psd(&ones));
        assert!(is_psd(&DMatrix::zeros(2, 2)));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!is_psd(&indefinite));
        let zero_trace = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(!is_psd(&zero_trace));
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax([0.2, 0.2]), 0);
        assert_eq!(argmax([0.1, 0.3, 0.2]), 1);
        assert_eq!(argmax([0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn jittered_cholesky_handles_singular_matrices() {
        let ones = DMatrix::from_element(3, 3, 1.0);
        let l = cholesky_with_jitter(&ones).unwrap();
        let back = &l * l.transpose();
        assert!((back - ones).amax() < 1e-6);
    }
}
