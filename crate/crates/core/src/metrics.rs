//! Regression metrics.

use crate::data::Metrics;
use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

fn check_pair<T>(truth: &[T], pred: &[T]) -> Result<()> {
    if truth.is_empty() {
        return Err(CoreError::InvalidInput("empty metric input".into()));
    }
    if truth.len() != pred.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} truth values vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    Ok(())
}

/// Coefficient of determination, `1 - SS_res / SS_tot`. Errors when the
/// truth is constant (the score is undefined there).
pub fn r_squared<T: Scalar>(truth: &[T], pred: &[T]) -> Result<T> {
    check_pair(truth, pred)?;
    let n = T::of(truth.len() as f64);
    let mean = truth.iter().copied().sum::<T>() / n;
    let ss_tot: T = truth.iter().map(|&y| (y - mean) * (y - mean)).sum();
    if ss_tot == T::zero() {
        return Err(CoreError::InvalidInput(
            "constant truth makes the score undefined".into(),
        ));
    }
    let ss_res: T = truth
        .iter()
        .zip(pred)
        .map(|(&y, &f)| (y - f) * (y - f))
        .sum();
    Ok(T::one() - ss_res / ss_tot)
}

/// Root mean squared error.
pub fn rmse<T: Scalar>(truth: &[T], pred: &[T]) -> Result<T> {
    check_pair(truth, pred)?;
    let n = T::of(truth.len() as f64);
    let ss: T = truth
        .iter()
        .zip(pred)
        .map(|(&y, &f)| (y - f) * (y - f))
        .sum();
    Ok((ss / n).sqrt())
}

/// Pearson correlation coefficient. Errors when either side is constant.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    check_pair(a, b)?;
    let n = T::of(a.len() as f64);
    let mean_a = a.iter().copied().sum::<T>() / n;
    let mean_b = b.iter().copied().sum::<T>() / n;
    let mut cov = T::zero();
    let mut var_a = T::zero();
    let mut var_b = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == T::zero() || var_b == T::zero() {
        return Err(CoreError::InvalidInput(
            "constant input makes correlation undefined".into(),
        ));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Both headline metrics at once.
pub fn evaluate<T: Scalar>(truth: &[T], pred: &[T]) -> Result<Metrics<T>> {
    Ok(Metrics {
        r_squared: r_squared(truth, pred)?,
        rmse: rmse(truth, pred)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_squared_hand_value() {
        // residual 1 on the last point, total variance 2: 1 - 1/2
        let r = r_squared::<f64>(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn r_squared_perfect_is_one() {
        let r = r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn r_squared_constant_truth_errors() {
        assert!(r_squared(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn rmse_hand_value() {
        let e = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((e - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pearson_sign_and_magnitude() {
        let r = pearson::<f64>(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = pearson::<f64>(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
