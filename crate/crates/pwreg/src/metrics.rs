//! Fit-quality metrics.
//!
//! All functions take the observed targets first and the predictions second.
//! The relative metrics (`rae`, `r_squared`) are undefined for a constant
//! target and report [`Error::ConstantTarget`] instead of dividing by zero.

use crate::error::{Error, Result};

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            xs: y.len(),
            ys: yhat.len(),
        });
    }
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "y", index: i });
        }
    }
    for (i, &v) in yhat.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "yhat",
                index: i,
            });
        }
    }
    Ok(())
}

/// Mean squared error `(1/n) * sum (y - yhat)^2`.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let sum: f64 = y
        .iter()
        .zip(yhat)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / y.len() as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    mse(y, yhat).map(f64::sqrt)
}

/// Mean absolute error `(1/n) * sum |y - yhat|`.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let sum: f64 = y.iter().zip(yhat).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(sum / y.len() as f64)
}

/// Relative absolute error `sum |y - yhat| / sum |y - mean(y)|`.
pub fn rae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let denom: f64 = y.iter().map(|&a| (a - mean).abs()).sum();
    if denom == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let num: f64 = y.iter().zip(yhat).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(num / denom)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|&a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res: f64 = y
        .iter()
        .zip(yhat)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Bundle of every metric for one fit. The relative metrics are `None` when
/// the target is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub rae: Option<f64>,
    pub r_squared: Option<f64>,
    pub breakpoint_count: usize,
}

impl MetricsReport {
    /// `breakpoint_count` is the number of interior breakpoints of the model
    /// that produced `yhat`.
    pub fn compute(y: &[f64], yhat: &[f64], breakpoint_count: usize) -> Result<Self> {
        let mse = mse(y, yhat)?;
        let mae = mae(y, yhat)?;
        let rae = match rae(y, yhat) {
            Ok(v) => Some(v),
            Err(Error::ConstantTarget) => None,
            Err(e) => return Err(e),
        };
        let r_squared = match r_squared(y, yhat) {
            Ok(v) => Some(v),
            Err(Error::ConstantTarget) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            mse,
            rmse: mse.sqrt(),
            mae,
            rae,
            r_squared,
            breakpoint_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const Y: [f64; 3] = [1.0, 2.0, 3.0];
    const YHAT: [f64; 3] = [1.0, 2.0, 4.0];

    #[test]
    fn worked_example_is_exact() {
        assert_eq!(mse(&Y, &YHAT).unwrap(), 1.0 / 3.0);
        assert_eq!(mae(&Y, &YHAT).unwrap(), 1.0 / 3.0);
        assert_eq!(rae(&Y, &YHAT).unwrap(), 0.5);
        assert_eq!(r_squared(&Y, &YHAT).unwrap(), 0.5);
        assert_relative_eq!(rmse(&Y, &YHAT).unwrap(), (1.0f64 / 3.0).sqrt());
    }

    #[test]
    fn perfect_fit() {
        assert_eq!(mse(&Y, &Y).unwrap(), 0.0);
        assert_eq!(r_squared(&Y, &Y).unwrap(), 1.0);
        assert_eq!(rae(&Y, &Y).unwrap(), 0.0);
    }

    #[test]
    fn constant_target_is_an_error_for_relative_metrics() {
        let y = [2.0, 2.0, 2.0];
        assert!(matches!(rae(&y, &YHAT), Err(Error::ConstantTarget)));
        assert!(matches!(r_squared(&y, &YHAT), Err(Error::ConstantTarget)));
        // The absolute metrics stay defined.
        assert_relative_eq!(mse(&y, &YHAT).unwrap(), 5.0 / 3.0);
    }

    #[test]
    fn single_point_has_constant_target() {
        assert_eq!(mse(&[1.0], &[2.0]).unwrap(), 1.0);
        assert!(matches!(r_squared(&[1.0], &[2.0]), Err(Error::ConstantTarget)));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(mse(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            mse(&Y, &[1.0]),
            Err(Error::LengthMismatch { xs: 3, ys: 1 })
        ));
    }

    #[test]
    fn report_bundles_all_metrics() {
        let r = MetricsReport::compute(&Y, &YHAT, 2).unwrap();
        assert_eq!(r.mse, 1.0 / 3.0);
        assert_eq!(r.rae, Some(0.5));
        assert_eq!(r.r_squared, Some(0.5));
        assert_eq!(r.breakpoint_count, 2);
    }

    #[test]
    fn report_uses_none_for_constant_target() {
        let r = MetricsReport::compute(&[5.0, 5.0], &[4.0, 6.0], 0).unwrap();
        assert_eq!(r.rae, None);
        assert_eq!(r.r_squared, None);
        assert_eq!(r.mse, 1.0);
    }
}
