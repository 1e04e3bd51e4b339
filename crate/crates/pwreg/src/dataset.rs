//! Scattered 1-D observations, validated and kept sorted by abscissa.

use crate::error::{Error, Result};

/// Sorted observation pairs. `xs` is non-decreasing; duplicate abscissae are
/// allowed and keep their input order (the sort is stable).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// Validates the pairs and sorts them by `x`. Rejects length mismatches,
    /// non-finite entries, and fewer than two points.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                xs: xs.len(),
                ys: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::TooFewPoints {
                got: xs.len(),
                needed: 2,
            });
        }
        for (i, &x) in xs.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { what: "xs", index: i });
            }
        }
        for (i, &y) in ys.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonFinite { what: "ys", index: i });
            }
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        // Stable sort so ties keep input order; total_cmp is safe, everything
        // is finite by now.
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let sorted_xs = order.iter().map(|&i| xs[i]).collect();
        let sorted_ys = order.iter().map(|&i| ys[i]).collect();
        Ok(Self {
            xs: sorted_xs,
            ys: sorted_ys,
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Smallest and largest abscissa.
    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Restriction to the index range `lo..hi` as borrowed slices.
    pub(crate) fn slice(&self, lo: usize, hi: usize) -> (&[f64], &[f64]) {
        (&self.xs[lo..hi], &self.ys[lo..hi])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_pairs_together() {
        let ds = Dataset::new(vec![3.0, 1.0, 2.0], vec![30.0, 10.0, 20.0]).unwrap();
        assert_eq!(ds.xs(), &[1.0, 2.0, 3.0]);
        assert_eq!(ds.ys(), &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn stable_on_duplicate_abscissae() {
        let ds = Dataset::new(vec![2.0, 1.0, 1.0], vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(ds.xs(), &[1.0, 1.0, 2.0]);
        assert_eq!(ds.ys(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn sorting_is_idempotent() {
        let ds = Dataset::new(vec![5.0, -1.0, 2.0, 2.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let again = Dataset::new(ds.xs().to_vec(), ds.ys().to_vec()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn rejects_nan() {
        let err = Dataset::new(vec![1.0, 2.0], vec![5.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { what: "ys", index: 1 }));
    }

    #[test]
    fn rejects_infinite_x() {
        let err = Dataset::new(vec![1.0, f64::INFINITY], vec![5.0, 6.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { what: "xs", index: 1 }));
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = Dataset::new(vec![1.0, 2.0], vec![5.0]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { xs: 2, ys: 1 }));
    }

    #[test]
    fn rejects_single_point() {
        let err = Dataset::new(vec![1.0], vec![5.0]).unwrap_err();
        assert!(matches!(err, Error::TooFewPoints { got: 1, needed: 2 }));
    }
}
