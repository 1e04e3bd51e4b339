//! Fitted piecewise polynomial models.

use crate::breakpoints::BreakpointVector;
use crate::error::{Error, Result};

/// Affine map between user abscissae and the internal fitting coordinate
/// `u = (x - center) / half_width`, which places the fitted range in
/// `[-1, 1]` to keep Vandermonde blocks well conditioned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    center: f64,
    half_width: f64,
}

impl Scaling {
    /// Scaling for the span of `xs`. A degenerate span gets `half_width = 1`
    /// so the map stays invertible.
    pub fn from_xs(xs: &[f64]) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in xs {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        Self {
            center,
            half_width: if half > 0.0 { half } else { 1.0 },
        }
    }

    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !center.is_finite() || !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scaling (center {center}, half_width {half_width}) is not a valid affine map"
            )));
        }
        Ok(Self { center, half_width })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn to_internal(&self, x: f64) -> f64 {
        (x - self.center) / self.half_width
    }

    pub fn from_internal(&self, u: f64) -> f64 {
        u * self.half_width + self.center
    }
}

/// Continuous piecewise polynomial. Coefficients are stored per segment in
/// ascending powers of the user coordinate, so reports and predictions need
/// no access to the internal scaling (it is kept for diagnostics only).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseModel {
    degree: usize,
    coefficients: Vec<Vec<f64>>,
    breakpoints: BreakpointVector,
    scaling: Scaling,
}

/// Polynomial evaluation, ascending coefficient order.
pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl PiecewiseModel {
    pub fn from_parts(
        degree: usize,
        breakpoints: BreakpointVector,
        coefficients: Vec<Vec<f64>>,
        scaling: Scaling,
    ) -> Result<Self> {
        if coefficients.len() != breakpoints.segment_count() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficient rows for {} segments",
                coefficients.len(),
                breakpoints.segment_count()
            )));
        }
        for (j, seg) in coefficients.iter().enumerate() {
            if seg.len() != degree + 1 {
                return Err(Error::InvalidParameter(format!(
                    "segment {j} has {} coefficients, expected {}",
                    seg.len(),
                    degree + 1
                )));
            }
            if let Some(i) = seg.iter().position(|c| !c.is_finite()) {
                return Err(Error::NonFinite {
                    what: "coefficients",
                    index: j * (degree + 1) + i,
                });
            }
        }
        Ok(Self {
            degree,
            coefficients,
            breakpoints,
            scaling,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn breakpoints(&self) -> &BreakpointVector {
        &self.breakpoints
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    /// Index of the segment that evaluates `x`. A point exactly on an
    /// interior breakpoint belongs to the left segment; points outside the
    /// fitted range extrapolate with the nearest boundary segment.
    pub fn segment_index(&self, x: f64) -> usize {
        self.breakpoints.interior().partition_point(|&b| b < x)
    }

    pub fn predict(&self, x: f64) -> f64 {
        horner(&self.coefficients[self.segment_index(x)], x)
    }

    pub fn predict_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }

    /// Largest jump `|p_j(xi) - p_{j+1}(xi)|` over interior breakpoints.
    /// Zero for an exactly continuous model.
    pub fn continuity_residual(&self) -> f64 {
        self.breakpoints
            .interior()
            .iter()
            .enumerate()
            .map(|(t, &xi)| {
                (horner(&self.coefficients[t], xi) - horner(&self.coefficients[t + 1], xi)).abs()
            })
            .fold(0.0, f64::max)
    }
}
