//! Breakpoint vectors and the data partition they induce.
//!
//! A breakpoint vector `xi_0 < xi_1 < ... < xi_k` covers the data range with
//! `k` intervals. Interval `j` (0-based) owns `[xi_j, xi_{j+1})`; the last
//! interval is closed on the right. Interior breakpoints are forbidden from
//! coinciding with a data abscissa, which makes the half-open rule
//! unambiguous.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use std::ops::Range;

/// Strictly increasing breakpoints including both data endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointVector {
    left_end: f64,
    interior: Vec<f64>,
    right_end: f64,
}

impl BreakpointVector {
    pub fn new(left_end: f64, interior: Vec<f64>, right_end: f64) -> Result<Self> {
        for (i, &b) in interior.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFinite {
                    what: "breakpoints",
                    index: i,
                });
            }
        }
        if !left_end.is_finite() || !right_end.is_finite() {
            return Err(Error::InvalidBreakpoints(
                "endpoints must be finite".into(),
            ));
        }
        let mut prev = left_end;
        for &b in &interior {
            if b <= prev {
                return Err(Error::InvalidBreakpoints(format!(
                    "breakpoints must be strictly increasing, got {b} after {prev}"
                )));
            }
            prev = b;
        }
        if right_end <= prev {
            return Err(Error::InvalidBreakpoints(format!(
                "right endpoint {right_end} does not exceed last interior breakpoint {prev}"
            )));
        }
        Ok(Self {
            left_end,
            interior,
            right_end,
        })
    }

    /// Builds a vector whose endpoints are the data range.
    pub fn for_dataset(ds: &Dataset, interior: Vec<f64>) -> Result<Self> {
        let (lo, hi) = ds.x_range();
        if lo == hi {
            return Err(Error::InvalidBreakpoints(
                "data range is degenerate (all abscissae equal)".into(),
            ));
        }
        Self::new(lo, interior, hi)
    }

    pub fn left_end(&self) -> f64 {
        self.left_end
    }

    pub fn right_end(&self) -> f64 {
        self.right_end
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// Number of intervals (`interior.len() + 1`).
    pub fn segment_count(&self) -> usize {
        self.interior.len() + 1
    }

    /// Copy with interior breakpoint `index` removed.
    pub fn without(&self, index: usize) -> Self {
        let mut interior = self.interior.clone();
        interior.remove(index);
        Self {
            left_end: self.left_end,
            interior,
            right_end: self.right_end,
        }
    }

    /// Copy with a different interior, revalidated.
    pub fn with_interior(&self, interior: Vec<f64>) -> Result<Self> {
        Self::new(self.left_end, interior, self.right_end)
    }
}

/// Index ranges of a [`Dataset`] split by a [`BreakpointVector`]. `cuts` has
/// one entry per boundary: segment `j` is `cuts[j]..cuts[j + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalPartition {
    cuts: Vec<usize>,
}

impl IntervalPartition {
    pub fn segment_count(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn segment_range(&self, j: usize) -> Range<usize> {
        self.cuts[j]..self.cuts[j + 1]
    }

    pub fn segment_len(&self, j: usize) -> usize {
        self.cuts[j + 1] - self.cuts[j]
    }

    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }
}

/// Assigns every observation to its interval. Fails if the vector's endpoints
/// do not match the data range, if an interior breakpoint sits exactly on a
/// data abscissa, or if any interval ends up empty.
pub fn partition(ds: &Dataset, bp: &BreakpointVector) -> Result<IntervalPartition> {
    let xs = ds.xs();
    let (lo, hi) = ds.x_range();
    if bp.left_end() != lo || bp.right_end() != hi {
        return Err(Error::InvalidBreakpoints(format!(
            "endpoints ({}, {}) do not match the data range ({lo}, {hi})",
            bp.left_end(),
            bp.right_end()
        )));
    }
    let mut cuts = Vec::with_capacity(bp.segment_count() + 1);
    cuts.push(0usize);
    for &b in bp.interior() {
        let cut = xs.partition_point(|&x| x < b);
        if cut < xs.len() && xs[cut] == b {
            return Err(Error::BreakpointOnDatum { value: b });
        }
        cuts.push(cut);
    }
    cuts.push(xs.len());
    for j in 0..cuts.len() - 1 {
        if cuts[j] == cuts[j + 1] {
            return Err(Error::EmptySegment { segment: j });
        }
    }
    Ok(IntervalPartition { cuts })
}
