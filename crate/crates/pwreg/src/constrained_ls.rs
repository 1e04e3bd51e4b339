//! Equality-constrained least squares for continuous piecewise polynomials.
//!
//! With the data split into k segments, each segment gets its own polynomial
//! of degree d and adjacent polynomials are forced to agree at the shared
//! breakpoint. Stationarity of the Lagrangian gives one square KKT system
//!
//! ```text
//!     | 2 X^T X   C^T | | theta  |   | 2 X^T y |
//!     |               | |        | = |         |
//!     |    C       0  | | lambda |   |    0    |
//! ```
//!
//! where X is the block-diagonal design matrix and each row of C pins the
//! value of one polynomial pair at one interior breakpoint. The system is
//! assembled in the scaled coordinate u = (x - center) / half_width and the
//! solution is mapped back to user coordinates before anything downstream
//! sees it; the multipliers are returned for diagnostics but never reused.
//!
//! Solving uses a full-pivot LU rather than explicit inversion, with a pivot
//! screen and a residual check so a rank-deficient configuration (for
//! example a segment with fewer than d + 1 points) surfaces as
//! [`Error::SingularSystem`] instead of garbage coefficients.

use crate::breakpoints::{partition, BreakpointVector};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{horner, PiecewiseModel, Scaling};
use nalgebra::{DMatrix, DVector};

/// Relative pivot-ratio threshold below which LU factors are not trusted.
const PIVOT_RTOL: f64 = 1e-13;
/// Relative residual bound on the solved KKT system.
const RESIDUAL_RTOL: f64 = 1e-8;
/// Relative bound on the continuity mismatch of a finished fit.
const CONTINUITY_RTOL: f64 = 1e-8;

/// Rows `[1, z, z^2, ..., z^degree]` for each entry of `points`.
pub fn build_vandermonde(points: &[f64], degree: usize) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(points.len(), degree + 1);
    for (r, &z) in points.iter().enumerate() {
        let mut pow = 1.0;
        for c in 0..=degree {
            v[(r, c)] = pow;
            pow *= z;
        }
    }
    v
}

/// Per-segment Vandermonde blocks of one partition, in scaled coordinates.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    blocks: Vec<DMatrix<f64>>,
    degree: usize,
}

impl DesignMatrix {
    /// `cuts` are partition boundaries into `u` (`cuts[j]..cuts[j + 1]` is
    /// segment j).
    pub fn build(u: &[f64], cuts: &[usize], degree: usize) -> Self {
        let blocks = cuts
            .windows(2)
            .map(|w| build_vandermonde(&u[w[0]..w[1]], degree))
            .collect();
        Self { blocks, degree }
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn coeff_len(&self) -> usize {
        self.blocks.len() * (self.degree + 1)
    }

    /// Dense block-diagonal form, rows in data order. Only needed by
    /// diagnostics and reference implementations; the KKT assembly works
    /// from the blocks directly.
    pub fn assemble_dense(&self) -> DMatrix<f64> {
        let n: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let p = self.degree + 1;
        let mut x = DMatrix::zeros(n, self.coeff_len());
        let mut row = 0;
        for (j, block) in self.blocks.iter().enumerate() {
            x.view_mut((row, j * p), (block.nrows(), p)).copy_from(block);
            row += block.nrows();
        }
        x
    }
}

/// Continuity constraints `C theta = 0`. Row t evaluates polynomial t and
/// polynomial t + 1 at interior breakpoint t (scaled) with opposite signs.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    matrix: DMatrix<f64>,
}

impl ConstraintMatrix {
    pub fn build(interior_u: &[f64], degree: usize, segment_count: usize) -> Self {
        let p = degree + 1;
        let mut c = DMatrix::zeros(interior_u.len(), segment_count * p);
        for (t, &xi) in interior_u.iter().enumerate() {
            let mut pow = 1.0;
            for r in 0..p {
                c[(t, t * p + r)] = pow;
                c[(t, (t + 1) * p + r)] = -pow;
                pow *= xi;
            }
        }
        Self { matrix: c }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Assembled KKT system. The leading `coeff_len` unknowns are the stacked
/// polynomial coefficients (scaled coordinates, ascending powers); the
/// trailing `multiplier_len` are the Lagrange multipliers.
#[derive(Debug, Clone)]
pub struct KktSystem {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    coeff_len: usize,
    multiplier_len: usize,
}

impl KktSystem {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn order(&self) -> usize {
        self.coeff_len + self.multiplier_len
    }

    pub fn coeff_len(&self) -> usize {
        self.coeff_len
    }

    pub fn multiplier_len(&self) -> usize {
        self.multiplier_len
    }
}

/// Core assembly over pre-scaled data. `cuts` must describe non-empty
/// segments and `interior_u` must hold one scaled breakpoint per adjacent
/// segment pair.
pub(crate) fn assemble_scaled(
    u: &[f64],
    ys: &[f64],
    cuts: &[usize],
    interior_u: &[f64],
    degree: usize,
) -> KktSystem {
    debug_assert_eq!(cuts.len(), interior_u.len() + 2);
    let design = DesignMatrix::build(u, cuts, degree);
    let p = degree + 1;
    let coeff_len = design.coeff_len();
    let multiplier_len = interior_u.len();
    let order = coeff_len + multiplier_len;
    let mut a = DMatrix::zeros(order, order);
    let mut b = DVector::zeros(order);
    for (j, block) in design.blocks().iter().enumerate() {
        let gram = block.tr_mul(block) * 2.0;
        a.view_mut((j * p, j * p), (p, p)).copy_from(&gram);
        let yseg = DVector::from_column_slice(&ys[cuts[j]..cuts[j + 1]]);
        let moment = block.tr_mul(&yseg) * 2.0;
        b.rows_mut(j * p, p).copy_from(&moment);
    }
    if multiplier_len > 0 {
        let constraints = ConstraintMatrix::build(interior_u, degree, cuts.len() - 1);
        let c = constraints.matrix();
        a.view_mut((coeff_len, 0), (multiplier_len, coeff_len))
            .copy_from(c);
        a.view_mut((0, coeff_len), (coeff_len, multiplier_len))
            .copy_from(&c.transpose());
    }
    KktSystem {
        matrix: a,
        rhs: b,
        coeff_len,
        multiplier_len,
    }
}

/// Builds the KKT system for `ds` split by `bp`, in scaled coordinates.
/// With a single segment this degenerates to the ordinary normal equations.
pub fn assemble_kkt(ds: &Dataset, bp: &BreakpointVector, degree: usize) -> Result<KktSystem> {
    let part = partition(ds, bp)?;
    let scaling = Scaling::from_xs(ds.xs());
    let u: Vec<f64> = ds.xs().iter().map(|&x| scaling.to_internal(x)).collect();
    let interior_u: Vec<f64> = bp
        .interior()
        .iter()
        .map(|&x| scaling.to_internal(x))
        .collect();
    Ok(assemble_scaled(&u, ds.ys(), part.cuts(), &interior_u, degree))
}

/// Solves the KKT system, returning `(theta, lambda)` with `theta` still in
/// scaled coordinates.
pub fn solve_kkt(sys: &KktSystem) -> Result<(DVector<f64>, DVector<f64>)> {
    let lu = sys.matrix.clone().full_piv_lu();
    let mut pivot_max = 0.0f64;
    let mut pivot_min = f64::INFINITY;
    for &v in lu.u().diagonal().iter() {
        pivot_max = pivot_max.max(v.abs());
        pivot_min = pivot_min.min(v.abs());
    }
    if pivot_max == 0.0 || pivot_min < PIVOT_RTOL * pivot_max {
        return Err(Error::SingularSystem(format!(
            "KKT pivot ratio {:.2e}",
            pivot_min / pivot_max
        )));
    }
    let sol = lu
        .solve(&sys.rhs)
        .ok_or_else(|| Error::SingularSystem("LU back-substitution failed".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    let residual = (&sys.matrix * &sol - &sys.rhs).norm();
    let scale = sys.rhs.norm();
    if scale > 0.0 && residual > RESIDUAL_RTOL * scale {
        return Err(Error::SingularSystem(format!(
            "relative KKT residual {:.2e}",
            residual / scale
        )));
    }
    let theta = sol.rows(0, sys.coeff_len).into_owned();
    let lambda = sol.rows(sys.coeff_len, sys.multiplier_len).into_owned();
    Ok((theta, lambda))
}

/// Substitutes `u = a0 + a1 * x` into a polynomial given in ascending powers
/// of `u`, returning ascending powers of `x`.
fn compose_affine(coeffs: &[f64], a0: f64, a1: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    out[0] = coeffs[coeffs.len() - 1];
    let mut used = 1;
    for &c in coeffs.iter().rev().skip(1) {
        out[used] = a1 * out[used - 1];
        for i in (1..used).rev() {
            out[i] = a0 * out[i] + a1 * out[i - 1];
        }
        out[0] = a0 * out[0] + c;
        used += 1;
    }
    out
}

fn user_coefficients(theta: &DVector<f64>, degree: usize, scaling: Scaling) -> Vec<Vec<f64>> {
    let p = degree + 1;
    let a1 = 1.0 / scaling.half_width();
    let a0 = -scaling.center() / scaling.half_width();
    theta
        .as_slice()
        .chunks(p)
        .map(|q| compose_affine(q, a0, a1))
        .collect()
}

/// Fits the continuous piecewise polynomial for a fixed breakpoint vector.
/// Returns the model (user-coordinate coefficients) and its training MSE,
/// computed from the model's own predictions so reported metrics and stored
/// coefficients can never disagree.
pub fn fit_piecewise(
    ds: &Dataset,
    bp: &BreakpointVector,
    degree: usize,
) -> Result<(PiecewiseModel, f64)> {
    let part = partition(ds, bp)?;
    let scaling = Scaling::from_xs(ds.xs());
    let u: Vec<f64> = ds.xs().iter().map(|&x| scaling.to_internal(x)).collect();
    let interior_u: Vec<f64> = bp
        .interior()
        .iter()
        .map(|&x| scaling.to_internal(x))
        .collect();
    let sys = assemble_scaled(&u, ds.ys(), part.cuts(), &interior_u, degree);
    let (theta, _lambda) = solve_kkt(&sys)?;
    let coeffs = user_coefficients(&theta, degree, scaling);
    let model = PiecewiseModel::from_parts(degree, bp.clone(), coeffs, scaling)?;
    let y_scale = ds.ys().iter().fold(0.0f64, |m, &y| m.max(y.abs()));
    let mismatch = model.continuity_residual();
    if mismatch > CONTINUITY_RTOL * (1.0 + y_scale) {
        return Err(Error::SingularSystem(format!(
            "continuity mismatch {mismatch:.2e} after back-transform"
        )));
    }
    let yhat = model.predict_many(ds.xs());
    let mse = metrics::mse(ds.ys(), &yhat)?;
    Ok((model, mse))
}

/// Solves one already-scaled configuration and returns the residual sum of
/// squares, evaluated in the scaled coordinate. Shared by the local
/// two-segment updates and the exact search, where only the objective value
/// matters.
pub(crate) fn solve_sse_scaled(
    u: &[f64],
    ys: &[f64],
    cuts: &[usize],
    interior_u: &[f64],
    degree: usize,
) -> Result<f64> {
    let sys = assemble_scaled(u, ys, cuts, interior_u, degree);
    let (theta, _) = solve_kkt(&sys)?;
    let p = degree + 1;
    let mut sse = 0.0;
    for j in 0..cuts.len() - 1 {
        let q = &theta.as_slice()[j * p..(j + 1) * p];
        for i in cuts[j]..cuts[j + 1] {
            let r = ys[i] - horner(q, u[i]);
            sse += r * r;
        }
    }
    Ok(sse)
}

/// Mean squared error of the best continuous two-segment fit of the local
/// window `(xs, ys)` split at `split`. The window gets its own scaling; the
/// resulting system has order `2 (degree + 1) + 1`.
pub(crate) fn two_segment_local_mse(
    xs: &[f64],
    ys: &[f64],
    split: f64,
    degree: usize,
) -> Result<f64> {
    let m = xs.len();
    let cut = xs.partition_point(|&x| x < split);
    if cut == 0 {
        return Err(Error::EmptySegment { segment: 0 });
    }
    if cut == m {
        return Err(Error::EmptySegment { segment: 1 });
    }
    let scaling = Scaling::from_xs(xs);
    let u: Vec<f64> = xs.iter().map(|&x| scaling.to_internal(x)).collect();
    let su = scaling.to_internal(split);
    let sse = solve_sse_scaled(&u, ys, &[0, cut, m], &[su], degree)?;
    Ok(sse / m as f64)
}
