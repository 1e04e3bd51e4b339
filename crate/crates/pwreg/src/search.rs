//! Breakpoint placement for a fixed number of segments.
//!
//! Breakpoints live on a finite candidate grid: the midpoints between
//! consecutive distinct data abscissae. The greedy search sweeps every
//! interior breakpoint once per iteration, letting each one consider three
//! positions derived from its local neighborhood, and keeps the best vector
//! seen across the whole run. Two exact references are provided for testing
//! and diagnostics: plain enumeration (guarded, for small grids) and a
//! branch-and-bound search that returns the same optimum on grids far too
//! large to enumerate.

use crate::breakpoints::{partition, BreakpointVector, IntervalPartition};
use crate::constrained_ls::{fit_piecewise, solve_sse_scaled, two_segment_local_mse};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{PiecewiseModel, Scaling};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashSet;

/// Enumeration cap for [`exhaustive_oracle`].
pub const DEFAULT_SIZE_GUARD: u64 = 2_000_000;

/// Node cap for [`branch_and_bound_optimum`].
pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

/// Midpoint of `a < b` if it falls strictly between them. Rounding can pull
/// the midpoint of two adjacent floats onto one of them; such a midpoint
/// would coincide with a data abscissa and is rejected.
fn strict_mid(a: f64, b: f64) -> Option<f64> {
    let m = 0.5 * (a + b);
    (a < m && m < b).then_some(m)
}

/// Sorted midpoints between consecutive distinct data abscissae. Every
/// breakpoint the search can produce is one of these values.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    values: Vec<f64>,
}

impl CandidateSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the candidate closest to `x`; the lower index wins ties.
    pub fn nearest_index(&self, x: f64) -> usize {
        let hi = self.values.partition_point(|&v| v < x);
        if hi == 0 {
            return 0;
        }
        if hi == self.values.len() {
            return self.values.len() - 1;
        }
        let lo = hi - 1;
        if (x - self.values[lo]) <= (self.values[hi] - x) {
            lo
        } else {
            hi
        }
    }
}

/// Builds the candidate grid for `ds`. Fails with [`Error::NoCandidates`]
/// when the data has fewer than two distinct abscissae.
pub fn candidate_set(ds: &Dataset) -> Result<CandidateSet> {
    let xs = ds.xs();
    let mut values: Vec<f64> = xs
        .windows(2)
        .filter_map(|w| (w[0] < w[1]).then(|| strict_mid(w[0], w[1])).flatten())
        .collect();
    values.dedup();
    if values.is_empty() {
        return Err(Error::NoCandidates(
            "data has fewer than two distinct abscissae wide enough to split".into(),
        ));
    }
    Ok(CandidateSet { values })
}

/// The three positions one breakpoint may consider: the midpoint of the last
/// two points on its left, the midpoint of the pair it currently separates,
/// and the midpoint of the first two points on its right. A member is absent
/// when its segment is too short or the midpoint collides with a datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateTriple {
    pub lower: Option<f64>,
    pub current: Option<f64>,
    pub upper: Option<f64>,
}

/// Candidate triple for the boundary between segments `t` and `t + 1`.
///
/// Panics if `t + 1` is not a valid segment index of `part`.
pub fn neighbor_candidates(ds: &Dataset, part: &IntervalPartition, t: usize) -> CandidateTriple {
    let xs = ds.xs();
    let left = part.segment_range(t);
    let right = part.segment_range(t + 1);
    let lower = (left.len() >= 2)
        .then(|| strict_mid(xs[left.end - 2], xs[left.end - 1]))
        .flatten();
    let current = strict_mid(xs[left.end - 1], xs[right.start]);
    let upper = (right.len() >= 2)
        .then(|| strict_mid(xs[right.start], xs[right.start + 1]))
        .flatten();
    CandidateTriple {
        lower,
        current,
        upper,
    }
}

/// Local move decision shared by [`update_single_breakpoint`] and the sweep.
/// `xs`/`ys` is the window of the two segments meeting at `cur`. Infeasible
/// or failing candidates score infinity; the move happens only when a
/// neighbor is strictly better than both alternatives, otherwise the
/// breakpoint snaps to the midpoint of the pair it separates.
fn propose_split(
    xs: &[f64],
    ys: &[f64],
    cur: f64,
    degree: usize,
    min_seg_points: usize,
) -> Result<f64> {
    let m = xs.len();
    let cut = xs.partition_point(|&x| x < cur);
    if cut == 0 {
        return Err(Error::EmptySegment { segment: 0 });
    }
    if cut == m {
        return Err(Error::EmptySegment { segment: 1 });
    }
    let m_left = cut;
    let m_right = m - cut;
    let lower = (m_left >= 2)
        .then(|| strict_mid(xs[cut - 2], xs[cut - 1]))
        .flatten();
    let current = strict_mid(xs[cut - 1], xs[cut]);
    let upper = (m_right >= 2)
        .then(|| strict_mid(xs[cut], xs[cut + 1]))
        .flatten();

    let score = |cand: Option<f64>, left_after: usize, right_after: usize| -> f64 {
        match cand {
            Some(v) if left_after >= min_seg_points && right_after >= min_seg_points => {
                two_segment_local_mse(xs, ys, v, degree).unwrap_or(f64::INFINITY)
            }
            _ => f64::INFINITY,
        }
    };
    let r_lower = score(lower, m_left - 1, m_right + 1);
    let r_current = score(current, m_left, m_right);
    let r_upper = score(upper, m_left + 1, m_right - 1);

    if r_lower < r_current && r_lower < r_upper {
        Ok(lower.unwrap())
    } else if r_upper < r_current && r_upper < r_lower {
        Ok(upper.unwrap())
    } else {
        Ok(current.unwrap_or(cur))
    }
}

/// One neighborhood update for the breakpoint `enclosing[1]`, given the data
/// window `(xs, ys)` of its two adjacent segments and the enclosing
/// breakpoints `enclosing[0]` and `enclosing[2]`. Returns the new position,
/// which is `enclosing[1]` snapped to its separating midpoint when neither
/// neighbor strictly improves on both alternatives.
pub fn update_single_breakpoint(
    xs: &[f64],
    ys: &[f64],
    enclosing: [f64; 3],
    degree: usize,
    min_seg_points: usize,
) -> Result<f64> {
    let [lo, cur, hi] = enclosing;
    if !(lo < cur && cur < hi) {
        return Err(Error::InvalidBreakpoints(format!(
            "enclosing triple ({lo}, {cur}, {hi}) is not strictly increasing"
        )));
    }
    if min_seg_points == 0 {
        return Err(Error::InvalidParameter(
            "min_seg_points must be at least 1".into(),
        ));
    }
    if xs.is_empty() || xs[0] < lo || xs[xs.len() - 1] > hi {
        return Err(Error::InvalidParameter(
            "window must lie inside the enclosing breakpoints".into(),
        ));
    }
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    propose_split(xs, ys, cur, degree, min_seg_points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOptions {
    /// Sweep cap; termination by convergence or cycle is the normal path.
    pub max_iterations: usize,
    /// Smallest admissible segment population during the search. Moves that
    /// would shrink a segment below it are discarded.
    pub min_seg_points: usize,
    /// Score the per-sweep updates on a thread pool. The updates of one
    /// sweep are independent, so the result is identical either way.
    pub parallel: bool,
}

impl Default for GreedyOptions {
    /// 200 sweeps, segments allowed down to a single point (the solver
    /// reports genuinely underdetermined configurations), sequential.
    fn default() -> Self {
        Self {
            max_iterations: 200,
            min_seg_points: 1,
            parallel: false,
        }
    }
}

impl GreedyOptions {
    /// Conservative variant requiring `degree + 1` points per segment, so
    /// every segment stays determined by its own data. The command-line
    /// tool defaults to this.
    pub fn for_degree(degree: usize) -> Self {
        Self {
            min_seg_points: degree + 1,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// A sweep proposed no change.
    NoMoves,
    /// The sweep produced a vector already seen earlier in the run.
    CycleDetected,
    /// The sweep cap ran out first.
    MaxIterations,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::NoMoves => "no_moves",
            TerminationReason::CycleDetected => "cycle_detected",
            TerminationReason::MaxIterations => "max_iterations",
        }
    }
}

/// State after one sweep. `moves` counts breakpoints that changed position;
/// the first record describes the initial vector with `moves = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub interior: Vec<f64>,
    pub mse: f64,
    pub moves: usize,
    pub best_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub iterations: Vec<IterationRecord>,
    pub termination: TerminationReason,
    pub best_interior: Vec<f64>,
    pub best_mse: f64,
}

impl SearchTrace {
    pub fn initial_mse(&self) -> f64 {
        self.iterations[0].mse
    }

    pub fn total_moves(&self) -> usize {
        self.iterations.iter().map(|r| r.moves).sum()
    }
}

fn bit_key(interior: &[f64]) -> Vec<u64> {
    interior.iter().map(|v| v.to_bits()).collect()
}

/// Greedy breakpoint search from a fixed initial vector. Every sweep scores
/// all interior breakpoints against the previous vector, applies the
/// proposals at once (a proposal that would break strict ordering against an
/// already-accepted left neighbor reverts to its old position), refits, and
/// tracks the best vector seen. Returns the refit of that best vector, not
/// of the final one.
pub fn greedy_fit(
    ds: &Dataset,
    init: &BreakpointVector,
    degree: usize,
    opts: &GreedyOptions,
) -> Result<(PiecewiseModel, BreakpointVector, SearchTrace)> {
    if opts.min_seg_points == 0 {
        return Err(Error::InvalidParameter(
            "min_seg_points must be at least 1".into(),
        ));
    }
    let (init_model, init_mse) = fit_piecewise(ds, init, degree)?;
    let mut best_interior = init.interior().to_vec();
    let mut best_mse = init_mse;
    let mut best_model = init_model;

    let mut visited: HashSet<Vec<u64>> = HashSet::new();
    visited.insert(bit_key(init.interior()));

    let mut iterations = vec![IterationRecord {
        interior: init.interior().to_vec(),
        mse: init_mse,
        moves: 0,
        best_mse: init_mse,
    }];
    let mut termination = TerminationReason::MaxIterations;
    let mut prev = init.clone();

    for _ in 0..opts.max_iterations {
        if prev.interior().is_empty() {
            termination = TerminationReason::NoMoves;
            break;
        }
        let part = partition(ds, &prev)?;
        let propose_for = |t: usize| -> Result<f64> {
            let window = part.segment_range(t).start..part.segment_range(t + 1).end;
            let (wxs, wys) = ds.slice(window.start, window.end);
            propose_split(wxs, wys, prev.interior()[t], degree, opts.min_seg_points)
        };
        let boundary_count = prev.interior().len();
        let proposals: Vec<Result<f64>> = if opts.parallel {
            (0..boundary_count)
                .into_par_iter()
                .map(propose_for)
                .collect()
        } else {
            (0..boundary_count).map(propose_for).collect()
        };
        let mut resolved = Vec::with_capacity(boundary_count);
        for p in proposals {
            resolved.push(p?);
        }
        // Simultaneous application: a proposal colliding with the accepted
        // position of its left neighbor reverts, which restores strict
        // ordering because old positions always clear accepted ones.
        let mut prev_accepted = prev.left_end();
        for (t, slot) in resolved.iter_mut().enumerate() {
            if *slot <= prev_accepted {
                *slot = prev.interior()[t];
            }
            prev_accepted = *slot;
        }
        let moves = resolved
            .iter()
            .zip(prev.interior())
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count();
        if moves == 0 {
            termination = TerminationReason::NoMoves;
            break;
        }
        let next = prev.with_interior(resolved)?;
        let (model, mse) = fit_piecewise(ds, &next, degree)?;
        if mse < best_mse {
            best_mse = mse;
            best_interior = next.interior().to_vec();
            best_model = model;
        }
        iterations.push(IterationRecord {
            interior: next.interior().to_vec(),
            mse,
            moves,
            best_mse,
        });
        if !visited.insert(bit_key(next.interior())) {
            termination = TerminationReason::CycleDetected;
            break;
        }
        prev = next;
    }

    let best_bp = prev.with_interior(best_interior.clone())?;
    let trace = SearchTrace {
        iterations,
        termination,
        best_interior,
        best_mse,
    };
    Ok((best_model, best_bp, trace))
}

/// Initial breakpoints at the empirical quantiles of x, snapped to the
/// candidate grid. Snapping collisions advance to the next free candidate,
/// so the result is always strictly increasing.
pub fn uniform_init(ds: &Dataset, segments: usize) -> Result<BreakpointVector> {
    if segments == 0 {
        return Err(Error::InvalidParameter("need at least one segment".into()));
    }
    if segments == 1 {
        return BreakpointVector::for_dataset(ds, vec![]);
    }
    let cands = candidate_set(ds)?;
    if segments - 1 > cands.len() {
        return Err(Error::InvalidParameter(format!(
            "{} breakpoints requested but only {} candidate positions exist",
            segments - 1,
            cands.len()
        )));
    }
    let xs = ds.xs();
    let n = xs.len();
    let mut chosen = Vec::with_capacity(segments - 1);
    let mut next_free = 0usize;
    for j in 1..segments {
        // Type-7 empirical quantile of the abscissae at probability j / k.
        let h = (n - 1) as f64 * j as f64 / segments as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let q = if lo + 1 < n {
            xs[lo] + frac * (xs[lo + 1] - xs[lo])
        } else {
            xs[n - 1]
        };
        let idx = cands.nearest_index(q).max(next_free);
        if idx >= cands.len() {
            return Err(Error::InvalidParameter(format!(
                "quantile initialization ran out of candidates at breakpoint {j}"
            )));
        }
        chosen.push(cands.values()[idx]);
        next_free = idx + 1;
    }
    BreakpointVector::for_dataset(ds, chosen)
}

/// Initial breakpoints drawn uniformly without replacement from the
/// candidate grid, reproducible from `seed`.
pub fn random_init(ds: &Dataset, segments: usize, seed: u64) -> Result<BreakpointVector> {
    if segments == 0 {
        return Err(Error::InvalidParameter("need at least one segment".into()));
    }
    if segments == 1 {
        return BreakpointVector::for_dataset(ds, vec![]);
    }
    let cands = candidate_set(ds)?;
    let len = cands.len();
    if segments - 1 > len {
        return Err(Error::InvalidParameter(format!(
            "{} breakpoints requested but only {len} candidate positions exist",
            segments - 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first k - 1 slots become the sample.
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..segments - 1 {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    let mut chosen: Vec<usize> = idx[..segments - 1].to_vec();
    chosen.sort_unstable();
    let interior = chosen.into_iter().map(|i| cands.values()[i]).collect();
    BreakpointVector::for_dataset(ds, interior)
}

fn binomial_capped(n: usize, r: usize, cap: f64) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0f64;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
        if acc > cap {
            return f64::INFINITY;
        }
    }
    acc
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if idx[i] != i + n - r {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact minimum-MSE breakpoints by enumerating every size `k - 1` subset of
/// the candidate grid. Refuses to start when the subset count exceeds
/// `size_guard`. Combinations are visited in lexicographic order and only a
/// strictly better MSE replaces the incumbent, so ties resolve to the
/// lexicographically smallest vector. Configurations whose fit is singular
/// are skipped.
pub fn exhaustive_oracle(
    ds: &Dataset,
    segments: usize,
    degree: usize,
    size_guard: u64,
) -> Result<(BreakpointVector, f64)> {
    if segments == 0 {
        return Err(Error::InvalidParameter("need at least one segment".into()));
    }
    let r = segments - 1;
    if r == 0 {
        let bp = BreakpointVector::for_dataset(ds, vec![])?;
        let (_, mse) = fit_piecewise(ds, &bp, degree)?;
        return Ok((bp, mse));
    }
    let cands = candidate_set(ds)?;
    if r > cands.len() {
        return Err(Error::InvalidParameter(format!(
            "{r} breakpoints requested but only {} candidate positions exist",
            cands.len()
        )));
    }
    let count = binomial_capped(cands.len(), r, size_guard as f64);
    if count > size_guard as f64 {
        return Err(Error::TooLarge(format!(
            "C({}, {r}) subsets exceed the guard of {size_guard}",
            cands.len()
        )));
    }
    let mut idx: Vec<usize> = (0..r).collect();
    let mut best: Option<(BreakpointVector, f64)> = None;
    loop {
        let interior: Vec<f64> = idx.iter().map(|&i| cands.values()[i]).collect();
        let bp = BreakpointVector::for_dataset(ds, interior)?;
        if let Ok((_, mse)) = fit_piecewise(ds, &bp, degree) {
            if best.as_ref().map_or(true, |(_, b)| mse < *b) {
                best = Some((bp, mse));
            }
        }
        if !next_combination(&mut idx, cands.len()) {
            break;
        }
    }
    best.ok_or_else(|| Error::Infeasible("every breakpoint subset was singular".into()))
}

/// All-pairs unconstrained segment SSE over the boundary grid, plus the
/// suffix dynamic program used for admissible lower bounds.
struct BoundTables {
    /// Cut positions: entry 0 is the data start, entries `1..=c` the
    /// candidate cuts, the last entry the data end.
    pos: Vec<usize>,
    /// `sse[i * width + j]`: unconstrained SSE of the segment from boundary
    /// i to boundary j, slightly deflated so it never exceeds the truth.
    sse: Vec<f64>,
    /// `dp[r][i]`: minimum total unconstrained SSE covering boundary i to
    /// the end with r segments split on the candidate grid.
    dp: Vec<Vec<f64>>,
    width: usize,
}

impl BoundTables {
    fn segment_sse_between(&self, i: usize, j: usize) -> f64 {
        self.sse[i * self.width + j]
    }
}

fn build_bound_tables(
    u: &[f64],
    ys: &[f64],
    cand_pos: &[usize],
    degree: usize,
    segments: usize,
) -> BoundTables {
    let n = u.len();
    let p = degree + 1;
    // Prefix power sums for O(p^2) segment Gram matrices.
    let mut upow = vec![vec![0.0f64; n + 1]; 2 * degree + 1];
    let mut uy = vec![vec![0.0f64; n + 1]; p];
    let mut y2 = vec![0.0f64; n + 1];
    for i in 0..n {
        let mut pw = 1.0;
        for s in 0..=2 * degree {
            upow[s][i + 1] = upow[s][i] + pw;
            if s < p {
                uy[s][i + 1] = uy[s][i] + pw * ys[i];
            }
            pw *= u[i];
        }
        y2[i + 1] = y2[i] + ys[i] * ys[i];
    }

    let mut pos = Vec::with_capacity(cand_pos.len() + 2);
    pos.push(0);
    pos.extend_from_slice(cand_pos);
    pos.push(n);
    let width = pos.len();

    let seg = |a: usize, b: usize| -> f64 {
        let m = b - a;
        if m <= degree {
            // Interpolation territory; zero is a valid lower bound even
            // with duplicate abscissae.
            return 0.0;
        }
        let mut g = DMatrix::zeros(p, p);
        for r in 0..p {
            for c in 0..p {
                g[(r, c)] = upow[r + c][b] - upow[r + c][a];
            }
        }
        let mut rhs = DVector::zeros(p);
        for r in 0..p {
            rhs[r] = uy[r][b] - uy[r][a];
        }
        let y2_span = y2[b] - y2[a];
        let sse = match Cholesky::new(g) {
            Some(ch) => {
                let coef = ch.solve(&rhs);
                y2_span - rhs.dot(&coef)
            }
            // Semidefinite Gram matrix (for example duplicate abscissae):
            // fall back to the trivial bound.
            None => 0.0,
        };
        (sse - 1e-9 * (y2_span + 1.0)).max(0.0)
    };

    let mut sse = vec![f64::INFINITY; width * width];
    for i in 0..width {
        for j in i + 1..width {
            sse[i * width + j] = seg(pos[i], pos[j]);
        }
    }

    // dp[r][i]: cover pos[i]..n with r segments, splits at boundaries
    // i+1..width-1. dp[0] is unused.
    let mut dp = vec![vec![f64::INFINITY; width]; segments + 1];
    for i in 0..width - 1 {
        dp[1][i] = sse[i * width + width - 1];
    }
    for r in 2..=segments {
        for i in 0..width - 1 {
            let mut best = f64::INFINITY;
            for j in i + 1..width - 1 {
                if n - pos[j] < r - 1 {
                    break;
                }
                let v = sse[i * width + j] + dp[r - 1][j];
                if v < best {
                    best = v;
                }
            }
            dp[r][i] = best;
        }
    }

    BoundTables {
        pos,
        sse,
        dp,
        width,
    }
}

struct BnbState<'a> {
    u: &'a [f64],
    ys: &'a [f64],
    cand_u: &'a [f64],
    degree: usize,
    segments: usize,
    tables: &'a BoundTables,
    budget: u64,
    nodes: u64,
    incumbent_sse: f64,
    incumbent: Option<Vec<usize>>,
}

impl BnbState<'_> {
    fn charge(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::TooLarge(format!(
                "branch and bound exceeded its node budget of {}",
                self.budget
            )));
        }
        Ok(())
    }

    /// Constrained SSE of a full split, or infinity when singular.
    fn leaf_sse(&mut self, chosen: &[usize]) -> Result<f64> {
        self.charge()?;
        let n = self.u.len();
        let mut cuts = Vec::with_capacity(chosen.len() + 2);
        cuts.push(0);
        cuts.extend(chosen.iter().map(|&c| self.tables.pos[c + 1]));
        cuts.push(n);
        let interior: Vec<f64> = chosen.iter().map(|&c| self.cand_u[c]).collect();
        Ok(
            solve_sse_scaled(self.u, self.ys, &cuts, &interior, self.degree)
                .unwrap_or(f64::INFINITY),
        )
    }

    fn offer_leaf(&mut self, chosen: &[usize]) -> Result<()> {
        let sse = self.leaf_sse(chosen)?;
        if sse < self.incumbent_sse {
            self.incumbent_sse = sse;
            self.incumbent = Some(chosen.to_vec());
        }
        Ok(())
    }

    /// `prefix_sse` accumulates the (deflated) unconstrained SSE of the
    /// segments already fixed by `chosen`; together with the suffix DP it
    /// lower-bounds every constrained completion of the partial split.
    fn dfs(&mut self, chosen: &mut Vec<usize>, first_cand: usize, prefix_sse: f64) -> Result<()> {
        let level = chosen.len();
        let splits = self.segments - 1;
        if level == splits {
            return self.offer_leaf(chosen);
        }
        let remaining = self.segments - level;
        let n = self.u.len();
        let cand_count = self.tables.width - 2;
        let prev_boundary = if level == 0 { 0 } else { chosen[level - 1] + 1 };
        let mut children: Vec<(f64, f64, usize)> = Vec::new();
        for c in first_cand..cand_count {
            let boundary = c + 1;
            if n - self.tables.pos[boundary] < remaining - 1 {
                break;
            }
            self.charge()?;
            let step = prefix_sse + self.tables.segment_sse_between(prev_boundary, boundary);
            let bound = step + self.tables.dp[remaining - 1][boundary];
            if bound < self.incumbent_sse {
                children.push((bound, step, c));
            }
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (bound, step, c) in children {
            // Earlier siblings may have tightened the incumbent since this
            // bound was computed.
            if bound >= self.incumbent_sse {
                continue;
            }
            chosen.push(c);
            self.dfs(chosen, c + 1, step)?;
            chosen.pop();
        }
        Ok(())
    }
}

/// Exact global optimum over the candidate grid, computed by depth-first
/// branch and bound. The bound for a partial split is the unconstrained SSE
/// of its fixed segments plus a dynamic-program lower bound for the
/// remainder, both of which underestimate the constrained objective, so no
/// optimum is ever pruned; the result equals [`exhaustive_oracle`] wherever
/// the latter is feasible. `warm_start` seeds the incumbent (any known good
/// vector, typically a greedy result); `node_budget` caps the search.
pub fn branch_and_bound_optimum(
    ds: &Dataset,
    segments: usize,
    degree: usize,
    warm_start: Option<(&BreakpointVector, f64)>,
    node_budget: u64,
) -> Result<(BreakpointVector, f64)> {
    if segments == 0 {
        return Err(Error::InvalidParameter("need at least one segment".into()));
    }
    if segments == 1 {
        let bp = BreakpointVector::for_dataset(ds, vec![])?;
        let (_, mse) = fit_piecewise(ds, &bp, degree)?;
        return Ok((bp, mse));
    }
    let cands = candidate_set(ds)?;
    let splits = segments - 1;
    if splits > cands.len() {
        return Err(Error::InvalidParameter(format!(
            "{splits} breakpoints requested but only {} candidate positions exist",
            cands.len()
        )));
    }
    let n = ds.len();
    let scaling = Scaling::from_xs(ds.xs());
    let u: Vec<f64> = ds.xs().iter().map(|&x| scaling.to_internal(x)).collect();
    let cand_u: Vec<f64> = cands.values().iter().map(|&x| scaling.to_internal(x)).collect();
    let xs = ds.xs();
    let cand_pos: Vec<usize> = cands
        .values()
        .iter()
        .map(|&c| xs.partition_point(|&x| x < c))
        .collect();
    let tables = build_bound_tables(&u, ds.ys(), &cand_pos, degree, segments);

    let mut state = BnbState {
        u: &u,
        ys: ds.ys(),
        cand_u: &cand_u,
        degree,
        segments,
        tables: &tables,
        budget: node_budget,
        nodes: 0,
        incumbent_sse: f64::INFINITY,
        incumbent: None,
    };

    // Warm incumbents: the caller's vector and the unconstrained DP optimum.
    let mut warm_interior: Option<Vec<f64>> = None;
    if let Some((bp, mse)) = warm_start {
        let sse = mse * n as f64;
        if sse < state.incumbent_sse {
            state.incumbent_sse = sse;
            warm_interior = Some(bp.interior().to_vec());
        }
    }
    if let Some(path) = dp_argmin_path(&tables, segments, n) {
        state.offer_leaf(&path)?;
    }

    let mut chosen = Vec::with_capacity(splits);
    state.dfs(&mut chosen, 0, 0.0)?;

    let (interior, sse) = match state.incumbent {
        Some(c) => (
            c.iter().map(|&i| cands.values()[i]).collect::<Vec<f64>>(),
            state.incumbent_sse,
        ),
        None => match warm_interior {
            Some(w) => (w, state.incumbent_sse),
            None => {
                return Err(Error::Infeasible(
                    "every breakpoint subset was singular".into(),
                ))
            }
        },
    };
    let bp = BreakpointVector::for_dataset(ds, interior)?;
    Ok((bp, sse / n as f64))
}

/// Follows the DP argmin to one unconstrained-optimal split, used as a warm
/// incumbent. Returns candidate indices.
fn dp_argmin_path(tables: &BoundTables, segments: usize, n: usize) -> Option<Vec<usize>> {
    let mut path = Vec::with_capacity(segments - 1);
    let mut at = 0usize;
    for rem in (2..=segments).rev() {
        let mut best = f64::INFINITY;
        let mut arg = None;
        for j in at + 1..tables.width - 1 {
            if n - tables.pos[j] < rem - 1 {
                break;
            }
            let v = tables.segment_sse_between(at, j) + tables.dp[rem - 1][j];
            if v < best {
                best = v;
                arg = Some(j);
            }
        }
        let j = arg?;
        path.push(j - 1);
        at = j;
    }
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ds_from(xs: Vec<f64>) -> Dataset {
        let ys = xs.iter().map(|&x| (x * 0.9).sin()).collect();
        Dataset::new(xs, ys).unwrap()
    }

    fn kink_dataset(n: usize, kink: f64) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (x - kink).abs()).collect();
        Dataset::new(xs, ys).unwrap()
    }

    #[test]
    fn candidates_are_gap_midpoints() {
        let d = ds_from(vec![1.0, 2.0, 4.0]);
        let c = candidate_set(&d).unwrap();
        assert_eq!(c.values(), &[1.5, 3.0]);
    }

    #[test]
    fn duplicate_abscissae_contribute_no_candidate() {
        let d = ds_from(vec![1.0, 2.0, 2.0, 4.0]);
        let c = candidate_set(&d).unwrap();
        assert_eq!(c.values(), &[1.5, 3.0]);
    }

    #[test]
    fn two_distinct_points_give_one_candidate() {
        let d = ds_from(vec![3.0, 5.0]);
        let c = candidate_set(&d).unwrap();
        assert_eq!(c.values(), &[4.0]);
    }

    #[test]
    fn identical_abscissae_have_no_candidates() {
        let d = Dataset::new(vec![2.0, 2.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(candidate_set(&d), Err(Error::NoCandidates(_))));
    }

    #[test]
    fn adjacent_floats_snap_onto_a_datum_and_are_dropped() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let d = Dataset::new(vec![a, b], vec![0.0, 1.0]).unwrap();
        assert!(matches!(candidate_set(&d), Err(Error::NoCandidates(_))));
    }

    #[test]
    fn nearest_index_prefers_lower_on_ties() {
        let d = ds_from(vec![0.0, 1.0, 2.0, 3.0]);
        let c = candidate_set(&d).unwrap(); // 0.5, 1.5, 2.5
        assert_eq!(c.nearest_index(1.0), 0);
        assert_eq!(c.nearest_index(1.4), 1);
        assert_eq!(c.nearest_index(-5.0), 0);
        assert_eq!(c.nearest_index(5.0), 2);
    }

    #[test]
    fn neighbor_triple_with_two_points_each_side() {
        let d = ds_from(vec![2.0, 4.0, 6.0, 8.0]);
        let bp = BreakpointVector::for_dataset(&d, vec![5.0]).unwrap();
        let part = partition(&d, &bp).unwrap();
        let t = neighbor_candidates(&d, &part, 0);
        assert_eq!(t.lower, Some(3.0));
        assert_eq!(t.current, Some(5.0));
        assert_eq!(t.upper, Some(7.0));
    }

    #[test]
    fn neighbor_triple_misses_lower_on_singleton_left() {
        let d = ds_from(vec![4.0, 6.0, 8.0]);
        let bp = BreakpointVector::for_dataset(&d, vec![5.0]).unwrap();
        let part = partition(&d, &bp).unwrap();
        let t = neighbor_candidates(&d, &part, 0);
        assert_eq!(t.lower, None);
        assert_eq!(t.current, Some(5.0));
        assert_eq!(t.upper, Some(7.0));
    }

    #[test]
    fn neighbor_triple_misses_upper_on_singleton_right() {
        let d = ds_from(vec![2.0, 4.0, 6.0]);
        let bp = BreakpointVector::for_dataset(&d, vec![5.0]).unwrap();
        let part = partition(&d, &bp).unwrap();
        let t = neighbor_candidates(&d, &part, 0);
        assert_eq!(t.lower, Some(3.0));
        assert_eq!(t.current, Some(5.0));
        assert_eq!(t.upper, None);
    }

    #[test]
    fn update_moves_toward_a_perfect_kink() {
        let d = kink_dataset(8, 3.5);
        let new = update_single_breakpoint(d.xs(), d.ys(), [0.0, 2.5, 7.0], 1, 1).unwrap();
        assert_eq!(new, 3.5);
    }

    #[test]
    fn update_stays_on_the_optimum() {
        let d = kink_dataset(8, 3.5);
        let new = update_single_breakpoint(d.xs(), d.ys(), [0.0, 3.5, 7.0], 1, 1).unwrap();
        assert_eq!(new, 3.5);
    }

    #[test]
    fn min_seg_points_blocks_an_otherwise_winning_move() {
        // Kink at 0.5: only the lower neighbor reaches it, and that leaves
        // one point on the left.
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (x - 0.5f64).abs()).collect();
        let unrestricted =
            update_single_breakpoint(&xs, &ys, [0.0, 1.5, 5.0], 1, 1).unwrap();
        assert_eq!(unrestricted, 0.5);
        let restricted = update_single_breakpoint(&xs, &ys, [0.0, 1.5, 5.0], 1, 2).unwrap();
        assert_ne!(restricted, 0.5);
    }

    #[test]
    fn all_infeasible_snaps_to_current_midpoint() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 0.0, 1.0];
        // Every move violates min_seg_points = 3; the breakpoint still
        // snaps to the midpoint of the pair it separates.
        let new = update_single_breakpoint(&xs, &ys, [0.0, 1.7, 3.0], 1, 3).unwrap();
        assert_eq!(new, 1.5);
    }

    #[test]
    fn update_rejects_disordered_triple() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0, 2.0];
        let err = update_single_breakpoint(&xs, &ys, [2.0, 1.0, 3.0], 1, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidBreakpoints(_)));
    }

    #[test]
    fn greedy_recovers_a_noiseless_kink() {
        let d = kink_dataset(10, 4.5);
        let init = BreakpointVector::for_dataset(&d, vec![1.5]).unwrap();
        let (model, bp, trace) = greedy_fit(&d, &init, 1, &GreedyOptions::default()).unwrap();
        assert_eq!(bp.interior(), &[4.5]);
        assert!(trace.best_mse < 1e-16);
        assert_eq!(trace.termination, TerminationReason::NoMoves);
        assert_relative_eq!(model.predict(4.5), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn greedy_never_loses_to_its_initialization() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (x - 7.0).abs() - 0.5 * (x - 13.0).abs() + 0.3 * (5.0 * x).sin())
            .collect();
        let d = Dataset::new(xs, ys).unwrap();
        let init = BreakpointVector::for_dataset(&d, vec![2.25, 4.75, 16.25]).unwrap();
        let (_, _, trace) = greedy_fit(&d, &init, 1, &GreedyOptions::default()).unwrap();
        assert!(trace.best_mse <= trace.initial_mse());
        assert!(trace.iterations.len() <= 201);
    }

    #[test]
    fn greedy_handles_a_single_segment() {
        let d = kink_dataset(6, 2.5);
        let init = BreakpointVector::for_dataset(&d, vec![]).unwrap();
        let (_, bp, trace) = greedy_fit(&d, &init, 1, &GreedyOptions::default()).unwrap();
        assert!(bp.interior().is_empty());
        assert_eq!(trace.termination, TerminationReason::NoMoves);
        assert_eq!(trace.iterations.len(), 1);
    }

    #[test]
    fn parallel_sweep_reproduces_the_sequential_trace() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (x - 5.0).abs() + 0.7 * (x - 11.0).abs() + 0.2 * (3.1 * x).sin())
            .collect();
        let d = Dataset::new(xs, ys).unwrap();
        let init = uniform_init(&d, 4).unwrap();
        let mut opts = GreedyOptions::default();
        let (_, bp_seq, tr_seq) = greedy_fit(&d, &init, 1, &opts).unwrap();
        opts.parallel = true;
        let (_, bp_par, tr_par) = greedy_fit(&d, &init, 1, &opts).unwrap();
        assert_eq!(bp_seq, bp_par);
        assert_eq!(tr_seq, tr_par);
    }

    #[test]
    fn uniform_init_spreads_breakpoints_in_order() {
        let d = ds_from((0..20).map(|i| i as f64).collect());
        let bp = uniform_init(&d, 4).unwrap();
        assert_eq!(bp.interior().len(), 3);
        for w in bp.interior().windows(2) {
            assert!(w[0] < w[1]);
        }
        // Quantiles of an even grid sit near the thirds.
        assert_relative_eq!(bp.interior()[1], 9.5, epsilon = 1.0);
    }

    #[test]
    fn uniform_init_survives_heavy_duplication() {
        // Only three distinct abscissae; quantiles collide and must fan out.
        let xs = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0];
        let ys = vec![0.0; 8];
        let d = Dataset::new(xs, ys).unwrap();
        let bp = uniform_init(&d, 3).unwrap();
        assert_eq!(bp.interior(), &[0.5, 1.5]);
    }

    #[test]
    fn random_init_is_reproducible_and_sorted() {
        let d = ds_from((0..30).map(|i| i as f64).collect());
        let a = random_init(&d, 5, 99).unwrap();
        let b = random_init(&d, 5, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.interior().len(), 4);
        for w in a.interior().windows(2) {
            assert!(w[0] < w[1]);
        }
        let c = random_init(&d, 5, 100).unwrap();
        assert_ne!(a.interior(), c.interior());
    }

    #[test]
    fn exhaustive_finds_the_noiseless_kink() {
        let d = kink_dataset(10, 4.5);
        let (bp, mse) = exhaustive_oracle(&d, 2, 1, DEFAULT_SIZE_GUARD).unwrap();
        assert_eq!(bp.interior(), &[4.5]);
        assert!(mse < 1e-16);
    }

    #[test]
    fn exhaustive_respects_the_size_guard() {
        let d = kink_dataset(30, 10.5);
        let err = exhaustive_oracle(&d, 4, 1, 10).unwrap_err();
        assert!(matches!(err, Error::TooLarge(_)));
    }

    #[test]
    fn exhaustive_rejects_impossible_requests() {
        let d = kink_dataset(4, 1.5);
        let err = exhaustive_oracle(&d, 5, 1, DEFAULT_SIZE_GUARD).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn exhaustive_never_loses_to_greedy() {
        let xs: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (x - 4.2).abs() + 0.4 * (2.3 * x).sin())
            .collect();
        let d = Dataset::new(xs, ys).unwrap();
        let (_, oracle_mse) = exhaustive_oracle(&d, 3, 1, DEFAULT_SIZE_GUARD).unwrap();
        for init_interior in [vec![1.5, 2.5], vec![6.5, 11.5], vec![3.5, 12.5]] {
            let init = BreakpointVector::for_dataset(&d, init_interior).unwrap();
            let (_, _, trace) = greedy_fit(&d, &init, 1, &GreedyOptions::default()).unwrap();
            assert!(oracle_mse <= trace.best_mse + 1e-12);
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration() {
        let xs: Vec<f64> = (0..18).map(|i| i as f64 * 0.7).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 0.5 * (x - 3.0).abs() - (x - 8.0).abs() + 0.3 * (1.9 * x).cos())
            .collect();
        let d = Dataset::new(xs, ys).unwrap();
        for k in 2..=4 {
            let (_, ex_mse) = exhaustive_oracle(&d, k, 1, DEFAULT_SIZE_GUARD).unwrap();
            let (bb_bp, bb_mse) =
                branch_and_bound_optimum(&d, k, 1, None, DEFAULT_NODE_BUDGET).unwrap();
            assert_relative_eq!(ex_mse, bb_mse, epsilon = 1e-10, max_relative = 1e-10);
            // The reported vector really achieves the reported value.
            let (_, refit) = fit_piecewise(&d, &bb_bp, 1).unwrap();
            assert_relative_eq!(refit, bb_mse, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn branch_and_bound_respects_its_budget() {
        let d = kink_dataset(60, 20.5);
        let err = branch_and_bound_optimum(&d, 4, 1, None, 3).unwrap_err();
        assert!(matches!(err, Error::TooLarge(_)));
    }
}
