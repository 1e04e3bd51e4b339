//! Choosing how many breakpoints to keep.
//!
//! Starting from a deliberately generous breakpoint count, each round runs
//! the greedy search, scores every interior breakpoint by how much the MSE
//! would grow without it, and drops the cheapest one. Pruning stops when
//! every removal would cost more than the tolerated ratio `tau`, or when the
//! count reaches the floor `max_interior`.

use crate::breakpoints::BreakpointVector;
use crate::constrained_ls::fit_piecewise;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::PiecewiseModel;
use crate::search::{greedy_fit, GreedyOptions, SearchTrace};
use rayon::prelude::*;

/// Relative factor on `var(y)` below which an MSE counts as exactly zero
/// when forming removal ratios.
const DENOMINATOR_EPS_FACTOR: f64 = 1e-14;

/// Removal score of one interior breakpoint: the MSE of the refit without
/// it, divided by the MSE with the full vector. A ratio of 1 marks a
/// redundant breakpoint. When the full fit is already exact, a removal that
/// stays exact scores 1 and one that breaks exactness scores infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalLoss {
    pub index: usize,
    pub ratio: f64,
    pub mse_without: f64,
}

fn population_variance(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    ys.iter().map(|&y| (y - mean) * (y - mean)).sum::<f64>() / n
}

/// Scores every interior breakpoint of `bp` by refitting without it. The
/// refits are independent and run on a thread pool; the output order is by
/// breakpoint index either way.
pub fn removal_losses(ds: &Dataset, bp: &BreakpointVector, degree: usize) -> Result<Vec<RemovalLoss>> {
    let interior = bp.interior();
    if interior.is_empty() {
        return Ok(vec![]);
    }
    let (_, mse_full) = fit_piecewise(ds, bp, degree)?;
    let eps = DENOMINATOR_EPS_FACTOR * population_variance(ds.ys());
    let refits: Vec<Result<f64>> = (0..interior.len())
        .into_par_iter()
        .map(|i| fit_piecewise(ds, &bp.without(i), degree).map(|(_, mse)| mse))
        .collect();
    let mut losses = Vec::with_capacity(interior.len());
    for (i, refit) in refits.into_iter().enumerate() {
        let mse_without = refit?;
        let ratio = if mse_full <= eps {
            if mse_without <= eps {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            mse_without / mse_full
        };
        losses.push(RemovalLoss {
            index: i,
            ratio,
            mse_without,
        });
    }
    Ok(losses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Every candidate removal would raise the MSE by more than `tau`.
    RatioExceedsTau,
    /// The interior count reached `max_interior`.
    CountAtMostMax,
    /// Pruning (or the initialization) arrived at a single segment.
    SingleSegment,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::RatioExceedsTau => "ratio_exceeds_tau",
            StopReason::CountAtMostMax => "count_at_most_max",
            StopReason::SingleSegment => "single_segment",
        }
    }
}

/// One pruning round. The greedy search ran from `seed_interior` and
/// produced `optimized_interior` with `mse`; `losses` are the removal scores
/// of the optimized vector (empty when the round stopped before scoring) and
/// `removed_index` the pruned breakpoint, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRound {
    pub seed_interior: Vec<f64>,
    pub optimized_interior: Vec<f64>,
    pub mse: f64,
    pub losses: Vec<RemovalLoss>,
    pub removed_index: Option<usize>,
    pub trace: SearchTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub rounds: Vec<SelectionRound>,
    pub final_breakpoints: BreakpointVector,
    pub final_model: PiecewiseModel,
    pub final_mse: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions {
    /// Stop when the smallest removal ratio exceeds this. Must be at least
    /// 1; infinity disables the ratio stop entirely.
    pub tau: f64,
    /// Lower bound on the interior count; pruning stops once reached.
    pub max_interior: usize,
    pub greedy: GreedyOptions,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            tau: 1.05,
            max_interior: 0,
            greedy: GreedyOptions::default(),
        }
    }
}

/// Runs the full prune-and-reoptimize loop from `init`. Each round reseeds
/// the greedy search with the previous round's optimized vector minus the
/// pruned breakpoint, exactly as produced (no re-snapping).
pub fn select_breakpoints(
    ds: &Dataset,
    init: &BreakpointVector,
    degree: usize,
    opts: &SelectionOptions,
) -> Result<SelectionReport> {
    if !(opts.tau >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must be at least 1, got {}",
            opts.tau
        )));
    }
    let mut rounds = Vec::new();
    let mut current = init.clone();
    loop {
        let seed_interior = current.interior().to_vec();
        let (model, bp_opt, trace) = greedy_fit(ds, &current, degree, &opts.greedy)?;
        let mse = trace.best_mse;
        let count = bp_opt.interior().len();

        let stop = if count == 0 {
            Some(StopReason::SingleSegment)
        } else if count <= opts.max_interior {
            Some(StopReason::CountAtMostMax)
        } else {
            None
        };
        if let Some(stop_reason) = stop {
            rounds.push(SelectionRound {
                seed_interior,
                optimized_interior: bp_opt.interior().to_vec(),
                mse,
                losses: vec![],
                removed_index: None,
                trace,
            });
            return Ok(SelectionReport {
                rounds,
                final_breakpoints: bp_opt,
                final_model: model,
                final_mse: mse,
                stop_reason,
            });
        }

        let losses = removal_losses(ds, &bp_opt, degree)?;
        // Smallest ratio wins; the earliest index breaks ties.
        let best = losses
            .iter()
            .enumerate()
            .min_by(|(ia, a), (ib, b)| a.ratio.total_cmp(&b.ratio).then(ia.cmp(ib)))
            .map(|(_, l)| l.clone())
            .expect("non-empty interior has losses");

        if best.ratio > opts.tau {
            rounds.push(SelectionRound {
                seed_interior,
                optimized_interior: bp_opt.interior().to_vec(),
                mse,
                losses,
                removed_index: None,
                trace,
            });
            return Ok(SelectionReport {
                rounds,
                final_breakpoints: bp_opt,
                final_model: model,
                final_mse: mse,
                stop_reason: StopReason::RatioExceedsTau,
            });
        }

        let next = bp_opt.without(best.index);
        rounds.push(SelectionRound {
            seed_interior,
            optimized_interior: bp_opt.interior().to_vec(),
            mse,
            losses,
            removed_index: Some(best.index),
            trace,
        });
        current = next;
    }
}
