//! Continuous piecewise polynomial regression in one dimension.
//!
//! Given scattered `(x, y)` pairs, this crate fits a piecewise polynomial
//! that is continuous across its breakpoints, and can place the breakpoints
//! itself: [`search::greedy_fit`] optimizes their positions for a fixed
//! segment count, and [`selection::select_breakpoints`] additionally decides
//! how many to keep by pruning the ones whose removal barely costs anything.
//!
//! A fit for fixed breakpoints is an equality-constrained least-squares
//! problem solved through its KKT system ([`constrained_ls`]). Breakpoint
//! positions are restricted to midpoints between consecutive data abscissae,
//! which keeps the search discrete without practical loss of flexibility.
//!
//! Everything that involves randomness (the synthetic generator, random
//! initialization) runs on a seeded ChaCha8 stream, so equal inputs produce
//! bitwise equal outputs on every platform.

pub mod breakpoints;
pub mod constrained_ls;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod search;
pub mod selection;
pub mod synthetic;

pub use breakpoints::{partition, BreakpointVector, IntervalPartition};
pub use constrained_ls::{assemble_kkt, fit_piecewise, solve_kkt};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use model::{PiecewiseModel, Scaling};
pub use search::{
    branch_and_bound_optimum, candidate_set, exhaustive_oracle, greedy_fit, random_init,
    uniform_init, update_single_breakpoint, CandidateSet, GreedyOptions, IterationRecord,
    SearchTrace, TerminationReason,
};
pub use selection::{
    removal_losses, select_breakpoints, RemovalLoss, SelectionOptions, SelectionReport,
    SelectionRound, StopReason,
};
pub use synthetic::{generate, GeneratorSpec, KnotValues, SyntheticTruth};
