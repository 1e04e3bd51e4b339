//! Invariant checks over randomized inputs.

use proptest::prelude::*;
use pwreg::{
    candidate_set, fit_piecewise, greedy_fit, partition, select_breakpoints,
    update_single_breakpoint, BreakpointVector, Dataset, GreedyOptions, SelectionOptions,
    StopReason, TerminationReason,
};

/// Datasets with distinct integer abscissae, so the candidate grid is the
/// half-integers and never collides with a datum.
fn integer_dataset(min_n: usize, max_n: usize) -> impl Strategy<Value = Dataset> {
    (min_n..=max_n)
        .prop_flat_map(|n| {
            (
                proptest::collection::btree_set(-60i32..60, n),
                proptest::collection::vec(-8.0f64..8.0, n),
            )
        })
        .prop_map(|(xs, ys)| {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            Dataset::new(xs, ys).unwrap()
        })
}

/// A dataset plus a strictly increasing interior subset of its candidates.
fn dataset_with_interior(max_k: usize) -> impl Strategy<Value = (Dataset, Vec<f64>)> {
    integer_dataset(8, 32).prop_flat_map(move |ds| {
        let cands = candidate_set(&ds).unwrap().values().to_vec();
        let upper = max_k.min(cands.len());
        proptest::sample::subsequence(cands, 0..=upper)
            .prop_map(move |interior| (ds.clone(), interior))
    })
}

proptest! {
    #[test]
    fn dataset_sorts_and_preserves_pairs(
        raw in proptest::collection::vec((-50i32..50, -9.0f64..9.0), 2..40)
    ) {
        let xs: Vec<f64> = raw.iter().map(|&(x, _)| f64::from(x)).collect();
        let ys: Vec<f64> = raw.iter().map(|&(_, y)| y).collect();
        let ds = Dataset::new(xs.clone(), ys.clone()).unwrap();
        prop_assert!(ds.xs().windows(2).all(|w| w[0] <= w[1]));
        let mut got: Vec<(f64, f64)> = ds.xs().iter().copied().zip(ds.ys().iter().copied()).collect();
        let mut want: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(got, want);
    }

    #[test]
    fn partition_covers_every_point_exactly_once((ds, interior) in dataset_with_interior(4)) {
        let bp = BreakpointVector::for_dataset(&ds, interior).unwrap();
        let part = partition(&ds, &bp).unwrap();
        let mut covered = 0usize;
        for j in 0..part.segment_count() {
            let range = part.segment_range(j);
            prop_assert_eq!(range.start, covered);
            prop_assert!(range.end > range.start, "segment {} empty", j);
            for i in range.clone() {
                let x = ds.xs()[i];
                if j > 0 {
                    prop_assert!(x > bp.interior()[j - 1]);
                }
                if j < bp.interior().len() {
                    prop_assert!(x < bp.interior()[j]);
                }
            }
            covered = range.end;
        }
        prop_assert_eq!(covered, ds.len());
    }

    #[test]
    fn candidates_lie_strictly_between_data((ds, _) in dataset_with_interior(0)) {
        let cands = candidate_set(&ds).unwrap();
        let values = cands.values();
        prop_assert!(values.windows(2).all(|w| w[0] < w[1]));
        for &c in values {
            let right = ds.xs().partition_point(|&x| x < c);
            prop_assert!(right > 0 && right < ds.len());
            prop_assert!(ds.xs()[right - 1] < c && c < ds.xs()[right]);
        }
    }

    #[test]
    fn fits_are_continuous_and_stationary((ds, interior) in dataset_with_interior(3)) {
        let bp = BreakpointVector::for_dataset(&ds, interior).unwrap();
        let fit = fit_piecewise(&ds, &bp, 2);
        prop_assume!(fit.is_ok());
        let (model, mse) = fit.unwrap();

        let scale = ds.ys().iter().fold(0.0f64, |a, &y| a.max(y.abs()));
        prop_assert!(model.continuity_residual() <= 1e-8 * (1.0 + scale));

        let yhat = model.predict_many(ds.xs());
        let direct: f64 = ds
            .ys()
            .iter()
            .zip(&yhat)
            .map(|(&y, &p)| (y - p) * (y - p))
            .sum::<f64>() / ds.len() as f64;
        prop_assert!((direct - mse).abs() <= 1e-12 * (1.0 + mse));

        // Any continuous perturbation must not lower the squared error:
        // global monomials and hinges at the interior breakpoints span the
        // feasible directions for value-continuity constraints.
        let sse = mse * ds.len() as f64;
        let mut directions: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|_| 1.0),
            Box::new(|x| x),
            Box::new(|x| x * x),
        ];
        for &b in bp.interior() {
            directions.push(Box::new(move |x| (x - b).max(0.0)));
            directions.push(Box::new(move |x| {
                let h = (x - b).max(0.0);
                h * h
            }));
        }
        for dir in &directions {
            for eps in [1e-3, -1e-3] {
                let perturbed: f64 = ds
                    .xs()
                    .iter()
                    .zip(ds.ys())
                    .map(|(&x, &y)| {
                        let e = y - (model.predict(x) + eps * dir(x));
                        e * e
                    })
                    .sum();
                prop_assert!(perturbed >= sse - 1e-9 * (1.0 + sse));
            }
        }
    }

    #[test]
    fn update_lands_on_the_window_grid((ds, _) in dataset_with_interior(0), pick in 0usize..1000) {
        let cands = candidate_set(&ds).unwrap();
        let cur = cands.values()[pick % cands.len()];
        let (lo, hi) = ds.x_range();
        let chosen = update_single_breakpoint(ds.xs(), ds.ys(), [lo - 0.5, cur, hi + 0.5], 1, 1).unwrap();
        prop_assert!(lo < chosen && chosen < hi);
        prop_assert!(cands.values().contains(&chosen), "{} off the grid", chosen);

        // The move never worsens the window loss relative to staying put.
        let stay = fit_piecewise(&ds, &BreakpointVector::for_dataset(&ds, vec![cur]).unwrap(), 1);
        let moved = fit_piecewise(&ds, &BreakpointVector::for_dataset(&ds, vec![chosen]).unwrap(), 1);
        if let (Ok((_, r_stay)), Ok((_, r_moved))) = (stay, moved) {
            prop_assert!(r_moved <= r_stay * (1.0 + 1e-9) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_improves_monotonically((ds, interior) in dataset_with_interior(3)) {
        let init = BreakpointVector::for_dataset(&ds, interior).unwrap();
        let run = greedy_fit(&ds, &init, 1, &GreedyOptions::default());
        prop_assume!(run.is_ok());
        let (_, bp, trace) = run.unwrap();

        prop_assert!(trace.best_mse <= trace.initial_mse() * (1.0 + 1e-12));
        for w in trace.iterations.windows(2) {
            prop_assert!(w[1].best_mse <= w[0].best_mse);
        }
        prop_assert!(bp.interior().windows(2).all(|w| w[0] < w[1]));
        // The first record is the initial vector; a sweep that proposes no
        // change terminates the run without adding a duplicate row.
        prop_assert_eq!(trace.iterations[0].moves, 0);
        prop_assert_eq!(&trace.iterations[0].interior, &init.interior().to_vec());
        prop_assert!(matches!(
            trace.termination,
            TerminationReason::NoMoves
                | TerminationReason::CycleDetected
                | TerminationReason::MaxIterations
        ));

        let mut par = GreedyOptions::default();
        par.parallel = true;
        let (_, bp_par, trace_par) = greedy_fit(&ds, &init, 1, &par).unwrap();
        prop_assert_eq!(bp.interior(), bp_par.interior());
        prop_assert_eq!(trace, trace_par);
    }

    #[test]
    fn selection_prunes_one_breakpoint_per_round((ds, interior) in dataset_with_interior(4)) {
        let init = BreakpointVector::for_dataset(&ds, interior).unwrap();
        let run = select_breakpoints(&ds, &init, 1, &SelectionOptions::default());
        prop_assume!(run.is_ok());
        let report = run.unwrap();

        for w in report.rounds.windows(2) {
            prop_assert_eq!(
                w[0].optimized_interior.len() - 1,
                w[1].seed_interior.len()
            );
        }
        match report.stop_reason {
            StopReason::SingleSegment => {
                prop_assert!(report.final_breakpoints.interior().is_empty());
            }
            StopReason::RatioExceedsTau => {
                let last = report.rounds.last().unwrap();
                let min = last
                    .losses
                    .iter()
                    .map(|l| l.ratio)
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(min > 1.05);
            }
            StopReason::CountAtMostMax => {
                prop_assert!(report.final_breakpoints.interior().is_empty());
            }
        }
        let last = report.rounds.last().unwrap();
        prop_assert_eq!(&last.optimized_interior, &report.final_breakpoints.interior().to_vec());
        prop_assert_eq!(last.mse, report.final_mse);
    }
}
