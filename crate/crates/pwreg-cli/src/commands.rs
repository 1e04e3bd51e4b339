//! Command implementations and the exit-code policy: 0 success, 2 invalid
//! input or flags, 3 numerical failure, 1 internal error.

use std::path::Path;

use pwreg::{
    fit_piecewise, generate, greedy_fit, random_init, select_breakpoints, uniform_init,
    BreakpointVector, Dataset, GeneratorSpec, GreedyOptions, KnotValues, MetricsReport,
    PiecewiseModel, SelectionOptions,
};
use serde::Serialize;

use crate::cli::{Cli, Command, EvalArgs, FitArgs, GenerateArgs, InitMode, SelectArgs};
use crate::csvio::{self, LoadedCsv};
use crate::report::{
    breakpoints_stamp, digest, model_stamp, InputStamp, Metrics, Params, ReportFile, Selection,
    Trace, SCHEMA,
};

#[derive(Debug)]
pub enum Failure {
    /// Unusable input or flags.
    Invalid(String),
    /// The requested fit is numerically unsolvable.
    Numerical(String),
    /// Unexpected internal condition (I/O on outputs, serialization).
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Numerical(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<pwreg::Error> for Failure {
    fn from(e: pwreg::Error) -> Self {
        match e {
            pwreg::Error::SingularSystem(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Eval(args) => cmd_eval(&args),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Failure::Invalid(format!("{flag}: \"{t}\" is not a number")))
        })
        .collect()
}

fn load_dataset(path: &Path) -> Result<(Dataset, InputStamp), Failure> {
    let LoadedCsv { xs, ys, bytes } = csvio::read_xy(path)?;
    let ds = Dataset::new(xs, ys)?;
    let stamp = InputStamp {
        digest: digest(&bytes),
        rows: ds.len(),
    };
    Ok((ds, stamp))
}

fn initial_breakpoints(
    ds: &Dataset,
    segments: usize,
    init: InitMode,
    seed: Option<u64>,
) -> Result<BreakpointVector, Failure> {
    match init {
        InitMode::Uniform => Ok(uniform_init(ds, segments)?),
        InitMode::Random => {
            let seed = seed.ok_or_else(|| {
                Failure::Invalid("--seed is required with --init random".into())
            })?;
            Ok(random_init(ds, segments, seed)?)
        }
    }
}

fn compute_metrics(ds: &Dataset, model: &PiecewiseModel) -> Result<MetricsReport, Failure> {
    let yhat = model.predict_many(ds.xs());
    Ok(MetricsReport::compute(
        ds.ys(),
        &yhat,
        model.breakpoints().interior().len(),
    )?)
}

fn write_pred_grid(
    path: &Path,
    model: &PiecewiseModel,
    grid_points: usize,
) -> Result<(), Failure> {
    let (left, right) = (
        model.breakpoints().left_end(),
        model.breakpoints().right_end(),
    );
    let last = grid_points - 1;
    let mut xs = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let x = if i == last {
            right
        } else {
            left + (right - left) * i as f64 / last as f64
        };
        xs.push(x);
    }
    let ys = model.predict_many(&xs);
    csvio::write_xy(path, ("x", "yhat"), &xs, &ys)
}

fn base_report(
    command: &str,
    input: InputStamp,
    seed: Option<u64>,
    params: Params,
    model: &PiecewiseModel,
    metrics: &MetricsReport,
) -> ReportFile {
    let (segments, scaling) = model_stamp(model);
    ReportFile {
        schema: SCHEMA.to_owned(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        command: command.to_owned(),
        input,
        seed,
        params,
        degree: model.degree(),
        breakpoints: breakpoints_stamp(model.breakpoints()),
        segments,
        scaling,
        metrics: Metrics::from(metrics),
        trace: None,
        selection: None,
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), Failure> {
    if args.pred_grid.is_some() && args.grid_points < 2 {
        return Err(Failure::Invalid(format!(
            "--grid-points must be at least 2, got {}",
            args.grid_points
        )));
    }
    let (ds, input) = load_dataset(&args.input)?;

    let (model, trace, params) = if let Some(text) = &args.breakpoints {
        let interior = parse_f64_list(text, "--breakpoints")?;
        let bp = BreakpointVector::for_dataset(&ds, interior.clone())?;
        let (model, _) = fit_piecewise(&ds, &bp, args.degree)?;
        let params = Params {
            fixed_breakpoints: Some(interior),
            ..Params::default()
        };
        (model, None, params)
    } else {
        let segments = args.segments.expect("clap enforces the mode group");
        let init = initial_breakpoints(&ds, segments, args.init, args.seed)?;
        let opts = GreedyOptions {
            min_seg_points: args.min_seg_points.unwrap_or(args.degree + 1),
            parallel: args.parallel,
            ..GreedyOptions::default()
        };
        let (model, _, trace) = greedy_fit(&ds, &init, args.degree, &opts)?;
        let params = Params {
            segments: Some(segments),
            init: Some(args.init.as_str().to_owned()),
            min_seg_points: Some(opts.min_seg_points),
            parallel: Some(args.parallel),
            ..Params::default()
        };
        (model, Some(Trace::from(&trace)), params)
    };

    let metrics = compute_metrics(&ds, &model)?;
    let mut report = base_report("fit", input, args.seed, params, &model, &metrics);
    report.trace = trace;
    report.write(&args.out)?;

    if let Some(grid) = &args.pred_grid {
        write_pred_grid(grid, &model, args.grid_points)?;
    }
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<(), Failure> {
    let (ds, input) = load_dataset(&args.input)?;
    let init = initial_breakpoints(&ds, args.init_segments, args.init, args.seed)?;
    let opts = SelectionOptions {
        tau: args.tau,
        max_interior: args.max_bps,
        greedy: GreedyOptions {
            min_seg_points: args.min_seg_points.unwrap_or(args.degree + 1),
            parallel: args.parallel,
            ..GreedyOptions::default()
        },
    };
    let selection = select_breakpoints(&ds, &init, args.degree, &opts)?;

    let metrics = compute_metrics(&ds, &selection.final_model)?;
    let params = Params {
        init_segments: Some(args.init_segments),
        init: Some(args.init.as_str().to_owned()),
        tau: Some(args.tau),
        max_bps: Some(args.max_bps),
        min_seg_points: Some(opts.greedy.min_seg_points),
        parallel: Some(args.parallel),
        ..Params::default()
    };
    let mut report = base_report(
        "select",
        input,
        args.seed,
        params,
        &selection.final_model,
        &metrics,
    );
    report.selection = Some(Selection::from(&selection));
    report.write(&args.out)
}

#[derive(Serialize)]
struct TruthFile {
    schema: &'static str,
    knots: Vec<f64>,
    knot_values: Vec<f64>,
    noise_sigma: f64,
    n: usize,
    seed: u64,
    realized_noise_mse: f64,
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let randomized_values;
    let mut spec = if args.spec.is_some() {
        randomized_values = true;
        GeneratorSpec::standard(0)
    } else {
        let knots = parse_f64_list(args.knots.as_deref().unwrap_or(""), "--knots")?;
        let text = args.values.as_deref().expect("clap requires --values");
        let values = if let Some((lo, hi)) = text.split_once("..") {
            let parse = |t: &str| {
                t.trim().parse::<i64>().map_err(|_| {
                    Failure::Invalid(format!("--values: \"{text}\" is not lo..hi integers"))
                })
            };
            randomized_values = true;
            KnotValues::DiscreteUniform {
                lo: parse(lo)?,
                hi: parse(hi)?,
            }
        } else {
            randomized_values = false;
            KnotValues::Explicit(parse_f64_list(text, "--values")?)
        };
        GeneratorSpec {
            knots,
            values,
            noise_sigma: args.sigma.expect("clap requires --sigma"),
            n: args.n.expect("clap requires --n"),
            seed: 0,
            require_distinct_slopes: false,
        }
    };
    spec.require_distinct_slopes = args.distinct_slopes;

    let randomized = randomized_values || spec.noise_sigma > 0.0;
    spec.seed = match (args.seed, randomized) {
        (Some(s), _) => s,
        (None, false) => 0,
        (None, true) => {
            return Err(Failure::Invalid(
                "--seed is required because this recipe draws at random".into(),
            ))
        }
    };

    let (ds, truth) = generate(&spec)?;
    csvio::write_xy(&args.out, ("x", "y"), ds.xs(), ds.ys())?;

    if let Some(path) = &args.truth {
        let file = TruthFile {
            schema: "pwreg-truth/1",
            knots: truth.knots.clone(),
            knot_values: truth.knot_values.clone(),
            noise_sigma: spec.noise_sigma,
            n: spec.n,
            seed: spec.seed,
            realized_noise_mse: truth.realized_noise_mse,
        };
        let mut bytes = serde_json::to_vec_pretty(&file)
            .map_err(|e| Failure::Internal(format!("truth serialization: {e}")))?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)
            .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let (ds, _) = load_dataset(&args.data)?;
    let report = ReportFile::load(&args.report)?;
    let model = report.to_model()?;
    let metrics = compute_metrics(&ds, &model)?;
    let line = serde_json::to_string(&Metrics::from(&metrics))
        .map_err(|e| Failure::Internal(format!("metrics serialization: {e}")))?;
    println!("{line}");
    Ok(())
}
