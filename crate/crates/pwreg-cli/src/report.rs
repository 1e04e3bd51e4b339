//! The structured report the tool emits and reloads. One JSON document,
//! schema-stamped, no timestamps, so identical runs produce identical bytes.
//! Infinite removal ratios appear as `null` (JSON has no infinity).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pwreg::{
    BreakpointVector, MetricsReport, PiecewiseModel, Scaling, SearchTrace, SelectionReport,
};

use crate::commands::Failure;

pub const SCHEMA: &str = "pwreg-report/1";

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub input: InputStamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub params: Params,
    pub degree: usize,
    pub breakpoints: Breakpoints,
    /// Per-segment coefficients in ascending powers of x (user coordinates).
    pub segments: Vec<Segment>,
    pub scaling: ScalingStamp,
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InputStamp {
    pub digest: String,
    pub rows: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_breakpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_seg_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Breakpoints {
    pub left_end: f64,
    pub interior: Vec<f64>,
    pub right_end: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Segment {
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScalingStamp {
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub rae: Option<f64>,
    pub r_squared: Option<f64>,
    pub breakpoint_count: usize,
}

impl From<&MetricsReport> for Metrics {
    fn from(m: &MetricsReport) -> Self {
        Metrics {
            mse: m.mse,
            rmse: m.rmse,
            mae: m.mae,
            rae: m.rae,
            r_squared: m.r_squared,
            breakpoint_count: m.breakpoint_count,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Trace {
    pub termination: String,
    pub initial_mse: f64,
    pub best_mse: f64,
    pub total_moves: usize,
    pub iterations: Vec<Iteration>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Iteration {
    pub interior: Vec<f64>,
    pub mse: f64,
    pub moves: usize,
    pub best_mse: f64,
}

impl From<&SearchTrace> for Trace {
    fn from(t: &SearchTrace) -> Self {
        Trace {
            termination: t.termination.as_str().to_owned(),
            initial_mse: t.initial_mse(),
            best_mse: t.best_mse,
            total_moves: t.total_moves(),
            iterations: t
                .iterations
                .iter()
                .map(|r| Iteration {
                    interior: r.interior.clone(),
                    mse: r.mse,
                    moves: r.moves,
                    best_mse: r.best_mse,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Selection {
    pub stop_reason: String,
    pub rounds: Vec<Round>,
}

/// One pruning round. `ratios` scores each interior breakpoint of the
/// optimized vector; a `null` ratio stands for infinity (removal breaks an
/// exact fit). The last round has no `removed_index`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Round {
    pub seed_interior: Vec<f64>,
    pub optimized_interior: Vec<f64>,
    pub mse: f64,
    pub termination: String,
    pub sweeps: usize,
    pub ratios: Vec<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_index: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ratio {
    pub index: usize,
    pub ratio: Option<f64>,
    pub mse_without: f64,
}

impl From<&SelectionReport> for Selection {
    fn from(r: &SelectionReport) -> Self {
        Selection {
            stop_reason: r.stop_reason.as_str().to_owned(),
            rounds: r
                .rounds
                .iter()
                .map(|round| Round {
                    seed_interior: round.seed_interior.clone(),
                    optimized_interior: round.optimized_interior.clone(),
                    mse: round.mse,
                    termination: round.trace.termination.as_str().to_owned(),
                    sweeps: round.trace.iterations.len() - 1,
                    ratios: round
                        .losses
                        .iter()
                        .map(|l| Ratio {
                            index: l.index,
                            ratio: l.ratio.is_finite().then_some(l.ratio),
                            mse_without: l.mse_without,
                        })
                        .collect(),
                    removed_index: round.removed_index,
                })
                .collect(),
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut out = String::with_capacity(71);
    out.push_str("sha256:");
    for b in hash {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn breakpoints_stamp(bp: &BreakpointVector) -> Breakpoints {
    Breakpoints {
        left_end: bp.left_end(),
        interior: bp.interior().to_vec(),
        right_end: bp.right_end(),
    }
}

pub fn model_stamp(model: &PiecewiseModel) -> (Vec<Segment>, ScalingStamp) {
    let segments = model
        .coefficients()
        .iter()
        .map(|c| Segment {
            coefficients: c.clone(),
        })
        .collect();
    let scaling = ScalingStamp {
        center: model.scaling().center(),
        half_width: model.scaling().half_width(),
    };
    (segments, scaling)
}

impl ReportFile {
    /// Reconstructs the fitted model; everything needed to predict is stored
    /// in user coordinates.
    pub fn to_model(&self) -> Result<PiecewiseModel, Failure> {
        if self.schema != SCHEMA {
            return Err(Failure::Invalid(format!(
                "unsupported report schema \"{}\", expected \"{SCHEMA}\"",
                self.schema
            )));
        }
        let bp = BreakpointVector::new(
            self.breakpoints.left_end,
            self.breakpoints.interior.clone(),
            self.breakpoints.right_end,
        )?;
        let scaling = Scaling::new(self.scaling.center, self.scaling.half_width)?;
        let coefficients = self.segments.iter().map(|s| s.coefficients.clone()).collect();
        Ok(PiecewiseModel::from_parts(self.degree, bp, coefficients, scaling)?)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Failure::Internal(format!("report serialization: {e}")))?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)
            .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Failure> {
        let bytes = std::fs::read(path)
            .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let report: ReportFile = serde_json::from_slice(&bytes)
            .map_err(|e| Failure::Invalid(format!("{}: not a report file: {e}", path.display())))?;
        Ok(report)
    }
}
