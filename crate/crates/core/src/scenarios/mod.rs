//! Scenario files, the closed-loop simulator, experiment outputs and the
//! sample-count trade-off study.

mod config;
mod output;
mod sim;
mod tradeoff;

use thiserror::Error;

use crate::distance::DistanceError;
use crate::dynamics::DynamicsError;
use crate::geometry::GeometryError;
use crate::safety_filter::FilterError;
use crate::tracking::TrackingError;

pub use config::{
    build_oracle, build_scenario, load_scenario, parse_scenario, BarrierSpec, BuiltScenario,
    ClearanceOracle, ModelSpec, ObstacleSpec, PairScanSpec, RobotSpec, RobustnessConfig,
    SamplerSpec, SamplingTechnique, ScenarioConfig, ShapeCertificate, Workspace, DEFAULT_DT,
    DEFAULT_R_BAR_FRACTION, ORACLE_FACTOR,
};
pub use output::{
    emit_csv, emit_svg_plot, emit_tradeoff_csv, fmt_g12, log_csv_header, log_to_csv, log_to_svg,
    tradeoff_to_csv,
};
pub use sim::{
    run_built, run_scenario, RunMetadata, RunOptions, RunSummary, StepRecord, TrajectoryLog,
};
pub use tradeoff::{run_tradeoff, tradeoff_variant, TradeoffReport, TradeoffRow, SETTLED_FRACTION};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("state left the barrier domain at step {step} (t = {t}, b = {b}, x = {x:?})")]
    OutsideDomain {
        step: usize,
        t: f64,
        x: Vec<f64>,
        b: f64,
    },
    #[error("safety filter failed at step {step} (t = {t}, x = {x:?}): {source}")]
    Filter {
        step: usize,
        t: f64,
        x: Vec<f64>,
        source: FilterError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
}

impl ScenarioError {
    pub(crate) fn filter(
        step: usize,
        t: f64,
        x: &nalgebra::DVector<f64>,
        source: FilterError,
    ) -> Self {
        ScenarioError::Filter {
            step,
            t,
            x: x.iter().copied().collect(),
            source,
        }
    }

    /// CLI exit code: 2 for bad input, 4 for leaving the domain, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse { .. } | ScenarioError::Validation(_) => 2,
            ScenarioError::OutsideDomain { .. } => 4,
            _ => 1,
        }
    }
}

/// Exit code after a completed run: 3 if any QP was infeasible.
pub fn run_exit_code(log: &TrajectoryLog) -> i32 {
    if log.summary.infeasible_steps > 0 {
        3
    } else {
        0
    }
}
