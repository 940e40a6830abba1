//! Sample count against conservatism and computation time on a deadlock
//! scenario.

use serde::Serialize;

use super::config::{PairScanSpec, SamplingTechnique, ScenarioConfig};
use super::sim::{run_scenario, RunOptions};
use super::ScenarioError;

/// Fraction of the run, at the end, treated as settled.
pub const SETTLED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub n_samples: usize,
    pub epsilon: f64,
    pub min_sampled_distance_at_deadlock: f64,
    pub mean_qp_time_s: f64,
    pub mean_filter_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffReport {
    /// Sorted by `epsilon`, ascending.
    pub rows: Vec<TradeoffRow>,
}

/// Config for one trade-off row: every shape grid-sampled with `n` points,
/// except shapes with their own sampler, which are scaled by `n / base_n`.
/// Distances are scanned exhaustively so timings follow the pair count.
pub fn tradeoff_variant(base: &ScenarioConfig, n: usize) -> ScenarioConfig {
    let mut cfg = base.clone();
    let base_n = base.sampler.n.max(1);
    let scale = |m: usize| ((m * n) as f64 / base_n as f64).round().max(3.0) as usize;
    cfg.sampler.technique = SamplingTechnique::Grid;
    cfg.sampler.n = n;
    let overrides = cfg
        .workspace
        .iter_mut()
        .filter_map(|w| w.sampler.as_mut())
        .chain(cfg.robot.sampler.as_mut())
        .chain(cfg.obstacles.iter_mut().filter_map(|o| o.sampler.as_mut()));
    for s in overrides {
        s.technique = SamplingTechnique::Grid;
        s.n = scale(s.n);
    }
    cfg.pair_scan = PairScanSpec::Exhaustive;
    cfg
}

/// Runs the variants one after another so timings do not overlap.
pub fn run_tradeoff(
    base: &ScenarioConfig,
    sample_counts: &[usize],
) -> Result<TradeoffReport, ScenarioError> {
    if sample_counts.is_empty() {
        return Err(ScenarioError::Validation("sample_counts is empty".into()));
    }
    let mut rows = Vec::with_capacity(sample_counts.len());
    for &n in sample_counts {
        let cfg = tradeoff_variant(base, n);
        let log = run_scenario(&cfg, RunOptions::default())?;
        let t_settle = cfg.t_end * (1.0 - SETTLED_FRACTION);
        let settled = log
            .records
            .iter()
            .filter(|r| r.t >= t_settle)
            .map(|r| r.d_sampled)
            .fold(f64::INFINITY, f64::min);
        rows.push(TradeoffRow {
            n_samples: n,
            epsilon: log.metadata.epsilon,
            min_sampled_distance_at_deadlock: settled,
            mean_qp_time_s: log.summary.mean_qp_time_s,
            mean_filter_time_s: log.summary.mean_filter_time_s(),
        });
    }
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    Ok(TradeoffReport { rows })
}
