//! Closed-loop simulation: PID, safety filter, disturbance, RK4, logging.

use std::time::Duration;

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{sample_disturbance, step_rk4, ControlAffine};
use crate::safety_filter::{prepare_filter, solve_filter_qp, FilterError};
use crate::tracking::{pid_control, tracking_diagnostic, ErrorSample, PidMemory, TrackingReport};

use super::config::{
    build_oracle, build_scenario, BuiltScenario, ScenarioConfig, ShapeCertificate,
};
use super::ScenarioError;

/// One logged step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: DVector<f64>,
    pub b: f64,
    pub u_d: DVector<f64>,
    pub u_star: DVector<f64>,
    pub modified: bool,
    pub infeasible: bool,
    pub active_count: usize,
    pub d_sampled: f64,
    pub d_oracle: Option<f64>,
    pub tracking_error: f64,
    pub qp_time: Duration,
    pub assemble_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub name: String,
    pub config_hash: String,
    pub epsilon: f64,
    pub gamma: f64,
    pub r_bar: f64,
    pub body_samples: usize,
    pub obstacle_samples: usize,
    pub body_certificate: ShapeCertificate,
    pub obstacle_certificates: Vec<ShapeCertificate>,
}

/// Statistics over every integration step, logged or not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub min_b: f64,
    /// Steps with `b < 0`.
    pub violation_steps: usize,
    pub infeasible_steps: usize,
    pub modified_steps: usize,
    pub min_d_sampled: f64,
    pub min_d_oracle: Option<f64>,
    pub mean_qp_time_s: f64,
    pub mean_assemble_time_s: f64,
    /// Largest `|u*(x_k+1) - u*(x_k)| / |x_k+1 - x_k|` seen.
    pub max_input_lipschitz_ratio: f64,
    pub final_tracking_error: f64,
}

impl RunSummary {
    /// Mean cost of one safe input: assembly plus QP.
    pub fn mean_filter_time_s(&self) -> f64 {
        self.mean_qp_time_s + self.mean_assemble_time_s
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub metadata: RunMetadata,
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    pub outlines: Vec<Vec<nalgebra::Point2<f64>>>,
    pub position_indices: [usize; 2],
}

impl TrajectoryLog {
    pub fn error_samples(&self) -> Vec<ErrorSample> {
        self.records
            .iter()
            .map(|r| ErrorSample {
                t: r.t,
                error_norm: r.tracking_error,
                modified: r.modified,
            })
            .collect()
    }

    pub fn tracking_report(&self) -> Result<TrackingReport, ScenarioError> {
        Ok(tracking_diagnostic(&self.error_samples())?)
    }

    /// Mean oracle clearance over logged steps, if the oracle was on.
    pub fn mean_oracle_clearance(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.records.iter().map(|r| r.d_oracle).collect();
        let v = v?;
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_sampled_clearance(&self) -> f64 {
        self.records.iter().map(|r| r.d_sampled).sum::<f64>() / self.records.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Evaluate the dense clearance oracle at every logged step.
    pub oracle: bool,
}

/// Runs a validated scenario to `t_end`.
///
/// Infeasible QPs apply `u_d` unchanged and are counted; leaving the barrier
/// domain aborts the run.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    opts: RunOptions,
) -> Result<TrajectoryLog, ScenarioError> {
    let built = build_scenario(cfg)?;
    run_built(cfg, &built, opts)
}

pub fn run_built(
    cfg: &ScenarioConfig,
    built: &BuiltScenario,
    opts: RunOptions,
) -> Result<TrajectoryLog, ScenarioError> {
    let model = cfg.model.build()?;
    let model: &dyn ControlAffine = model.as_ref();
    let oracle = if opts.oracle {
        Some(build_oracle(cfg)?)
    } else {
        None
    };
    let robust = cfg.robustness_spec();
    let steps = cfg.steps();
    let (body_samples, obstacle_samples) = built.sample_counts();
    let metadata = RunMetadata {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        epsilon: built.barrier.epsilon,
        gamma: built.barrier.gamma,
        r_bar: built.barrier.r_bar,
        body_samples,
        obstacle_samples,
        body_certificate: built.body_certificate.clone(),
        obstacle_certificates: built.obstacle_certificates.clone(),
    };

    let mut x = DVector::from_column_slice(&cfg.initial_state);
    let mut memory = PidMemory::default();
    let mut records = Vec::with_capacity(steps / cfg.log_every + 1);
    let mut min_b = f64::INFINITY;
    let mut min_d_sampled = f64::INFINITY;
    let mut min_d_oracle: Option<f64> = None;
    let mut violation_steps = 0;
    let mut infeasible_steps = 0;
    let mut modified_steps = 0;
    let mut qp_total = Duration::ZERO;
    let mut assemble_total = Duration::ZERO;
    let mut max_ratio = 0.0f64;
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut final_tracking_error = 0.0;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let x_d = cfg.reference.at(t);
        let (u_d, next_memory) = pid_control(&cfg.controller, model, &x, &x_d, cfg.dt, &memory)?;
        memory = next_memory;
        let tracking_error = (&x_d - &x).norm();
        final_tracking_error = tracking_error;

        let prepared = match prepare_filter(
            &x,
            t,
            &built.body,
            &built.obstacles,
            &built.barrier,
            cfg.barrier.activation_tolerance,
            model,
            &cfg.alpha,
            &robust,
        ) {
            Ok(p) => p,
            Err(FilterError::OutsideDomain { b, .. }) => {
                return Err(ScenarioError::OutsideDomain {
                    step: k,
                    t,
                    x: x.iter().copied().collect(),
                    b,
                })
            }
            Err(e) => return Err(ScenarioError::filter(k, t, &x, e)),
        };
        let (u_star, modified, infeasible, active_count, qp_time) =
            match solve_filter_qp(&u_d, &prepared.constraints) {
                Ok(r) => (
                    r.u_star,
                    r.modified,
                    false,
                    r.active_constraints.len(),
                    r.solve_time,
                ),
                Err(FilterError::Infeasible) => (u_d.clone(), false, true, 0, Duration::ZERO),
                Err(e) => return Err(ScenarioError::filter(k, t, &x, e)),
            };

        let b = prepared.b;
        let d_sampled = prepared.evaluation.min_distance();
        min_b = min_b.min(b);
        min_d_sampled = min_d_sampled.min(d_sampled);
        violation_steps += usize::from(b < 0.0);
        infeasible_steps += usize::from(infeasible);
        modified_steps += usize::from(modified);
        qp_total += qp_time;
        assemble_total += prepared.assemble_time;
        if let Some((px, pu)) = &prev {
            let dx = (&x - px).norm();
            if dx > 0.0 {
                max_ratio = max_ratio.max((&u_star - pu).norm() / dx);
            }
        }

        if k % cfg.log_every == 0 {
            let d_oracle = match &oracle {
                Some(o) => {
                    let d = o.clearance(built.body.position(&x)?);
                    min_d_oracle = Some(min_d_oracle.map_or(d, |m: f64| m.min(d)));
                    Some(d)
                }
                None => None,
            };
            records.push(StepRecord {
                t,
                x: x.clone(),
                b,
                u_d: u_d.clone(),
                u_star: u_star.clone(),
                modified,
                infeasible,
                active_count,
                d_sampled,
                d_oracle,
                tracking_error,
                qp_time,
                assemble_time: prepared.assemble_time,
            });
        }
        if k == steps {
            break;
        }

        let dist = sample_disturbance(&cfg.disturbance, model, &x, t, k as u64)?;
        let applied = match &dist.input {
            Some(e) => &u_star + e,
            None => u_star.clone(),
        };
        let next = step_rk4(model, &x, &applied, &dist.state, cfg.dt)?;
        prev = Some((x, u_star));
        x = next;
    }

    let n = (steps + 1) as f64;
    Ok(TrajectoryLog {
        metadata,
        records,
        summary: RunSummary {
            steps,
            min_b,
            violation_steps,
            infeasible_steps,
            modified_steps,
            min_d_sampled,
            min_d_oracle,
            mean_qp_time_s: qp_total.as_secs_f64() / n,
            mean_assemble_time_s: assemble_total.as_secs_f64() / n,
            max_input_lipschitz_ratio: max_ratio,
            final_tracking_error,
        },
        outlines: built.outlines.clone(),
        position_indices: cfg.robot.position_indices,
    })
}
