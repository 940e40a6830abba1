//! Nominal tracking: reference trajectories, a task-space PID mapped to the
//! inputs through `g(x)^+`, and an exponential-envelope fit of the tracking
//! error on filter-free stretches of a run.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{right_pseudo_inverse, ControlAffine, DynamicsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("no filter-free segment with at least two samples")]
    NoCleanSegment,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// One gain for every axis or one per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisGain {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

impl AxisGain {
    pub fn get(&self, axis: usize) -> f64 {
        match self {
            AxisGain::Uniform(k) => *k,
            AxisGain::PerAxis(ks) => ks[axis],
        }
    }

    fn check(&self, name: &str, dim: usize, positive: bool) -> Result<(), TrackingError> {
        let values: Vec<f64> = match self {
            AxisGain::Uniform(k) => vec![*k],
            AxisGain::PerAxis(ks) => {
                if ks.len() != dim {
                    return Err(TrackingError::InvalidGains(format!(
                        "{name} has {} entries for {dim} axes",
                        ks.len()
                    )));
                }
                ks.clone()
            }
        };
        let ok = values
            .iter()
            .all(|&k| k.is_finite() && if positive { k > 0.0 } else { k >= 0.0 });
        if ok {
            Ok(())
        } else {
            let rule = if positive { "> 0" } else { ">= 0" };
            Err(TrackingError::InvalidGains(format!(
                "{name} must be {rule}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: AxisGain,
    pub ki: AxisGain,
    pub kd: AxisGain,
    /// Per-coordinate bound on the accumulated error integral.
    pub integral_clamp: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: AxisGain::Uniform(0.5),
            ki: AxisGain::Uniform(0.01),
            kd: AxisGain::Uniform(0.1),
            integral_clamp: 10.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self, dim: usize) -> Result<(), TrackingError> {
        self.kp.check("kp", dim, true)?;
        self.ki.check("ki", dim, false)?;
        self.kd.check("kd", dim, false)?;
        if !(self.integral_clamp > 0.0 && self.integral_clamp.is_finite()) {
            return Err(TrackingError::InvalidGains(
                "integral_clamp must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Integral and previous error carried between controller calls.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PidMemory {
    pub integral: Option<DVector<f64>>,
    pub prev_error: Option<DVector<f64>>,
}

/// Task-space PID `v = kp e + ki int(e) + kd de/dt`, `e = x_d - x`, mapped to
/// `u_d = g(x)^+ v`. The derivative is a backward difference and is zero on
/// the first call.
pub fn pid_control(
    gains: &PidGains,
    model: &dyn ControlAffine,
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    dt: f64,
    memory: &PidMemory,
) -> Result<(DVector<f64>, PidMemory), TrackingError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TrackingError::InvalidStep(dt));
    }
    let n = x.len();
    let e = x_d - x;
    let clamp = gains.integral_clamp;
    let mut integral = memory.integral.clone().unwrap_or_else(|| DVector::zeros(n));
    integral += &e * dt;
    integral.apply(|v| *v = v.clamp(-clamp, clamp));
    let de = match &memory.prev_error {
        Some(prev) => (&e - prev) / dt,
        None => DVector::zeros(n),
    };
    let v = DVector::from_fn(n, |i, _| {
        gains.kp.get(i) * e[i] + gains.ki.get(i) * integral[i] + gains.kd.get(i) * de[i]
    });
    let g = model.input_matrix(x);
    let u_d = right_pseudo_inverse(&g)? * v;
    Ok((
        u_d,
        PidMemory {
            integral: Some(integral),
            prev_error: Some(e),
        },
    ))
}

/// Desired state as a function of time.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReferenceTrajectory {
    GoalPoint {
        goal: Vec<f64>,
    },
    /// Linear interpolation between `points`, held constant outside `times`.
    Waypoints {
        times: Vec<f64>,
        points: Vec<Vec<f64>>,
    },
    #[serde(skip)]
    Analytic(Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>),
}

impl fmt::Debug for ReferenceTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceTrajectory::GoalPoint { goal } => {
                f.debug_struct("GoalPoint").field("goal", goal).finish()
            }
            ReferenceTrajectory::Waypoints { times, points } => f
                .debug_struct("Waypoints")
                .field("times", times)
                .field("points", points)
                .finish(),
            ReferenceTrajectory::Analytic(_) => f.write_str("Analytic(..)"),
        }
    }
}

impl PartialEq for ReferenceTrajectory {
    fn eq(&self, other: &Self) -> bool {
        use ReferenceTrajectory::*;
        match (self, other) {
            (GoalPoint { goal: a }, GoalPoint { goal: b }) => a == b,
            (
                Waypoints {
                    times: ta,
                    points: pa,
                },
                Waypoints {
                    times: tb,
                    points: pb,
                },
            ) => ta == tb && pa == pb,
            (Analytic(a), Analytic(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl ReferenceTrajectory {
    pub fn validate(&self, dim: usize) -> Result<(), TrackingError> {
        let bad = |m: String| Err(TrackingError::InvalidReference(m));
        match self {
            ReferenceTrajectory::GoalPoint { goal } => {
                if goal.len() != dim {
                    return bad(format!(
                        "goal has {} coordinates, state has {dim}",
                        goal.len()
                    ));
                }
                if goal.iter().any(|v| !v.is_finite()) {
                    return bad("goal must be finite".into());
                }
            }
            ReferenceTrajectory::Waypoints { times, points } => {
                if times.is_empty() || times.len() != points.len() {
                    return bad("waypoints need matching, non-empty times and points".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("waypoint times must be strictly increasing".into());
                }
                if points.iter().any(|p| p.len() != dim) {
                    return bad(format!("every waypoint needs {dim} coordinates"));
                }
            }
            ReferenceTrajectory::Analytic(_) => {}
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        match self {
            ReferenceTrajectory::GoalPoint { goal } => DVector::from_column_slice(goal),
            ReferenceTrajectory::Waypoints { times, points } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return DVector::from_column_slice(&points[0]);
                }
                if t >= times[last] {
                    return DVector::from_column_slice(&points[last]);
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                let a = DVector::from_column_slice(&points[k]);
                let b = DVector::from_column_slice(&points[k + 1]);
                a * (1.0 - w) + b * w
            }
            ReferenceTrajectory::Analytic(f) => f(t),
        }
    }
}

/// Tracking error sample used by [`tracking_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    pub error_norm: f64,
    pub modified: bool,
}

/// Exponential envelope `|e(t)| <= c exp(-lambda (t - t0)) |e(t0)|` fitted on
/// the longest filter-free stretch. A surrogate for a KL bound, not a proof.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    pub c: f64,
    pub lambda: f64,
    /// True when the fitted decay rate is positive.
    pub accepted: bool,
    /// Index range `[start, end)` of the segment used.
    pub segment: (usize, usize),
}

pub fn tracking_diagnostic(samples: &[ErrorSample]) -> Result<TrackingReport, TrackingError> {
    let mut best = (0, 0);
    let mut start = 0;
    for i in 0..=samples.len() {
        if i == samples.len() || samples[i].modified {
            if i - start > best.1 - best.0 {
                best = (start, i);
            }
            start = i + 1;
        }
    }
    let seg = &samples[best.0..best.1];
    let usable: Vec<&ErrorSample> = seg.iter().filter(|s| s.error_norm > 0.0).collect();
    if usable.len() < 2 {
        return Err(TrackingError::NoCleanSegment);
    }

    let t0 = seg[0].t;
    let y0 = usable[0].error_norm.ln();
    // Regress y - y0 so a constant error gives an exactly zero slope.
    let pts: Vec<(f64, f64)> = usable
        .iter()
        .map(|s| (s.t - t0, s.error_norm.ln() - y0))
        .collect();
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(TrackingError::NoCleanSegment);
    }
    let lambda = -sxy / sxx;

    let e0 = seg[0].error_norm;
    let c = if e0 > 0.0 {
        seg.iter()
            .map(|s| s.error_norm / (e0 * (-lambda * (s.t - t0)).exp()))
            .fold(1.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(TrackingReport {
        c,
        lambda,
        accepted: lambda > 0.0,
        segment: best,
    })
}
