//! Barrier constraints on the input and the minimally invasive QP
//!
//! ```text
//!     u* = argmin |u - u_d|^2   s.t.   a_i . u + c_i >= 0   for every active gradient
//! ```
//!
//! with `a_i = g(x)^T zeta_i` and `c_i = zeta_i . f(x) - margin_i + alpha(b)`.
//! The margin is zero for the nominal system, `|zeta_i| D(x, t)` for an
//! unstructured disturbance bound and `|zeta_i^T g(x)| E(x, t)` for a bound on
//! the input tracking error.
//!
//! The QP is solved by a dual active-set method (Goldfarb–Idnani with an
//! identity Hessian). Constraint counts are tiny, so the active normals'
//! Gram matrix is refactored by Cholesky whenever the active set changes.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::barrier::{barrier_value, in_domain, AlphaFunction, BarrierConfig};
use crate::distance::{DistanceError, DistanceEvaluation, ObstacleField};
use crate::dynamics::ControlAffine;
use crate::geometry::RobotBody;

/// Feasibility slack accepted at the QP solution, absolute.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("state left the barrier domain (b = {b}, r_bar = {r_bar})")]
    OutsideDomain { b: f64, r_bar: f64 },
    #[error("safety constraints are infeasible")]
    Infeasible,
    #[error("numerical failure in the QP: {0}")]
    NumericalFailure(String),
    #[error("no active gradient at this state")]
    NoActiveGradients,
    #[error("robustness bound evaluated negative ({0})")]
    NegativeBound(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// Feasible iff `a . u + c >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyConstraint {
    pub a: DVector<f64>,
    pub c: f64,
}

impl SafetyConstraint {
    pub fn slack(&self, u: &DVector<f64>) -> f64 {
        self.a.dot(u) + self.c
    }
}

pub type BoundFn = Arc<dyn Fn(&DVector<f64>, f64) -> f64 + Send + Sync>;

/// Non-negative bound of a disturbance as a function of state and time.
#[derive(Clone)]
pub enum Bound {
    Constant(f64),
    Function(BoundFn),
}

impl Bound {
    pub fn eval(&self, x: &DVector<f64>, t: f64) -> f64 {
        match self {
            Bound::Constant(v) => *v,
            Bound::Function(f) => f(x, t),
        }
    }
}

impl fmt::Debug for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Bound::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub enum RobustnessSpec {
    #[default]
    Nominal,
    /// `|d(x, t)| <= D(x, t)` for an additive state-derivative disturbance.
    UnstructuredBound(Bound),
    /// `|e(x, t)| <= E(x, t)` for an input error entering through `g(x)`.
    InputErrorBound(Bound),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub u_star: DVector<f64>,
    /// Constraint indices binding at the optimum, ascending.
    pub active_constraints: Vec<usize>,
    /// Multipliers matching `active_constraints`.
    pub multipliers: Vec<f64>,
    pub modified: bool,
    pub solve_time: Duration,
}

#[allow(clippy::too_many_arguments)]
pub fn build_constraints(
    x: &DVector<f64>,
    t: f64,
    eval: &DistanceEvaluation,
    b: f64,
    cfg: &BarrierConfig,
    model: &dyn ControlAffine,
    alpha: &AlphaFunction,
    robust: &RobustnessSpec,
) -> Result<Vec<SafetyConstraint>, FilterError> {
    if !in_domain(b, cfg) {
        return Err(FilterError::OutsideDomain {
            b,
            r_bar: cfg.r_bar,
        });
    }
    if eval.gradients.is_empty() {
        return Err(FilterError::NoActiveGradients);
    }
    if x.len() != model.state_dim() {
        return Err(FilterError::DimensionMismatch(format!(
            "state has {} coordinates, model expects {}",
            x.len(),
            model.state_dim()
        )));
    }
    let f = model.drift(x);
    let g = model.input_matrix(x);
    let alpha_b = alpha.eval(b);
    let bound = match robust {
        RobustnessSpec::Nominal => 0.0,
        RobustnessSpec::UnstructuredBound(d) | RobustnessSpec::InputErrorBound(d) => {
            let v = d.eval(x, t);
            if !(v >= 0.0) {
                return Err(FilterError::NegativeBound(v));
            }
            v
        }
    };
    Ok(eval
        .gradients
        .iter()
        .map(|zeta| {
            let a = g.tr_mul(zeta);
            let margin = match robust {
                RobustnessSpec::Nominal => 0.0,
                RobustnessSpec::UnstructuredBound(_) => zeta.norm() * bound,
                RobustnessSpec::InputErrorBound(_) => a.norm() * bound,
            };
            SafetyConstraint {
                c: zeta.dot(&f) - margin + alpha_b,
                a,
            }
        })
        .collect())
}

/// Euclidean projection of `u_d` onto a single half-space.
pub fn project_single(u_d: &DVector<f64>, constraint: &SafetyConstraint) -> DVector<f64> {
    let s = constraint.slack(u_d);
    if s >= 0.0 {
        return u_d.clone();
    }
    u_d + &constraint.a * (-s / constraint.a.norm_squared())
}

/// Minimizer of `|u - u_d|^2` over `{u : a_i . u + c_i >= 0}`.
///
/// Returns `u_d` unchanged, bit for bit, when it is already feasible.
pub fn solve_filter_qp(
    u_d: &DVector<f64>,
    constraints: &[SafetyConstraint],
) -> Result<FilterResult, FilterError> {
    let start = Instant::now();
    for (i, c) in constraints.iter().enumerate() {
        if c.a.len() != u_d.len() {
            return Err(FilterError::DimensionMismatch(format!(
                "constraint {i} has {} coefficients, input has {}",
                c.a.len(),
                u_d.len()
            )));
        }
        if !(c.c.is_finite() && c.a.iter().all(|v| v.is_finite())) {
            return Err(FilterError::NumericalFailure(format!(
                "constraint {i} is not finite"
            )));
        }
    }
    if constraints.iter().all(|c| c.slack(u_d) >= 0.0) {
        return Ok(FilterResult {
            u_star: u_d.clone(),
            active_constraints: Vec::new(),
            multipliers: Vec::new(),
            modified: false,
            solve_time: start.elapsed(),
        });
    }
    if constraints.len() == 1 {
        let c = &constraints[0];
        if c.a.norm_squared() == 0.0 {
            return Err(FilterError::Infeasible);
        }
        let u_star = project_single(u_d, c);
        let lambda = -c.slack(u_d) / c.a.norm_squared();
        return Ok(FilterResult {
            u_star,
            active_constraints: vec![0],
            multipliers: vec![lambda],
            modified: true,
            solve_time: start.elapsed(),
        });
    }
    let (u_star, mut active) = dual_active_set(u_d, constraints)?;
    active.sort_by_key(|&(i, _)| i);
    Ok(FilterResult {
        u_star,
        active_constraints: active.iter().map(|&(i, _)| i).collect(),
        multipliers: active.iter().map(|&(_, l)| l).collect(),
        modified: true,
        solve_time: start.elapsed(),
    })
}

/// Solves `M y = rhs` for the Gram matrix `M = N^T N` of the active normals.
fn gram_solve(normals: &[&DVector<f64>], rhs: &DVector<f64>) -> Result<DVector<f64>, FilterError> {
    let q = normals.len();
    let mut gram = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..=i {
            let v = normals[i].dot(normals[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let chol = gram.cholesky().ok_or_else(|| {
        FilterError::NumericalFailure("active constraint normals are linearly dependent".into())
    })?;
    Ok(chol.solve(rhs))
}

/// Active constraint indices with their multipliers.
type ActiveSet = Vec<(usize, f64)>;

fn dual_active_set(
    u_d: &DVector<f64>,
    constraints: &[SafetyConstraint],
) -> Result<(DVector<f64>, ActiveSet), FilterError> {
    let n = u_d.len();
    let scale: Vec<f64> = constraints.iter().map(|c| c.a.norm()).collect();
    let mut u = u_d.clone();
    let mut active: Vec<(usize, f64)> = Vec::new();
    let max_iter = 50 * (constraints.len() + n + 1);
    let mut iter = 0;

    loop {
        // Most violated constraint, measured as a distance in input space.
        let mut pick: Option<(usize, f64)> = None;
        for (i, c) in constraints.iter().enumerate() {
            if active.iter().any(|&(j, _)| j == i) {
                continue;
            }
            let s = c.slack(&u);
            let tol = 1e-12 * (1.0 + c.c.abs() + scale[i] * u.norm());
            if s < -tol {
                if scale[i] == 0.0 {
                    return Err(FilterError::Infeasible);
                }
                let v = s / scale[i];
                if pick.is_none_or(|(_, best)| v < best) {
                    pick = Some((i, v));
                }
            }
        }
        let Some((p, _)) = pick else {
            return Ok((u, active));
        };
        let np = &constraints[p].a;
        let mut lambda_p = 0.0;

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(FilterError::NumericalFailure(
                    "active-set iteration limit reached".into(),
                ));
            }
            let normals: Vec<&DVector<f64>> =
                active.iter().map(|&(j, _)| &constraints[j].a).collect();
            let (r, z) = if normals.is_empty() {
                (DVector::zeros(0), np.clone())
            } else {
                let nt_np =
                    DVector::from_iterator(normals.len(), normals.iter().map(|a| a.dot(np)));
                let r = gram_solve(&normals, &nt_np)?;
                let mut z = np.clone();
                for (k, a) in normals.iter().enumerate() {
                    z -= *a * r[k];
                }
                (r, z)
            };

            // Dual step: the first active multiplier to hit zero.
            let mut t1 = f64::INFINITY;
            let mut drop: Option<usize> = None;
            for (k, &(_, lam)) in active.iter().enumerate() {
                if r[k] > 0.0 {
                    let ratio = lam / r[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            // Primal step: reach the boundary of constraint p.
            let z_np = z.dot(np);
            let t2 = if z.norm() > 1e-10 * scale[p] && z_np > 0.0 {
                -constraints[p].slack(&u) / z_np
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(FilterError::Infeasible);
            }
            if t2.is_infinite() {
                for (k, entry) in active.iter_mut().enumerate() {
                    entry.1 -= t1 * r[k];
                }
                lambda_p += t1;
                active.remove(drop.expect("finite dual step names a constraint"));
                continue;
            }
            let t = t1.min(t2);
            u += &z * t;
            for (k, entry) in active.iter_mut().enumerate() {
                entry.1 -= t * r[k];
            }
            lambda_p += t;
            if t2 <= t1 {
                active.push((p, lambda_p));
                break;
            }
            active.remove(drop.expect("finite dual step names a constraint"));
        }
    }
}

/// Evaluation of the barrier pipeline up to, but not including, the QP.
#[derive(Debug, Clone)]
pub struct PreparedFilter {
    pub evaluation: DistanceEvaluation,
    pub b: f64,
    pub constraints: Vec<SafetyConstraint>,
    pub assemble_time: Duration,
}

/// Distance evaluation, barrier value and constraint assembly, timed together.
#[allow(clippy::too_many_arguments)]
pub fn prepare_filter(
    x: &DVector<f64>,
    t: f64,
    body: &RobotBody,
    obstacles: &ObstacleField,
    cfg: &BarrierConfig,
    activation_tolerance: f64,
    model: &dyn ControlAffine,
    alpha: &AlphaFunction,
    robust: &RobustnessSpec,
) -> Result<PreparedFilter, FilterError> {
    let start = Instant::now();
    let evaluation = obstacles.evaluate(x, body, activation_tolerance)?;
    let b = barrier_value(&evaluation, cfg);
    let constraints = build_constraints(x, t, &evaluation, b, cfg, model, alpha, robust)?;
    Ok(PreparedFilter {
        evaluation,
        b,
        constraints,
        assemble_time: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct FilterStep {
    pub prepared: PreparedFilter,
    pub u_d: DVector<f64>,
    pub result: FilterResult,
}

impl FilterStep {
    /// Constraint assembly plus QP, the cost of one safe input.
    pub fn total_time(&self) -> Duration {
        self.prepared.assemble_time + self.result.solve_time
    }
}

/// Full pipeline: distance, barrier, constraints, then the QP on `u_d_fn(x)`.
#[allow(clippy::too_many_arguments)]
pub fn filter(
    x: &DVector<f64>,
    t: f64,
    body: &RobotBody,
    obstacles: &ObstacleField,
    cfg: &BarrierConfig,
    activation_tolerance: f64,
    model: &dyn ControlAffine,
    alpha: &AlphaFunction,
    robust: &RobustnessSpec,
    u_d_fn: impl FnOnce(&DVector<f64>) -> DVector<f64>,
) -> Result<FilterStep, FilterError> {
    let prepared = prepare_filter(
        x,
        t,
        body,
        obstacles,
        cfg,
        activation_tolerance,
        model,
        alpha,
        robust,
    )?;
    let u_d = u_d_fn(x);
    let result = solve_filter_qp(&u_d, &prepared.constraints)?;
    Ok(FilterStep {
        prepared,
        u_d,
        result,
    })
}
