//! The sampled barrier `b = min |x + e - o|^2 - epsilon - gamma`, its safe
//! set and domain, and extended class-K gains.
//!
//! Units: `b`, `epsilon`, `gamma` and `r_bar` are squared distances (m²).
//! The clearance certified by `b >= 0` is `sqrt(gamma)` in metres.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::DistanceEvaluation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("invalid barrier configuration: {0}")]
    InvalidConfig(String),
    #[error("state is not safe (b = {0})")]
    NotSafe(f64),
    #[error("invalid class-K gain: {0}")]
    InvalidAlpha(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub r_bar: f64,
}

impl BarrierConfig {
    pub fn new(epsilon: f64, gamma: f64, r_bar: f64) -> Result<Self, BarrierError> {
        let cfg = Self {
            epsilon,
            gamma,
            r_bar,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `r_bar = fraction * (epsilon + gamma)`.
    pub fn with_r_bar_fraction(
        epsilon: f64,
        gamma: f64,
        fraction: f64,
    ) -> Result<Self, BarrierError> {
        Self::new(epsilon, gamma, fraction * (epsilon + gamma))
    }

    /// `r = epsilon + gamma`.
    pub fn r(&self) -> f64 {
        self.epsilon + self.gamma
    }

    pub fn validate(&self) -> Result<(), BarrierError> {
        let bad = |m: &str| Err(BarrierError::InvalidConfig(m.to_string()));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be finite and >= 0");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and >= 0");
        }
        if self.r() <= 0.0 {
            return bad("epsilon + gamma must be positive");
        }
        if !(self.r_bar > 0.0 && self.r_bar < self.r()) {
            return bad("r_bar must lie in (0, epsilon + gamma)");
        }
        Ok(())
    }
}

/// Extended class-K function, `k * s` or `k * s^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AlphaFunction {
    Linear { k: f64 },
    Cubic { k: f64 },
}

impl Default for AlphaFunction {
    fn default() -> Self {
        AlphaFunction::Linear { k: 1.0 }
    }
}

impl AlphaFunction {
    pub fn validate(&self) -> Result<(), BarrierError> {
        let k = match self {
            AlphaFunction::Linear { k } | AlphaFunction::Cubic { k } => *k,
        };
        if k > 0.0 && k.is_finite() {
            Ok(())
        } else {
            Err(BarrierError::InvalidAlpha(format!(
                "gain must be positive, got {k}"
            )))
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            AlphaFunction::Linear { k } => k * s,
            AlphaFunction::Cubic { k } => k * s * s * s,
        }
    }
}

pub fn barrier_value(eval: &DistanceEvaluation, cfg: &BarrierConfig) -> f64 {
    eval.min_squared - cfg.epsilon - cfg.gamma
}

pub fn is_safe(b: f64) -> bool {
    b >= 0.0
}

pub fn in_domain(b: f64, cfg: &BarrierConfig) -> bool {
    b > -cfg.r_bar
}

/// Clearance in metres guaranteed by a safe barrier value: `sqrt(gamma)`.
pub fn margin_implication(b: f64, gamma: f64) -> Result<f64, BarrierError> {
    if is_safe(b) {
        Ok(gamma.sqrt())
    } else {
        Err(BarrierError::NotSafe(b))
    }
}

/// Sampling error for a body cloud and an obstacle cloud with covering
/// radii `rho_body` and `rho_obstacle` (squared metric).
///
/// Returns the larger of the per-shape value `2 * max(rho)` and
/// `(sqrt(gamma) + sqrt(rho_body) + sqrt(rho_obstacle))^2 - gamma`. The second
/// term comes from the unsquared triangle inequality: any state whose true
/// distance is below `sqrt(gamma)` has sampled squared distance below
/// `gamma + epsilon`, so `b >= 0` still implies clearance `sqrt(gamma)`.
pub fn certified_epsilon(rho_body: f64, rho_obstacle: f64, gamma: f64) -> f64 {
    let per_shape = 2.0 * rho_body.max(rho_obstacle);
    let spread = rho_body.sqrt() + rho_obstacle.sqrt();
    let triangle = (gamma.sqrt() + spread).powi(2) - gamma;
    per_shape.max(triangle)
}
