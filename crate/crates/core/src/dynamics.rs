//! Control-affine models `x' = f(x) + g(x) u + d`, the three-wheeled
//! omnidirectional robot, disturbance draws and fixed-step RK4.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted condition number of `g(x) g(x)^T`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state became non-finite: {0:?}")]
    NonFiniteState(Vec<f64>),
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("g(x) g(x)^T is not safely invertible (condition number {0:e})")]
    RankDeficient(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub trait ControlAffine: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// True when `g(x) g(x)^T` is known to be invertible for every state.
    fn full_row_rank_certified(&self) -> bool {
        false
    }

    fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + self.input_matrix(x) * u
    }
}

/// Condition number of `g(x) g(x)^T`; errors above [`MAX_CONDITION`].
pub fn check_full_row_rank(
    model: &dyn ControlAffine,
    x: &DVector<f64>,
) -> Result<f64, DynamicsError> {
    let g = model.input_matrix(x);
    let ggt = &g * g.transpose();
    let sv = ggt.singular_values();
    let max = sv.max();
    let min = sv.min();
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if cond.is_finite() && cond < MAX_CONDITION {
        Ok(cond)
    } else {
        Err(DynamicsError::RankDeficient(cond))
    }
}

/// `g(x)^+ = g^T (g g^T)^{-1}`.
pub fn right_pseudo_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>, DynamicsError> {
    let ggt = g * g.transpose();
    let inv = ggt
        .cholesky()
        .ok_or(DynamicsError::RankDeficient(f64::INFINITY))?
        .inverse();
    Ok(g.transpose() * inv)
}

/// `x' = u` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleIntegrator {
    pub dim: usize,
}

impl ControlAffine for SingleIntegrator {
    fn state_dim(&self) -> usize {
        self.dim
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn input_matrix(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
    fn full_row_rank_certified(&self) -> bool {
        true
    }
}

/// Three-wheeled omnidirectional robot with state `(x1, x2, heading)` and
/// wheel angular velocities as inputs: `x' = G(x) (B^T)^{-1} u`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmniRobot {
    /// Body radius, m.
    pub l: f64,
    /// Wheel radius, m.
    pub r_wheel: f64,
    b: Matrix3<f64>,
    bt_inv: Matrix3<f64>,
}

impl Default for OmniRobot {
    fn default() -> Self {
        Self::new(0.2, 0.02).expect("default omni geometry is invertible")
    }
}

impl OmniRobot {
    pub fn new(l: f64, r_wheel: f64) -> Result<Self, DynamicsError> {
        if !(l > 0.0 && r_wheel > 0.0) {
            return Err(DynamicsError::InvalidModel(format!(
                "body and wheel radii must be positive (l = {l}, r = {r_wheel})"
            )));
        }
        let c = (PI / 6.0).cos();
        let s = (PI / 6.0).sin();
        let r = r_wheel;
        #[rustfmt::skip]
        let b = Matrix3::new(
            0.0,    r * c,  -r * c,
            -r,     r * s,  r * s,
            l * r,  l * r,  l * r,
        );
        let bt_inv = b
            .transpose()
            .try_inverse()
            .ok_or_else(|| DynamicsError::InvalidModel("B is singular".into()))?;
        Ok(Self {
            l,
            r_wheel,
            b,
            bt_inv,
        })
    }

    pub fn geometry_matrix(&self) -> &Matrix3<f64> {
        &self.b
    }

    pub fn rotation(heading: f64) -> Matrix3<f64> {
        let (s, c) = heading.sin_cos();
        #[rustfmt::skip]
        let g = Matrix3::new(
            c,   -s,  0.0,
            s,   c,   0.0,
            0.0, 0.0, 1.0,
        );
        g
    }

    pub fn g(&self, heading: f64) -> Matrix3<f64> {
        Self::rotation(heading) * self.bt_inv
    }
}

impl ControlAffine for OmniRobot {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        3
    }
    fn drift(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(3)
    }
    fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let g = self.g(x[2]);
        DMatrix::from_iterator(3, 3, g.iter().copied())
    }
    fn full_row_rank_certified(&self) -> bool {
        true
    }
}

/// `g(x)` of the omni robot with `l = 0.2`, `r = 0.02`.
pub fn omni_g(x: &DVector<f64>) -> DMatrix<f64> {
    OmniRobot::default().input_matrix(x)
}

/// Classical RK4 on `x' = f(x) + g(x) u + d` with `u` and `d` held over the step.
pub fn step_rk4(
    model: &dyn ControlAffine,
    x: &DVector<f64>,
    u: &DVector<f64>,
    d: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if x.len() != model.state_dim() || u.len() != model.input_dim() || d.len() != model.state_dim()
    {
        return Err(DynamicsError::DimensionMismatch(format!(
            "x {}, u {}, d {} for a model with n_x {}, n_u {}",
            x.len(),
            u.len(),
            d.len(),
            model.state_dim(),
            model.input_dim()
        )));
    }
    let field = |s: &DVector<f64>| model.vector_field(s, u) + d;
    let k1 = field(x);
    let k2 = field(&(x + &k1 * (dt / 2.0)));
    let k3 = field(&(x + &k2 * (dt / 2.0)));
    let k4 = field(&(x + &k3 * dt));
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(DynamicsError::NonFiniteState(
            next.iter().copied().collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DisturbanceModel {
    #[default]
    None,
    /// Additive state-derivative disturbance, i.i.d. uniform per coordinate
    /// in `[-half_width[i], half_width[i]]`, redrawn every step.
    UniformBox { half_width: Vec<f64>, seed: u64 },
    /// Input tracking error `e` added to the filtered input, i.i.d. uniform
    /// per input coordinate, redrawn every step.
    InputError { half_width: Vec<f64>, seed: u64 },
}

impl DisturbanceModel {
    /// Worst-case Euclidean norm of a draw.
    pub fn bound(&self) -> f64 {
        match self {
            DisturbanceModel::None => 0.0,
            DisturbanceModel::UniformBox { half_width, .. }
            | DisturbanceModel::InputError { half_width, .. } => {
                half_width.iter().map(|w| w * w).sum::<f64>().sqrt()
            }
        }
    }

    pub fn with_seed(&self, new_seed: u64) -> Self {
        match self {
            DisturbanceModel::None => DisturbanceModel::None,
            DisturbanceModel::UniformBox { half_width, .. } => DisturbanceModel::UniformBox {
                half_width: half_width.clone(),
                seed: new_seed,
            },
            DisturbanceModel::InputError { half_width, .. } => DisturbanceModel::InputError {
                half_width: half_width.clone(),
                seed: new_seed,
            },
        }
    }
}

/// One step's disturbance realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSample {
    /// Additive term `d` of the state derivative.
    pub state: DVector<f64>,
    /// Error added to the applied input, if the model acts on inputs.
    pub input: Option<DVector<f64>>,
}

impl DisturbanceSample {
    /// Equivalent state-derivative disturbance `d + g(x) e`.
    pub fn as_state_derivative(&self, model: &dyn ControlAffine, x: &DVector<f64>) -> DVector<f64> {
        match &self.input {
            Some(e) => &self.state + model.input_matrix(x) * e,
            None => self.state.clone(),
        }
    }
}

fn uniform_draw(half_width: &[f64], seed: u64, step_index: u64) -> DVector<f64> {
    // One independent stream per step, so draws do not depend on call order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step_index);
    DVector::from_iterator(
        half_width.len(),
        half_width.iter().map(|&w| {
            if w > 0.0 {
                rng.random_range(-w..=w)
            } else {
                0.0
            }
        }),
    )
}

pub fn sample_disturbance(
    dm: &DisturbanceModel,
    model: &dyn ControlAffine,
    _x: &DVector<f64>,
    _t: f64,
    step_index: u64,
) -> Result<DisturbanceSample, DynamicsError> {
    let n_x = model.state_dim();
    match dm {
        DisturbanceModel::None => Ok(DisturbanceSample {
            state: DVector::zeros(n_x),
            input: None,
        }),
        DisturbanceModel::UniformBox { half_width, seed } => {
            if half_width.len() != n_x {
                return Err(DynamicsError::DimensionMismatch(format!(
                    "disturbance box has {} coordinates, state has {n_x}",
                    half_width.len()
                )));
            }
            Ok(DisturbanceSample {
                state: uniform_draw(half_width, *seed, step_index),
                input: None,
            })
        }
        DisturbanceModel::InputError { half_width, seed } => {
            if half_width.len() != model.input_dim() {
                return Err(DynamicsError::DimensionMismatch(format!(
                    "input error box has {} coordinates, input has {}",
                    half_width.len(),
                    model.input_dim()
                )));
            }
            Ok(DisturbanceSample {
                state: DVector::zeros(n_x),
                input: Some(uniform_draw(half_width, *seed, step_index)),
            })
        }
    }
}
