//! Scenario files: JSON schema, defaults, validation and the sampled
//! geometry built from them.

use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barrier::{certified_epsilon, AlphaFunction, BarrierConfig};
use crate::distance::{ObstacleField, PairScan, DEFAULT_ACTIVATION_TOLERANCE};
use crate::dynamics::{ControlAffine, DisturbanceModel, OmniRobot, SingleIntegrator};
use crate::geometry::{
    certify_rho, default_validation_count, sample_boundary_grid, sample_boundary_uniform,
    RobotBody, SampledShape, Shape,
};
use crate::safety_filter::{Bound, RobustnessSpec};
use crate::spatial::{squared_distance, PointGrid};
use crate::tracking::{PidGains, ReferenceTrajectory};

use super::ScenarioError;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_R_BAR_FRACTION: f64 = 0.5;
/// Density multiplier of the resampled clearance oracle.
pub const ORACLE_FACTOR: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Omni {
        #[serde(default = "default_l")]
        l: f64,
        #[serde(default = "default_r_wheel")]
        r_wheel: f64,
    },
    SingleIntegrator {
        dim: usize,
    },
}

fn default_l() -> f64 {
    0.2
}

fn default_r_wheel() -> f64 {
    0.02
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn ControlAffine>, ScenarioError> {
        match self {
            ModelSpec::Omni { l, r_wheel } => Ok(Box::new(
                OmniRobot::new(*l, *r_wheel)
                    .map_err(|e| ScenarioError::Validation(e.to_string()))?,
            )),
            ModelSpec::SingleIntegrator { dim } => {
                if *dim < 2 {
                    return Err(ScenarioError::Validation(
                        "single integrator needs at least 2 dimensions".into(),
                    ));
                }
                Ok(Box::new(SingleIntegrator { dim: *dim }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingTechnique {
    Grid,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub technique: SamplingTechnique,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SamplerSpec {
    pub fn sample(&self, shape: &Shape, seed_offset: u64) -> Result<SampledShape, ScenarioError> {
        let s = match self.technique {
            SamplingTechnique::Grid => sample_boundary_grid(shape, self.n),
            SamplingTechnique::Uniform => {
                sample_boundary_uniform(shape, self.n, self.seed.wrapping_add(seed_offset))
            }
        }?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min_corner: Point2<f64>,
    pub max_corner: Point2<f64>,
    /// Sampler for the workspace boundary; defaults to the scenario sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
}

impl Workspace {
    pub fn shape(&self) -> Shape {
        Shape::Rectangle {
            min_corner: self.min_corner,
            max_corner: self.max_corner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    /// Body shape in the body frame, translated by the position coordinates.
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(default = "default_position_indices")]
    pub position_indices: [usize; 2],
}

fn default_position_indices() -> [usize; 2] {
    [0, 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub gamma: f64,
    #[serde(default = "default_r_bar_fraction")]
    pub r_bar_fraction: f64,
    #[serde(default = "default_activation_tolerance")]
    pub activation_tolerance: f64,
}

fn default_r_bar_fraction() -> f64 {
    DEFAULT_R_BAR_FRACTION
}

fn default_activation_tolerance() -> f64 {
    DEFAULT_ACTIVATION_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RobustnessConfig {
    #[default]
    Nominal,
    /// Bound `D` on the state-derivative disturbance; defaults to the
    /// disturbance model's worst-case norm.
    Unstructured {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
    /// Bound `E` on the input error; defaults to the disturbance model's
    /// worst-case norm.
    InputError {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairScanSpec {
    Exhaustive,
    Indexed,
    #[default]
    Auto,
}

impl From<PairScanSpec> for PairScan {
    fn from(s: PairScanSpec) -> Self {
        match s {
            PairScanSpec::Exhaustive => PairScan::Exhaustive,
            PairScanSpec::Indexed => PairScan::Indexed,
            PairScanSpec::Auto => PairScan::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    pub workspace: Option<Workspace>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub robot: RobotSpec,
    pub sampler: SamplerSpec,
    pub barrier: BarrierSpec,
    #[serde(default)]
    pub alpha: AlphaFunction,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub disturbance: DisturbanceModel,
    #[serde(default)]
    pub controller: PidGains,
    pub reference: ReferenceTrajectory,
    pub initial_state: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub pair_scan: PairScanSpec,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_log_every() -> usize {
    1
}

fn parse_error(e: serde_json::Error) -> ScenarioError {
    ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(parse_error)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_scenario(&text)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        let model = self.model.build()?;
        let n_x = model.state_dim();
        let ws = match &self.workspace {
            Some(ws) => ws,
            None => return bad("workspace required for compact safe set".into()),
        };
        ws.shape()
            .validate()
            .map_err(|e| ScenarioError::Validation(format!("workspace: {e}")))?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.shape
                .validate()
                .map_err(|e| ScenarioError::Validation(format!("obstacle {i}: {e}")))?;
        }
        self.robot
            .shape
            .validate()
            .map_err(|e| ScenarioError::Validation(format!("robot: {e}")))?;
        if self.robot.position_indices.iter().any(|&i| i >= n_x)
            || self.robot.position_indices[0] == self.robot.position_indices[1]
        {
            return bad("robot position_indices must name two distinct state coordinates".into());
        }
        let samplers = std::iter::once(&self.sampler)
            .chain(ws.sampler.iter())
            .chain(self.robot.sampler.iter())
            .chain(self.obstacles.iter().filter_map(|o| o.sampler.as_ref()));
        for s in samplers {
            if s.n < 3 {
                return bad(format!("sampler n must be at least 3, got {}", s.n));
            }
        }
        let b = &self.barrier;
        if !(b.gamma >= 0.0 && b.gamma.is_finite()) {
            return bad("gamma must be finite and >= 0".into());
        }
        if !(b.r_bar_fraction > 0.0 && b.r_bar_fraction < 1.0) {
            return bad("r_bar_fraction must lie in (0, 1)".into());
        }
        if !(b.activation_tolerance >= 0.0 && b.activation_tolerance.is_finite()) {
            return bad("activation_tolerance must be finite and >= 0".into());
        }
        self.alpha
            .validate()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        if let RobustnessConfig::Unstructured { bound: Some(v) }
        | RobustnessConfig::InputError { bound: Some(v) } = &self.robustness
        {
            if !(*v >= 0.0 && v.is_finite()) {
                return bad("robustness bound must be finite and >= 0".into());
            }
        }
        match &self.disturbance {
            DisturbanceModel::None => {}
            DisturbanceModel::UniformBox { half_width, .. } => {
                if half_width.len() != n_x {
                    return bad(format!("disturbance box needs {n_x} half-widths"));
                }
            }
            DisturbanceModel::InputError { half_width, .. } => {
                if half_width.len() != model.input_dim() {
                    return bad(format!(
                        "input error box needs {} half-widths",
                        model.input_dim()
                    ));
                }
            }
        }
        if let DisturbanceModel::UniformBox { half_width, .. }
        | DisturbanceModel::InputError { half_width, .. } = &self.disturbance
        {
            if half_width.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return bad("disturbance half-widths must be finite and >= 0".into());
            }
        }
        self.controller
            .validate(n_x)
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        self.reference
            .validate(n_x)
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        if self.initial_state.len() != n_x || self.initial_state.iter().any(|v| !v.is_finite()) {
            return bad(format!("initial_state needs {n_x} finite coordinates"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        Ok(())
    }

    /// Number of integration steps, `round(t_end / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("scenario config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn robustness_spec(&self) -> RobustnessSpec {
        let fallback = self.disturbance.bound();
        match &self.robustness {
            RobustnessConfig::Nominal => RobustnessSpec::Nominal,
            RobustnessConfig::Unstructured { bound } => {
                RobustnessSpec::UnstructuredBound(Bound::Constant(bound.unwrap_or(fallback)))
            }
            RobustnessConfig::InputError { bound } => {
                RobustnessSpec::InputErrorBound(Bound::Constant(bound.unwrap_or(fallback)))
            }
        }
    }

    /// Every obstacle, the workspace last, with the sampler each one uses.
    pub fn obstacle_shapes(&self) -> Vec<(String, Shape, SamplerSpec)> {
        let mut out: Vec<(String, Shape, SamplerSpec)> = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| {
                (
                    o.name.clone().unwrap_or_else(|| format!("obstacle{i}")),
                    o.shape.clone(),
                    o.sampler.clone().unwrap_or_else(|| self.sampler.clone()),
                )
            })
            .collect();
        if let Some(ws) = &self.workspace {
            out.push((
                "workspace".into(),
                ws.shape(),
                ws.sampler.clone().unwrap_or_else(|| self.sampler.clone()),
            ));
        }
        out
    }
}

/// Certification result for one sampled shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeCertificate {
    pub name: String,
    pub n: usize,
    pub rho: f64,
    pub epsilon: f64,
}

/// Dense resampling of every shape, queried as a stand-in for the true
/// clearance. Its own error is roughly `1 / ORACLE_FACTOR` of the run's.
#[derive(Debug, Clone)]
pub struct ClearanceOracle {
    body: Vec<Point2<f64>>,
    reach: f64,
    obstacles: PointGrid,
}

impl ClearanceOracle {
    pub fn new(body_offsets: &[Point2<f64>], obstacle_points: &[Point2<f64>]) -> Self {
        let reach = body_offsets
            .iter()
            .map(|e| e.coords.norm())
            .fold(0.0, f64::max);
        Self {
            body: body_offsets.to_vec(),
            reach,
            obstacles: PointGrid::new(obstacle_points, 4.0),
        }
    }

    /// Minimum distance between the body at `position` and the obstacles.
    pub fn clearance(&self, position: Point2<f64>) -> f64 {
        let at = |e: &Point2<f64>| Point2::new(position.x + e.x, position.y + e.y);
        // Upper bound from the body point closest to the obstacle point
        // nearest the body origin.
        let (j, _) = self.obstacles.nearest(&position);
        let o = self.obstacles.points()[j];
        let e = self
            .body
            .iter()
            .min_by(|a, b| squared_distance(&at(a), &o).total_cmp(&squared_distance(&at(b), &o)))
            .expect("body is non-empty");
        let upper = self.obstacles.nearest(&at(e)).1;
        // Any pair within the bound has its obstacle point within
        // sqrt(upper) + reach of the origin.
        let radius = (upper.sqrt() + self.reach) * (1.0 + 1e-12);
        let mut best = upper;
        let points = self.obstacles.points();
        self.obstacles
            .for_each_within(&position, radius * radius, |j, _| {
                let o = points[j];
                for e in &self.body {
                    best = best.min(squared_distance(&at(e), &o));
                }
            });
        best.sqrt()
    }
}

/// Sampled geometry and derived barrier settings of a scenario.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub body: RobotBody,
    pub obstacles: ObstacleField,
    pub barrier: BarrierConfig,
    pub body_certificate: ShapeCertificate,
    pub obstacle_certificates: Vec<ShapeCertificate>,
    /// Shape outlines for plots, obstacles then workspace.
    pub outlines: Vec<Vec<Point2<f64>>>,
}

impl BuiltScenario {
    pub fn sample_counts(&self) -> (usize, usize) {
        (self.body.offset_set.len(), self.obstacles.samples().len())
    }
}

fn sample_and_certify(
    name: &str,
    shape: &Shape,
    sampler: &SamplerSpec,
    seed_offset: u64,
) -> Result<(SampledShape, ShapeCertificate), ScenarioError> {
    let sampled = sampler.sample(shape, seed_offset)?;
    let certified = certify_rho(&sampled, shape, default_validation_count(sampled.len()))?;
    let rho = certified.rho.expect("certified");
    let cert = ShapeCertificate {
        name: name.to_string(),
        n: certified.len(),
        rho,
        epsilon: 2.0 * rho,
    };
    Ok((certified, cert))
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<BuiltScenario, ScenarioError> {
    cfg.validate()?;
    let robot_sampler = cfg
        .robot
        .sampler
        .clone()
        .unwrap_or_else(|| cfg.sampler.clone());
    let (body_samples, body_certificate) =
        sample_and_certify("robot", &cfg.robot.shape, &robot_sampler, 0)?;

    let mut parts = Vec::new();
    let mut obstacle_certificates = Vec::new();
    let mut outlines = Vec::new();
    for (i, (name, shape, sampler)) in cfg.obstacle_shapes().into_iter().enumerate() {
        let (s, c) = sample_and_certify(&name, &shape, &sampler, i as u64 + 1)?;
        parts.push(s);
        obstacle_certificates.push(c);
        outlines.push(shape.outline(256)?);
    }
    let merged = SampledShape::merge(&parts);
    let rho_obstacle = merged.rho.expect("every part certified");
    let epsilon = certified_epsilon(body_certificate.rho, rho_obstacle, cfg.barrier.gamma);
    let barrier =
        BarrierConfig::with_r_bar_fraction(epsilon, cfg.barrier.gamma, cfg.barrier.r_bar_fraction)
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
    Ok(BuiltScenario {
        body: RobotBody::new(body_samples, cfg.robot.position_indices),
        obstacles: ObstacleField::new(merged, cfg.pair_scan.into())?,
        barrier,
        body_certificate,
        obstacle_certificates,
        outlines,
    })
}

pub fn build_oracle(cfg: &ScenarioConfig) -> Result<ClearanceOracle, ScenarioError> {
    let dense = |shape: &Shape, s: &SamplerSpec| -> Result<Vec<Point2<f64>>, ScenarioError> {
        Ok(sample_boundary_grid(shape, s.n * ORACLE_FACTOR)?.points)
    };
    let robot_sampler = cfg
        .robot
        .sampler
        .clone()
        .unwrap_or_else(|| cfg.sampler.clone());
    let body = dense(&cfg.robot.shape, &robot_sampler)?;
    let mut points = Vec::new();
    for (_, shape, sampler) in cfg.obstacle_shapes() {
        points.extend(dense(&shape, &sampler)?);
    }
    Ok(ClearanceOracle::new(&body, &points))
}
