//! Sampled squared distance between a robot body and obstacle samples, the
//! active pair set and the matching generalized-gradient set.
//!
//! For state `x` with position `p`, each pair `(e, o)` of a body offset and
//! an obstacle sample contributes the smooth piece `|p + e - o|^2`. The
//! sampled squared distance is the minimum over all pieces, the active set
//! holds every pair within `activation_tolerance` of that minimum, and the
//! gradient of an active piece is `2 (p + e - o)` on the position
//! coordinates and zero on the rest of the state.

use nalgebra::{DVector, Point2};
use thiserror::Error;

use crate::geometry::{GeometryError, RobotBody, SampledShape};
use crate::spatial::{squared_distance, PointGrid};

/// Default widening of the active set, in m².
pub const DEFAULT_ACTIVATION_TOLERANCE: f64 = 1e-8;

/// Pair count above which [`PairScan::Auto`] switches to the grid index.
pub const INDEX_PAIR_THRESHOLD: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("state has dimension {got}, needs at least {needed}")]
    DimensionMismatch { got: usize, needed: usize },
    #[error("activation tolerance must be a finite non-negative number, got {0}")]
    InvalidTolerance(f64),
}

impl From<GeometryError> for DistanceError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::DimensionMismatch { got, needed } => {
                DistanceError::DimensionMismatch { got, needed }
            }
            _ => DistanceError::EmptySampleSet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivePair {
    pub body_index: usize,
    pub obstacle_index: usize,
    /// Body offset sample.
    pub e: Point2<f64>,
    /// Obstacle sample.
    pub o: Point2<f64>,
    pub squared_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEvaluation {
    pub min_squared: f64,
    /// Sorted by (body index, obstacle index); the first pair attaining
    /// `min_squared` is the tie-broken minimizer.
    pub active: Vec<ActivePair>,
    pub gradients: Vec<DVector<f64>>,
    pub activation_tolerance: f64,
}

impl DistanceEvaluation {
    pub fn min_distance(&self) -> f64 {
        self.min_squared.sqrt()
    }

    pub fn minimizer(&self) -> &ActivePair {
        self.active
            .iter()
            .find(|p| p.squared_distance == self.min_squared)
            .unwrap_or(&self.active[0])
    }
}

/// Exact minimum over all `|body| * |obstacles|` pairs and the minimizing
/// `(body index, obstacle index)`; ties go to the lexicographically lowest.
pub fn sampled_min_squared(
    body_points: &[Point2<f64>],
    obstacle_points: &[Point2<f64>],
) -> Result<(f64, (usize, usize)), DistanceError> {
    if body_points.is_empty() || obstacle_points.is_empty() {
        return Err(DistanceError::EmptySampleSet);
    }
    let mut best = (f64::INFINITY, (0, 0));
    for (i, v) in body_points.iter().enumerate() {
        for (j, o) in obstacle_points.iter().enumerate() {
            let d = squared_distance(v, o);
            if d < best.0 {
                best = (d, (i, j));
            }
        }
    }
    Ok(best)
}

/// How the pairwise minimum is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairScan {
    /// Exhaustive double loop.
    Exhaustive,
    /// Grid index over the obstacle samples.
    Indexed,
    /// Index only above [`INDEX_PAIR_THRESHOLD`] pairs.
    #[default]
    Auto,
}

/// Obstacle samples prepared for repeated distance queries.
#[derive(Debug, Clone)]
pub struct ObstacleField {
    samples: SampledShape,
    index: Option<PointGrid>,
    scan: PairScan,
}

impl ObstacleField {
    pub fn new(samples: SampledShape, scan: PairScan) -> Result<Self, DistanceError> {
        if samples.is_empty() {
            return Err(DistanceError::EmptySampleSet);
        }
        let index = match scan {
            PairScan::Exhaustive => None,
            _ => Some(PointGrid::new(&samples.points, 4.0)),
        };
        Ok(Self {
            samples,
            index,
            scan,
        })
    }

    pub fn samples(&self) -> &SampledShape {
        &self.samples
    }

    pub fn scan(&self) -> PairScan {
        self.scan
    }

    fn use_index(&self, body_len: usize) -> bool {
        match self.scan {
            PairScan::Exhaustive => false,
            PairScan::Indexed => true,
            PairScan::Auto => body_len * self.samples.len() > INDEX_PAIR_THRESHOLD,
        }
    }

    pub fn evaluate(
        &self,
        x: &DVector<f64>,
        body: &RobotBody,
        activation_tolerance: f64,
    ) -> Result<DistanceEvaluation, DistanceError> {
        if !(activation_tolerance >= 0.0 && activation_tolerance.is_finite()) {
            return Err(DistanceError::InvalidTolerance(activation_tolerance));
        }
        if body.offset_set.is_empty() {
            return Err(DistanceError::EmptySampleSet);
        }
        let p = body.position(x)?;
        let offsets = &body.offset_set.points;
        let obstacles = &self.samples.points;
        let translated: Vec<Point2<f64>> = offsets
            .iter()
            .map(|e| Point2::new(p.x + e.x, p.y + e.y))
            .collect();

        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        let min_squared;
        match (&self.index, self.use_index(offsets.len())) {
            (Some(index), true) => {
                // Upper bound from the body sample closest to the obstacle
                // sample nearest the body origin.
                let (j0, _) = index.nearest(&p);
                let o0 = obstacles[j0];
                let i0 = (0..translated.len())
                    .min_by(|&a, &b| {
                        squared_distance(&translated[a], &o0)
                            .total_cmp(&squared_distance(&translated[b], &o0))
                    })
                    .expect("body is non-empty");
                let upper = index.nearest(&translated[i0]).1;
                // Every pair within `upper + tol` has its obstacle sample
                // within sqrt(upper + tol) + reach of the origin.
                let reach = offsets.iter().map(|e| e.coords.norm()).fold(0.0, f64::max);
                let radius = ((upper + activation_tolerance).sqrt() + reach) * (1.0 + 1e-9);
                let mut candidates = Vec::new();
                index.for_each_within(&p, radius * radius, |j, _| candidates.push(j));
                candidates.sort_unstable();
                let mut m = f64::INFINITY;
                for v in &translated {
                    for &j in &candidates {
                        m = m.min(squared_distance(v, &obstacles[j]));
                    }
                }
                min_squared = m;
                let threshold = min_squared + activation_tolerance;
                for (i, v) in translated.iter().enumerate() {
                    for &j in &candidates {
                        let d = squared_distance(v, &obstacles[j]);
                        if d <= threshold {
                            pairs.push((i, j, d));
                        }
                    }
                }
            }
            _ => {
                let mut m = f64::INFINITY;
                for v in &translated {
                    for o in obstacles {
                        m = m.min(squared_distance(v, o));
                    }
                }
                min_squared = m;
                let threshold = min_squared + activation_tolerance;
                for (i, v) in translated.iter().enumerate() {
                    for (j, o) in obstacles.iter().enumerate() {
                        let d = squared_distance(v, o);
                        if d <= threshold {
                            pairs.push((i, j, d));
                        }
                    }
                }
            }
        }

        let n_x = x.len();
        let [ix, iy] = body.position_indices;
        let mut active = Vec::with_capacity(pairs.len());
        let mut gradients = Vec::with_capacity(pairs.len());
        for (i, j, d) in pairs {
            let v = translated[i];
            let o = obstacles[j];
            let mut grad = DVector::zeros(n_x);
            grad[ix] = 2.0 * (v.x - o.x);
            grad[iy] = 2.0 * (v.y - o.y);
            gradients.push(grad);
            active.push(ActivePair {
                body_index: i,
                obstacle_index: j,
                e: offsets[i],
                o,
                squared_distance: d,
            });
        }
        Ok(DistanceEvaluation {
            min_squared,
            active,
            gradients,
            activation_tolerance,
        })
    }
}

/// One-shot evaluation with an exhaustive scan.
pub fn evaluate_distance(
    x: &DVector<f64>,
    body: &RobotBody,
    obstacles: &SampledShape,
    activation_tolerance: f64,
) -> Result<DistanceEvaluation, DistanceError> {
    ObstacleField::new(obstacles.clone(), PairScan::Exhaustive)?.evaluate(
        x,
        body,
        activation_tolerance,
    )
}
