//! Planar shapes, boundary samplers and covering-radius certificates.
//!
//! Shapes are sampled on their boundary only. A [`SampledShape`] carries the
//! squared-metric covering radius `rho` of its samples with respect to the
//! shape boundary, and the per-shape sampling error `epsilon = 2 * rho`.
//!
//! Units: coordinates in metres, `rho` and `epsilon` in square metres.

use std::f64::consts::{PI, TAU};

use nalgebra::{DVector, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::PointGrid;

/// Membership slack used by [`Shape::contains`].
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;

/// Default validation density factor for [`certify_rho`].
pub const VALIDATION_FACTOR: usize = 100;
pub const MAX_VALIDATION_POINTS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape has no boundary parameterization: {0}")]
    UnsupportedShape(String),
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("validation set of {got} points is sparser than the required {required}")]
    ValidationTooSparse { got: usize, required: usize },
    #[error("state has dimension {got}, needs at least {needed}")]
    DimensionMismatch { got: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point2<f64>,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point2<f64>, radius: f64) -> Self {
        Self { center, radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Disc(Disc),
    Rectangle {
        min_corner: Point2<f64>,
        max_corner: Point2<f64>,
    },
    /// Possibly nonconvex union; only the exposed arcs form the boundary.
    UnionOfDiscs {
        discs: Vec<Disc>,
    },
    /// Simple polygon, vertices counter-clockwise.
    Polygon {
        vertices: Vec<Point2<f64>>,
    },
    /// Degenerate single point, e.g. a point robot.
    Point {
        at: Point2<f64>,
    },
}

impl Shape {
    pub fn disc(cx: f64, cy: f64, radius: f64) -> Self {
        Shape::Disc(Disc::new(Point2::new(cx, cy), radius))
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Shape::Rectangle {
            min_corner: Point2::new(x0, y0),
            max_corner: Point2::new(x1, y1),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let invalid = |m: String| Err(GeometryError::InvalidShape(m));
        match self {
            Shape::Disc(d) => check_disc(d),
            Shape::Rectangle {
                min_corner,
                max_corner,
            } => {
                if !(min_corner.x.is_finite()
                    && min_corner.y.is_finite()
                    && max_corner.x.is_finite()
                    && max_corner.y.is_finite())
                {
                    return invalid("rectangle corners must be finite".into());
                }
                if max_corner.x > min_corner.x && max_corner.y > min_corner.y {
                    Ok(())
                } else {
                    invalid(format!(
                        "max_corner {:?} must strictly dominate min_corner {:?}",
                        max_corner.coords.as_slice(),
                        min_corner.coords.as_slice()
                    ))
                }
            }
            Shape::UnionOfDiscs { discs } => {
                if discs.is_empty() {
                    return invalid("union of discs is empty".into());
                }
                discs.iter().try_for_each(check_disc)
            }
            Shape::Polygon { vertices } => check_polygon(vertices),
            Shape::Point { at } => {
                if at.x.is_finite() && at.y.is_finite() {
                    Ok(())
                } else {
                    invalid("point must be finite".into())
                }
            }
        }
    }

    /// Whether `p` lies in the closed shape, up to `tol`.
    pub fn contains(&self, p: &Point2<f64>, tol: f64) -> bool {
        self.distance_to_point(p) <= tol
    }

    /// Euclidean distance from `p` to the closed shape (zero inside).
    pub fn distance_to_point(&self, p: &Point2<f64>) -> f64 {
        match self {
            Shape::Disc(d) => ((p - d.center).norm() - d.radius).max(0.0),
            Shape::Rectangle {
                min_corner,
                max_corner,
            } => {
                let dx = (min_corner.x - p.x).max(0.0).max(p.x - max_corner.x);
                let dy = (min_corner.y - p.y).max(0.0).max(p.y - max_corner.y);
                dx.hypot(dy)
            }
            Shape::UnionOfDiscs { discs } => discs
                .iter()
                .map(|d| ((p - d.center).norm() - d.radius).max(0.0))
                .fold(f64::INFINITY, f64::min),
            Shape::Polygon { vertices } => {
                if point_in_polygon(vertices, p) {
                    0.0
                } else {
                    polygon_edges(vertices)
                        .map(|(a, b)| point_segment_distance(p, &a, &b))
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Shape::Point { at } => (p - at).norm(),
        }
    }

    /// Arc-length parameterization of the shape boundary.
    pub fn boundary(&self) -> Result<Boundary, GeometryError> {
        self.validate()?;
        let pieces = match self {
            Shape::Disc(d) => vec![BoundaryPiece::Arc {
                center: d.center,
                radius: d.radius,
                start_angle: 0.0,
                sweep: TAU,
            }],
            Shape::Rectangle {
                min_corner: a,
                max_corner: c,
            } => {
                let b = Point2::new(c.x, a.y);
                let d = Point2::new(a.x, c.y);
                vec![
                    BoundaryPiece::Segment { start: *a, end: b },
                    BoundaryPiece::Segment { start: b, end: *c },
                    BoundaryPiece::Segment { start: *c, end: d },
                    BoundaryPiece::Segment { start: d, end: *a },
                ]
            }
            Shape::Polygon { vertices } => polygon_edges(vertices)
                .map(|(start, end)| BoundaryPiece::Segment { start, end })
                .collect(),
            Shape::UnionOfDiscs { discs } => exposed_arcs(discs),
            Shape::Point { at } => vec![BoundaryPiece::Segment {
                start: *at,
                end: *at,
            }],
        };
        let boundary = Boundary::new(pieces);
        if boundary.length() <= 0.0 && !matches!(self, Shape::Point { .. }) {
            return Err(GeometryError::UnsupportedShape(
                "boundary has zero length".into(),
            ));
        }
        Ok(boundary)
    }

    /// Dense outline for plotting.
    pub fn outline(&self, n: usize) -> Result<Vec<Point2<f64>>, GeometryError> {
        let b = self.boundary()?;
        let n = n.max(1);
        Ok((0..n)
            .map(|k| b.point_at(b.length() * k as f64 / n as f64))
            .collect())
    }
}

fn check_disc(d: &Disc) -> Result<(), GeometryError> {
    if !(d.center.x.is_finite() && d.center.y.is_finite()) {
        return Err(GeometryError::InvalidShape(
            "disc center must be finite".into(),
        ));
    }
    if d.radius > 0.0 && d.radius.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::InvalidShape(format!(
            "disc radius must be positive, got {}",
            d.radius
        )))
    }
}

fn polygon_edges(
    vertices: &[Point2<f64>],
) -> impl Iterator<Item = (Point2<f64>, Point2<f64>)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn signed_area(vertices: &[Point2<f64>]) -> f64 {
    polygon_edges(vertices)
        .map(|(a, b)| a.x * b.y - b.x * a.y)
        .sum::<f64>()
        * 0.5
}

fn segments_intersect(
    p1: &Point2<f64>,
    p2: &Point2<f64>,
    q1: &Point2<f64>,
    q2: &Point2<f64>,
) -> bool {
    let d1 = cross(&(p2 - p1), &(q1 - p1));
    let d2 = cross(&(p2 - p1), &(q2 - p1));
    let d3 = cross(&(q2 - q1), &(p1 - q1));
    let d4 = cross(&(q2 - q1), &(p2 - q1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: &Point2<f64>, b: &Point2<f64>, p: &Point2<f64>, d: f64| {
        d == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
    };
    on(p1, p2, q1, d1) || on(p1, p2, q2, d2) || on(q1, q2, p1, d3) || on(q1, q2, p2, d4)
}

fn check_polygon(vertices: &[Point2<f64>]) -> Result<(), GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::InvalidShape(format!(
            "polygon needs at least 3 vertices, got {n}"
        )));
    }
    if vertices
        .iter()
        .any(|v| !(v.x.is_finite() && v.y.is_finite()))
    {
        return Err(GeometryError::InvalidShape(
            "polygon vertices must be finite".into(),
        ));
    }
    for i in 0..n {
        if vertices[i] == vertices[(i + 1) % n] {
            return Err(GeometryError::InvalidShape(format!(
                "polygon has a repeated vertex at index {i}"
            )));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // Adjacent edges share a vertex by construction.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(&a, &b, &c, &d) {
                return Err(GeometryError::InvalidShape(format!(
                    "polygon edges {i} and {j} intersect"
                )));
            }
        }
    }
    if signed_area(vertices) <= 0.0 {
        return Err(GeometryError::InvalidShape(
            "polygon vertices must be counter-clockwise".into(),
        ));
    }
    Ok(())
}

fn point_in_polygon(vertices: &[Point2<f64>], p: &Point2<f64>) -> bool {
    let mut inside = false;
    for (a, b) in polygon_edges(vertices) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Arcs of each disc not covered by any other disc, in disc order and
/// increasing angle from 0.
fn exposed_arcs(discs: &[Disc]) -> Vec<BoundaryPiece> {
    let mut pieces = Vec::new();
    for (i, di) in discs.iter().enumerate() {
        let mut covered: Vec<(f64, f64)> = Vec::new();
        let mut fully_covered = false;
        for (j, dj) in discs.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = (dj.center - di.center).norm();
            if d >= di.radius + dj.radius {
                continue;
            }
            let identical = d == 0.0 && di.radius == dj.radius;
            if identical {
                // Keep the first copy of duplicated discs.
                if j < i {
                    fully_covered = true;
                    break;
                }
                continue;
            }
            if d + di.radius <= dj.radius {
                fully_covered = true;
                break;
            }
            if d + dj.radius <= di.radius {
                continue;
            }
            let phi = (dj.center.y - di.center.y).atan2(dj.center.x - di.center.x);
            let cos_beta = ((di.radius * di.radius + d * d - dj.radius * dj.radius)
                / (2.0 * di.radius * d))
                .clamp(-1.0, 1.0);
            let beta = cos_beta.acos();
            let lo = (phi - beta).rem_euclid(TAU);
            let hi = lo + 2.0 * beta;
            if hi > TAU {
                covered.push((lo, TAU));
                covered.push((0.0, hi - TAU));
            } else {
                covered.push((lo, hi));
            }
        }
        if fully_covered {
            continue;
        }
        covered.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cursor = 0.0;
        let mut free: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in covered {
            if lo > cursor {
                free.push((cursor, lo));
            }
            cursor = cursor.max(hi);
        }
        if cursor < TAU {
            free.push((cursor, TAU));
        }
        // An arc ending at 2π continues the one starting at 0.
        if free.len() >= 2 && free[0].0 == 0.0 && free[free.len() - 1].1 == TAU {
            let last = free.pop().unwrap();
            free[0] = (last.0, TAU + free[0].1);
        }
        for (lo, hi) in free {
            if hi > lo {
                pieces.push(BoundaryPiece::Arc {
                    center: di.center,
                    radius: di.radius,
                    start_angle: lo,
                    sweep: hi - lo,
                });
            }
        }
    }
    pieces
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryPiece {
    Segment {
        start: Point2<f64>,
        end: Point2<f64>,
    },
    Arc {
        center: Point2<f64>,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl BoundaryPiece {
    pub fn length(&self) -> f64 {
        match self {
            BoundaryPiece::Segment { start, end } => (end - start).norm(),
            BoundaryPiece::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    /// Point at arc length `s` from the piece start, `s` clamped to the piece.
    pub fn point_at(&self, s: f64) -> Point2<f64> {
        let len = self.length();
        let s = s.clamp(0.0, len);
        match self {
            BoundaryPiece::Segment { start, end } => {
                if len == 0.0 {
                    *start
                } else {
                    start + (end - start) * (s / len)
                }
            }
            BoundaryPiece::Arc {
                center,
                radius,
                start_angle,
                ..
            } => {
                let a = start_angle + s / radius;
                Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
            }
        }
    }

    fn endpoints(&self) -> [Point2<f64>; 2] {
        [self.point_at(0.0), self.point_at(self.length())]
    }
}

/// Boundary as a chain of pieces with cumulative arc length.
#[derive(Debug, Clone)]
pub struct Boundary {
    pieces: Vec<BoundaryPiece>,
    cumulative: Vec<f64>,
}

impl Boundary {
    fn new(pieces: Vec<BoundaryPiece>) -> Self {
        let mut cumulative = Vec::with_capacity(pieces.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for p in &pieces {
            acc += p.length();
            cumulative.push(acc);
        }
        Self { pieces, cumulative }
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Point at arc length `s` along the whole boundary; wraps modulo length.
    pub fn point_at(&self, s: f64) -> Point2<f64> {
        let total = self.length();
        if total == 0.0 {
            return self.pieces[0].point_at(0.0);
        }
        let s = s.rem_euclid(total);
        // Last piece whose start is <= s.
        let k = match self.cumulative[..self.pieces.len()].binary_search_by(|c| c.total_cmp(&s)) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        self.pieces[k].point_at(s - self.cumulative[k])
    }

    /// `n` equally spaced points starting at arc length 0.
    pub fn grid(&self, n: usize) -> Vec<Point2<f64>> {
        let total = self.length();
        (0..n)
            .map(|k| self.point_at(total * k as f64 / n as f64))
            .collect()
    }

    /// Validation set: `n` equally spaced points plus every piece endpoint.
    /// Any boundary point lies within arc length `length / n / 2` of a member
    /// on the same piece.
    fn validation_points(&self, n: usize) -> Vec<Point2<f64>> {
        let mut pts = self.grid(n);
        for piece in &self.pieces {
            pts.extend(piece.endpoints());
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    BoundaryGrid,
    BoundaryUniformRandom,
    Explicit,
}

/// Finite point cloud standing in for a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledShape {
    pub points: Vec<Point2<f64>>,
    /// Squared-metric covering radius over the shape boundary, once certified.
    pub rho: Option<f64>,
    /// Per-shape sampling error `2 * rho`, once certified.
    pub epsilon: Option<f64>,
    pub source: SampleSource,
}

impl SampledShape {
    pub fn explicit(points: Vec<Point2<f64>>) -> Self {
        Self {
            points,
            rho: None,
            epsilon: None,
            source: SampleSource::Explicit,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Concatenates several clouds. The merged covering radius is the largest
    /// member radius, and is unknown if any member is uncertified.
    pub fn merge(parts: &[SampledShape]) -> Self {
        let points = parts
            .iter()
            .flat_map(|p| p.points.iter().copied())
            .collect();
        let rho = parts
            .iter()
            .map(|p| p.rho)
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)));
        Self {
            points,
            rho,
            epsilon: rho.map(|r| 2.0 * r),
            source: SampleSource::Explicit,
        }
    }
}

/// `n` points at equal arc-length spacing, starting at angle 0 (discs and
/// arcs) or at the first vertex (rectangles start at `min_corner`).
pub fn sample_boundary_grid(shape: &Shape, n: usize) -> Result<SampledShape, GeometryError> {
    if n < 3 {
        return Err(GeometryError::TooFewSamples(n));
    }
    let boundary = shape.boundary()?;
    Ok(SampledShape {
        points: boundary.grid(n),
        rho: None,
        epsilon: None,
        source: SampleSource::BoundaryGrid,
    })
}

/// `n` i.i.d. points uniform in arc length over the boundary.
pub fn sample_boundary_uniform(
    shape: &Shape,
    n: usize,
    seed: u64,
) -> Result<SampledShape, GeometryError> {
    if n < 3 {
        return Err(GeometryError::TooFewSamples(n));
    }
    let boundary = shape.boundary()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = boundary.length();
    let points = (0..n)
        .map(|_| boundary.point_at(rng.random::<f64>() * total))
        .collect();
    Ok(SampledShape {
        points,
        rho: None,
        epsilon: None,
        source: SampleSource::BoundaryUniformRandom,
    })
}

/// Default validation count for a cloud of `n_points` samples.
pub fn default_validation_count(n_points: usize) -> usize {
    (VALIDATION_FACTOR * n_points).clamp(10 * n_points, MAX_VALIDATION_POINTS.max(10 * n_points))
}

/// Certifies the squared-metric covering radius of `sampled` over the
/// boundary of `shape`.
///
/// The largest nearest-sample distance over a dense validation set is
/// inflated by half the validation spacing, which bounds the nearest-sample
/// distance of every boundary point, not just the validation points.
pub fn certify_rho(
    sampled: &SampledShape,
    shape: &Shape,
    validation_n: usize,
) -> Result<SampledShape, GeometryError> {
    if sampled.points.is_empty() {
        return Err(GeometryError::InvalidShape("sample set is empty".into()));
    }
    let required = 10 * sampled.points.len();
    if validation_n < required {
        return Err(GeometryError::ValidationTooSparse {
            got: validation_n,
            required,
        });
    }
    let boundary = shape.boundary()?;
    let validation = boundary.validation_points(validation_n);
    let grid = PointGrid::new(&sampled.points, 2.0);
    let worst = validation
        .iter()
        .map(|q| grid.nearest(q).1)
        .fold(0.0f64, f64::max);
    let half_spacing = 0.5 * boundary.length() / validation_n as f64;
    let rho = (worst.sqrt() + half_spacing).powi(2);
    Ok(SampledShape {
        rho: Some(rho),
        epsilon: Some(2.0 * rho),
        ..sampled.clone()
    })
}

/// Rigid body described by a state-independent offset cloud, translated by
/// two position coordinates of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotBody {
    pub offset_set: SampledShape,
    pub position_indices: [usize; 2],
}

impl RobotBody {
    pub fn new(offset_set: SampledShape, position_indices: [usize; 2]) -> Self {
        Self {
            offset_set,
            position_indices,
        }
    }

    pub fn position(&self, x: &DVector<f64>) -> Result<Point2<f64>, GeometryError> {
        let needed = self.position_indices[0].max(self.position_indices[1]) + 1;
        if x.len() < needed {
            return Err(GeometryError::DimensionMismatch {
                got: x.len(),
                needed,
            });
        }
        Ok(Point2::new(
            x[self.position_indices[0]],
            x[self.position_indices[1]],
        ))
    }
}

/// Body samples at state `x`: each offset translated by the position slice.
pub fn robot_body_at(
    body: &RobotBody,
    x: &DVector<f64>,
) -> Result<Vec<Point2<f64>>, GeometryError> {
    let p = body.position(x)?;
    Ok(body
        .offset_set
        .points
        .iter()
        .map(|e| Point2::new(p.x + e.x, p.y + e.y))
        .collect())
}

/// Covering radius of an `n`-point grid on a circle of radius `r`: the
/// squared chord from a sample to the midpoint of its gap.
pub fn circle_grid_rho(radius: f64, n: usize) -> f64 {
    (2.0 * radius * (PI / (2.0 * n as f64)).sin()).powi(2)
}

/// Largest nearest-sample squared distance over `queries`. Test helper for
/// covering checks.
pub fn max_nearest_squared(samples: &[Point2<f64>], queries: &[Point2<f64>]) -> f64 {
    let grid = PointGrid::new(samples, 2.0);
    queries
        .iter()
        .map(|q| grid.nearest(q).1)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> Shape {
        Shape::Polygon {
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
        }
    }

    #[test]
    fn disc_grid_quarter_points() {
        let s = sample_boundary_grid(&Shape::disc(0.0, 0.0, 1.0), 4).unwrap();
        let want = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (p, (x, y)) in s.points.iter().zip(want) {
            assert_abs_diff_eq!(p.x, x, epsilon = 1e-15);
            assert_abs_diff_eq!(p.y, y, epsilon = 1e-15);
        }
        assert_eq!(s.rho, None);
        assert_eq!(s.source, SampleSource::BoundaryGrid);
    }

    #[test]
    fn rectangle_grid_walks_perimeter() {
        let s = sample_boundary_grid(&Shape::rectangle(0.0, 0.0, 2.0, 1.0), 6).unwrap();
        let want = [
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (2.0, 1.0),
            (1.0, 1.0),
            (0.0, 1.0),
        ];
        for (p, (x, y)) in s.points.iter().zip(want) {
            assert_abs_diff_eq!(p.x, x, epsilon = 1e-12);
            assert_abs_diff_eq!(p.y, y, epsilon = 1e-12);
        }
        for w in s.points.windows(2) {
            assert_abs_diff_eq!((w[1] - w[0]).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn disc_grid_points_on_circle() {
        let s = sample_boundary_grid(&Shape::disc(0.0, 0.0, 0.5), 100).unwrap();
        assert_eq!(s.len(), 100);
        for p in &s.points {
            assert_abs_diff_eq!(p.coords.norm(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let shape = Shape::disc(0.0, 0.0, 1.0);
        assert_eq!(
            sample_boundary_grid(&shape, 2),
            Err(GeometryError::TooFewSamples(2))
        );
        assert_eq!(
            sample_boundary_uniform(&shape, 0, 1),
            Err(GeometryError::TooFewSamples(0))
        );
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Shape::disc(0.0, 0.0, 0.0).validate().is_err());
        assert!(Shape::rectangle(0.0, 0.0, 1.0, 0.0).validate().is_err());
        let bowtie = Shape::Polygon {
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
        };
        assert!(matches!(
            bowtie.validate(),
            Err(GeometryError::InvalidShape(_))
        ));
        let clockwise = Shape::Polygon {
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(1.0, 1.0),
                Point2::new(1.0, 0.0),
            ],
        };
        assert!(clockwise.validate().is_err());
        assert!(unit_square().validate().is_ok());
        assert!(Shape::UnionOfDiscs { discs: vec![] }.validate().is_err());
    }

    #[test]
    fn uniform_sampler_is_seeded() {
        let shape = Shape::disc(0.0, 0.0, 1.0);
        let a = sample_boundary_uniform(&shape, 1000, 7).unwrap();
        let b = sample_boundary_uniform(&shape, 1000, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_boundary_uniform(&shape, 1000, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn uniform_disc_mean_near_center() {
        // Var of each coordinate is 1/2, so the sample mean has sd ~0.022.
        let s = sample_boundary_uniform(&Shape::disc(0.0, 0.0, 1.0), 1000, 7).unwrap();
        let mean = s
            .points
            .iter()
            .fold(Vector2::zeros(), |acc, p| acc + p.coords)
            / 1000.0;
        assert!(mean.norm() < 0.1, "mean {mean:?}");
    }

    #[test]
    fn uniform_square_edges_balanced() {
        // Binomial(400, 1/4): mean 100, sd ~8.7, so ±40 is over 4.6 sd.
        let s = sample_boundary_uniform(&unit_square(), 400, 1).unwrap();
        let mut counts = [0usize; 4];
        for p in &s.points {
            let edge = if p.y.abs() < 1e-12 && p.x < 1.0 {
                0
            } else if (p.x - 1.0).abs() < 1e-12 && p.y < 1.0 {
                1
            } else if (p.y - 1.0).abs() < 1e-12 && p.x > 0.0 {
                2
            } else {
                3
            };
            counts[edge] += 1;
        }
        for c in counts {
            assert!((60..=140).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn union_boundary_excludes_overlap() {
        let shape = Shape::UnionOfDiscs {
            discs: vec![
                Disc::new(Point2::new(0.0, 0.0), 1.0),
                Disc::new(Point2::new(1.0, 0.0), 1.0),
            ],
        };
        let b = shape.boundary().unwrap();
        // Each circle loses an arc of 2π/3 (half-angle acos(1/2)).
        assert_abs_diff_eq!(b.length(), 2.0 * (TAU - 2.0 * PI / 3.0), epsilon = 1e-12);
        let s = sample_boundary_grid(&shape, 500).unwrap();
        for p in &s.points {
            let d0 = (p - Point2::new(0.0, 0.0)).norm();
            let d1 = (p - Point2::new(1.0, 0.0)).norm();
            assert!(d0 >= 1.0 - 1e-9 && d1 >= 1.0 - 1e-9);
            assert!(shape.contains(p, MEMBERSHIP_TOLERANCE));
        }
    }

    #[test]
    fn union_with_nested_and_duplicate_discs() {
        let big = Disc::new(Point2::new(0.0, 0.0), 2.0);
        let shape = Shape::UnionOfDiscs {
            discs: vec![big, Disc::new(Point2::new(0.5, 0.0), 0.5), big],
        };
        let b = shape.boundary().unwrap();
        assert_abs_diff_eq!(b.length(), TAU * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn union_arc_wrapping_through_zero() {
        // Second disc covers the arc around angle π of the first, leaving one
        // exposed arc that passes through angle 0.
        let shape = Shape::UnionOfDiscs {
            discs: vec![
                Disc::new(Point2::new(0.0, 0.0), 1.0),
                Disc::new(Point2::new(-1.0, 0.0), 1.0),
            ],
        };
        let b = shape.boundary().unwrap();
        assert_eq!(b.pieces().len(), 2);
    }

    #[test]
    fn certify_disc_matches_chord() {
        let shape = Shape::disc(0.0, 0.0, 0.5);
        let s = sample_boundary_grid(&shape, 100).unwrap();
        let c = certify_rho(&s, &shape, 10_000).unwrap();
        let chord = circle_grid_rho(0.5, 100);
        assert_abs_diff_eq!(chord, 2.467e-4, epsilon = 1e-6);
        let rho = c.rho.unwrap();
        assert!(
            rho >= chord && rho <= 1.05 * chord,
            "rho {rho} chord {chord}"
        );
        assert_eq!(c.epsilon, Some(2.0 * rho));
    }

    #[test]
    fn certify_point_is_exact() {
        let shape = Shape::Point {
            at: Point2::new(1.0, 2.0),
        };
        let s = SampledShape::explicit(vec![Point2::new(1.0, 2.0)]);
        let c = certify_rho(&s, &shape, 10).unwrap();
        assert_eq!(c.rho, Some(0.0));
        assert_eq!(c.epsilon, Some(0.0));
    }

    #[test]
    fn certify_refinement_monotone() {
        let shape = Shape::disc(0.0, 0.0, 1.0);
        let rho = |n| {
            let s = sample_boundary_grid(&shape, n).unwrap();
            certify_rho(&s, &shape, default_validation_count(n))
                .unwrap()
                .rho
                .unwrap()
        };
        assert!(rho(8) < rho(4));
    }

    #[test]
    fn certify_rejects_sparse_validation() {
        let shape = Shape::disc(0.0, 0.0, 1.0);
        let s = sample_boundary_grid(&shape, 10).unwrap();
        assert!(matches!(
            certify_rho(&s, &shape, 50),
            Err(GeometryError::ValidationTooSparse { .. })
        ));
    }

    #[test]
    fn body_translation() {
        let body = RobotBody::new(SampledShape::explicit(vec![Point2::origin()]), [0, 1]);
        let x = DVector::from_vec(vec![3.0, 4.0, 0.7]);
        assert_eq!(
            robot_body_at(&body, &x).unwrap(),
            vec![Point2::new(3.0, 4.0)]
        );

        let body = RobotBody::new(
            SampledShape::explicit(vec![Point2::new(0.1, 0.0), Point2::new(-0.1, 0.0)]),
            [0, 1],
        );
        let pts = robot_body_at(&body, &DVector::from_vec(vec![1.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(pts[0].x, 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(pts[1].x, 0.9, epsilon = 1e-15);

        let disc = sample_boundary_grid(&Shape::disc(0.0, 0.0, 0.2), 16).unwrap();
        let body = RobotBody::new(disc, [0, 1]);
        let pts = robot_body_at(&body, &DVector::from_vec(vec![2.0, 0.0, PI])).unwrap();
        for p in pts {
            assert_abs_diff_eq!((p - Point2::new(2.0, 0.0)).norm(), 0.2, epsilon = 1e-12);
        }

        let short = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            robot_body_at(&body, &short),
            Err(GeometryError::DimensionMismatch { got: 1, needed: 2 })
        ));
    }

    #[test]
    fn distance_to_point_per_variant() {
        assert_abs_diff_eq!(
            Shape::disc(0.0, 0.0, 1.0).distance_to_point(&Point2::new(3.0, 0.0)),
            2.0
        );
        let r = Shape::rectangle(0.0, 0.0, 2.0, 1.0);
        assert_abs_diff_eq!(r.distance_to_point(&Point2::new(5.0, 5.0)), 5.0);
        assert_eq!(r.distance_to_point(&Point2::new(1.0, 0.5)), 0.0);
        assert_abs_diff_eq!(
            unit_square().distance_to_point(&Point2::new(0.5, -2.0)),
            2.0
        );
        assert_eq!(unit_square().distance_to_point(&Point2::new(0.5, 0.5)), 0.0);
    }
}
