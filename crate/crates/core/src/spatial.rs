//! Uniform-grid bucketing of planar point clouds.
//!
//! Used for exact nearest-neighbour and fixed-radius queries. Every distance
//! is evaluated with [`squared_distance`], so results are bit-identical to an
//! exhaustive scan over the same points.

use nalgebra::Point2;

/// Squared Euclidean distance, written out so every caller rounds the same way.
#[inline]
pub fn squared_distance(a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

#[derive(Debug, Clone)]
pub struct PointGrid {
    points: Vec<Point2<f64>>,
    origin: Point2<f64>,
    cell: f64,
    nx: usize,
    ny: usize,
    // CSR layout: indices of points in cell k are order[start[k]..start[k + 1]].
    start: Vec<usize>,
    order: Vec<usize>,
}

impl PointGrid {
    /// Builds a grid with roughly `target_per_cell` points per occupied cell.
    ///
    /// Panics if `points` is empty.
    pub fn new(points: &[Point2<f64>], target_per_cell: f64) -> Self {
        assert!(!points.is_empty(), "PointGrid needs at least one point");
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let w = hi.x - lo.x;
        let h = hi.y - lo.y;
        let extent = w.max(h);
        // Boundary samples are curve-like, so cell count scales with n, not n².
        let n = points.len() as f64;
        let mut cell = if extent > 0.0 {
            (w + h) / (n / target_per_cell.max(1.0)).max(1.0)
        } else {
            1.0
        };
        if cell <= 0.0 || !cell.is_finite() {
            cell = 1.0;
        }
        // Keep the table bounded for very elongated clouds.
        while (w / cell).ceil() * (h / cell).ceil() > 4.0 * n + 16.0 {
            cell *= 2.0;
        }
        let nx = ((w / cell).floor() as usize) + 1;
        let ny = ((h / cell).floor() as usize) + 1;

        let mut counts = vec![0usize; nx * ny + 1];
        let cell_of: Vec<usize> = points
            .iter()
            .map(|p| {
                let (cx, cy) = Self::clamp_cell(lo, cell, nx, ny, p);
                cy * nx + cx
            })
            .collect();
        for &k in &cell_of {
            counts[k + 1] += 1;
        }
        for k in 0..nx * ny {
            counts[k + 1] += counts[k];
        }
        let start = counts.clone();
        let mut fill = counts;
        let mut order = vec![0usize; points.len()];
        for (i, &k) in cell_of.iter().enumerate() {
            order[fill[k]] = i;
            fill[k] += 1;
        }
        Self {
            points: points.to_vec(),
            origin: lo,
            cell,
            nx,
            ny,
            start,
            order,
        }
    }

    pub fn points(&self) -> &[Point2<f64>] {
        &self.points
    }

    fn clamp_cell(
        origin: Point2<f64>,
        cell: f64,
        nx: usize,
        ny: usize,
        p: &Point2<f64>,
    ) -> (usize, usize) {
        let fx = ((p.x - origin.x) / cell).floor();
        let fy = ((p.y - origin.y) / cell).floor();
        let cx = fx.clamp(0.0, (nx - 1) as f64) as usize;
        let cy = fy.clamp(0.0, (ny - 1) as f64) as usize;
        (cx, cy)
    }

    fn raw_cell(&self, q: &Point2<f64>) -> (i64, i64) {
        (
            ((q.x - self.origin.x) / self.cell).floor() as i64,
            ((q.y - self.origin.y) / self.cell).floor() as i64,
        )
    }

    fn cell_points(&self, cx: i64, cy: i64) -> &[usize] {
        if cx < 0 || cy < 0 || cx >= self.nx as i64 || cy >= self.ny as i64 {
            return &[];
        }
        let k = cy as usize * self.nx + cx as usize;
        &self.order[self.start[k]..self.start[k + 1]]
    }

    /// Exact nearest neighbour; ties go to the lowest point index.
    pub fn nearest(&self, q: &Point2<f64>) -> (usize, f64) {
        let (qx, qy) = self.raw_cell(q);
        // Chebyshev distance from the query cell to the farthest grid cell.
        let max_ring = [
            qx.abs(),
            (qx - (self.nx as i64 - 1)).abs(),
            qy.abs(),
            (qy - (self.ny as i64 - 1)).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        // Rings that cannot touch the grid are skipped outright.
        let first_ring = [
            -qx,
            qx - (self.nx as i64 - 1),
            -qy,
            qy - (self.ny as i64 - 1),
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
        .max(0);

        let mut best = (usize::MAX, f64::INFINITY);
        let visit = |idx: usize, best: &mut (usize, f64)| {
            let d = squared_distance(q, &self.points[idx]);
            if d < best.1 || (d == best.1 && idx < best.0) {
                *best = (idx, d);
            }
        };
        for r in first_ring..=max_ring {
            if r == 0 {
                for &idx in self.cell_points(qx, qy) {
                    visit(idx, &mut best);
                }
            } else {
                for dx in -r..=r {
                    for &idx in self.cell_points(qx + dx, qy - r) {
                        visit(idx, &mut best);
                    }
                    for &idx in self.cell_points(qx + dx, qy + r) {
                        visit(idx, &mut best);
                    }
                }
                for dy in (-r + 1)..r {
                    for &idx in self.cell_points(qx - r, qy + dy) {
                        visit(idx, &mut best);
                    }
                    for &idx in self.cell_points(qx + r, qy + dy) {
                        visit(idx, &mut best);
                    }
                }
            }
            // Anything outside ring r is at least r cells away (minus rounding slack).
            let bound = (r as f64 * self.cell * (1.0 - 1e-9)).max(0.0);
            if best.0 != usize::MAX && best.1 < bound * bound {
                break;
            }
        }
        best
    }

    /// Calls `visit(index, squared_distance)` for every point with
    /// squared distance `<= radius_sq`, in no particular order.
    pub fn for_each_within<F: FnMut(usize, f64)>(
        &self,
        q: &Point2<f64>,
        radius_sq: f64,
        mut visit: F,
    ) {
        if radius_sq < 0.0 {
            return;
        }
        let r = radius_sq.sqrt() * (1.0 + 1e-9) + 1e-12;
        let lo = Point2::new(q.x - r, q.y - r);
        let hi = Point2::new(q.x + r, q.y + r);
        let (x0, y0) = self.raw_cell(&lo);
        let (x1, y1) = self.raw_cell(&hi);
        let x0 = x0.max(0);
        let y0 = y0.max(0);
        let x1 = x1.min(self.nx as i64 - 1);
        let y1 = y1.min(self.ny as i64 - 1);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &idx in self.cell_points(cx, cy) {
                    let d = squared_distance(q, &self.points[idx]);
                    if d <= radius_sq {
                        visit(idx, d);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Point2<f64>], q: &Point2<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<_> = (0..500)
            .map(|_| Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)))
            .collect();
        let grid = PointGrid::new(&points, 2.0);
        for _ in 0..2000 {
            let q = Point2::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
            assert_eq!(grid.nearest(&q), brute_nearest(&points, &q));
        }
    }

    #[test]
    fn nearest_prefers_lowest_index_on_ties() {
        let points = vec![
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 0.0),
            Point2::new(1.0, 0.0),
        ];
        let grid = PointGrid::new(&points, 1.0);
        assert_eq!(grid.nearest(&Point2::origin()).0, 0);
    }

    #[test]
    fn range_query_matches_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<_> = (0..300)
            .map(|_| Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect();
        let grid = PointGrid::new(&points, 3.0);
        let q = Point2::new(4.0, 6.0);
        let mut got = Vec::new();
        grid.for_each_within(&q, 2.25, |i, _| got.push(i));
        got.sort_unstable();
        let want: Vec<_> = (0..points.len())
            .filter(|&i| squared_distance(&q, &points[i]) <= 2.25)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn degenerate_single_point_cloud() {
        let grid = PointGrid::new(&[Point2::new(2.0, 2.0)], 1.0);
        assert_eq!(grid.nearest(&Point2::new(5.0, 6.0)), (0, 25.0));
    }
}
