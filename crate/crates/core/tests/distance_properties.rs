use nalgebra::{DVector, Point2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sampled_cbf::distance::{sampled_min_squared, ObstacleField, PairScan};
use sampled_cbf::geometry::{robot_body_at, sample_boundary_grid, RobotBody, SampledShape, Shape};

fn cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Point2<f64>> {
    (0..n)
        .map(|_| {
            Point2::new(
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
            )
        })
        .collect()
}

fn brute(body: &[Point2<f64>], obs: &[Point2<f64>]) -> f64 {
    let mut m = f64::INFINITY;
    for v in body {
        for o in obs {
            m = m.min((v - o).norm_squared());
        }
    }
    m
}

#[test]
fn min_squared_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let nb = rng.random_range(1..30);
        let no = rng.random_range(1..60);
        let body = cloud(&mut rng, nb, 1.0);
        let obs = cloud(&mut rng, no, 5.0);
        let (d, (i, j)) = sampled_min_squared(&body, &obs).unwrap();
        assert_eq!(d, brute(&body, &obs));
        assert_eq!(d, (body[i] - obs[j]).norm_squared());
    }
}

#[test]
fn indexed_scan_matches_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let body_shape = Shape::disc(0.0, 0.0, 0.3);
    for trial in 0..300 {
        let body = RobotBody::new(
            sample_boundary_grid(&body_shape, 10 + trial % 40).unwrap(),
            [0, 1],
        );
        let obs = SampledShape::explicit(cloud(&mut rng, 50 + trial * 3, 4.0));
        let ex = ObstacleField::new(obs.clone(), PairScan::Exhaustive).unwrap();
        let ix = ObstacleField::new(obs, PairScan::Indexed).unwrap();
        let x = DVector::from_vec(vec![
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            0.3,
        ]);
        for tol in [0.0, 1e-8, 1e-3, 0.1] {
            let a = ex.evaluate(&x, &body, tol).unwrap();
            let b = ix.evaluate(&x, &body, tol).unwrap();
            assert_eq!(a, b, "trial {trial}, tol {tol}");
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let body = RobotBody::new(
        sample_boundary_grid(&Shape::disc(0.0, 0.0, 0.2), 24).unwrap(),
        [0, 1],
    );
    let obs = SampledShape::explicit(cloud(&mut rng, 80, 3.0));
    let field = ObstacleField::new(obs, PairScan::Exhaustive).unwrap();
    let h = 1e-6;
    let mut checked = 0;
    while checked < 1000 {
        let x = DVector::from_vec(vec![
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            1.0,
        ]);
        // Only states with a unique active pair are smooth points.
        let wide = field.evaluate(&x, &body, 1e-3).unwrap();
        if wide.active.len() != 1 {
            continue;
        }
        let grad = &wide.gradients[0];
        for k in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fp = field.evaluate(&xp, &body, 0.0).unwrap().min_squared;
            let fm = field.evaluate(&xm, &body, 0.0).unwrap().min_squared;
            let fd = (fp - fm) / (2.0 * h);
            let scale = grad.norm().max(1e-3);
            assert!(
                (fd - grad[k]).abs() <= 1e-5 * scale,
                "fd {fd} vs {}",
                grad[k]
            );
        }
        checked += 1;
    }
}

#[test]
fn gradients_point_away_from_obstacle_samples() {
    let body = RobotBody::new(SampledShape::explicit(vec![Point2::origin()]), [0, 1]);
    let obs = SampledShape::explicit(vec![Point2::new(2.0, 0.0)]);
    let e = ObstacleField::new(obs, PairScan::Exhaustive)
        .unwrap()
        .evaluate(&DVector::from_vec(vec![0.0, 0.0]), &body, 0.0)
        .unwrap();
    assert_eq!(e.min_squared, 4.0);
    assert_eq!(e.gradients[0].as_slice(), &[-4.0, 0.0]);
}

proptest! {
    #[test]
    fn active_set_grows_with_tolerance(seed in any::<u64>(), t1 in 0.0f64..0.5, t2 in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = RobotBody::new(SampledShape::explicit(cloud(&mut rng, 8, 0.3)), [0, 1]);
        let field = ObstacleField::new(SampledShape::explicit(cloud(&mut rng, 40, 2.0)), PairScan::Exhaustive).unwrap();
        let x = DVector::from_vec(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = field.evaluate(&x, &body, lo).unwrap();
        let b = field.evaluate(&x, &body, hi).unwrap();
        prop_assert_eq!(a.min_squared, b.min_squared);
        for p in &a.active {
            prop_assert!(b.active.contains(p));
        }
        let pts = robot_body_at(&body, &x).unwrap();
        prop_assert_eq!(a.min_squared, brute(&pts, &field.samples().points));
        for (p, g) in b.active.iter().zip(&b.gradients) {
            prop_assert!(p.squared_distance <= b.min_squared + hi);
            let v = pts[p.body_index] - p.o;
            prop_assert_eq!(g[0], 2.0 * v.x);
            prop_assert_eq!(g[1], 2.0 * v.y);
        }
    }
}
