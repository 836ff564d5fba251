use std::f64::consts::{FRAC_PI_2, PI};

use dsavoid_core::analytic::{analytic_frame, virtual_obstacle, AnalyticScratch};
use dsavoid_core::fusion::{apply_mixed, mixed_frame, prune_points, prune_points_generic};
use dsavoid_core::obstacle::{surface_normal, ObstacleSample};
use dsavoid_core::sampled::{aggregated_reference, eigenvalue_reference_sampled, eigenvalue_tangent_sampled};
use dsavoid_core::{
    modulate_analytic, modulate_mixed, modulate_sampled, vec2, AgentConfig, AvoidError, ScanPointSet, StarObstacle,
    StarShape, TailOptions, Vec2, VecN,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Vec3 = VecN<3>;

/// Sphere used to exercise the generic dimension.
struct Sphere {
    center: Vec3,
    radius: f64,
    velocity: Vec3,
}

impl StarShape<3> for Sphere {
    fn sample(&self, x: &Vec3) -> dsavoid_core::Result<ObstacleSample<3>> {
        let d = x - self.center;
        let dist = d.norm();
        if dist == 0.0 {
            return Err(AvoidError::GammaSingularity);
        }
        Ok(ObstacleSample { gamma: dist / self.radius, reference: d / dist, normal: d / dist })
    }

    fn velocity_at(&self, _x: &Vec3) -> Vec3 {
        self.velocity
    }
}

fn random_world(rng: &mut impl Rng, count: usize) -> Vec<StarObstacle> {
    (0..count)
        .map(|_| {
            let center = vec2(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            let th = rng.random_range(0.0..PI);
            let o = match rng.random_range(0..3) {
                0 => StarObstacle::circle(center, rng.random_range(0.2..1.5)),
                1 => StarObstacle::ellipse(center, [rng.random_range(0.2..2.0), rng.random_range(0.1..1.0)], th),
                _ => StarObstacle::rectangle(center, [rng.random_range(0.1..1.5), rng.random_range(0.1..1.5)], th),
            };
            o.with_margin(rng.random_range(0.0..0.3)).unwrap()
        })
        .collect()
}

fn random_free_point(rng: &mut impl Rng, world: &[StarObstacle]) -> Vec2 {
    loop {
        let p = vec2(rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0));
        if world.iter().all(|o| o.gamma(&p).is_ok_and(|g| g > 1.0 + 1e-9)) {
            return p;
        }
    }
}

fn unit(angle: f64) -> Vec2 {
    vec2(angle.cos(), angle.sin())
}

/// Independent beam model: first hits of rays from `origin` at spacing
/// `delta` on infinite lines `{p : ⟨p, normal⟩ = offset}`.
fn wall_scan(origin: &Vec2, walls: &[(Vec2, f64)], delta: f64) -> Vec<Vec2> {
    let mut points = Vec::new();
    let beams = (PI / delta) as i64;
    for k in -beams..beams {
        let dir = unit(k as f64 * delta);
        let hit = walls
            .iter()
            .filter_map(|(normal, offset)| {
                let denom = dir.dot(normal);
                (denom > 1e-12).then(|| (offset - origin.dot(normal)) / denom)
            })
            .filter(|t| *t > 0.0 && *t < 1e4)
            .min_by(f64::total_cmp);
        if let Some(t) = hit {
            points.push(origin + dir * t);
        }
    }
    points
}

#[test]
fn summed_frame_stays_invertible_on_random_worlds() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = AgentConfig::default();
    let mut scratch = AnalyticScratch::default();
    for _ in 0..2000 {
        let count = rng.random_range(1..8);
        let world = random_world(&mut rng, count);
        let x = random_free_point(&mut rng, &world);
        let v = unit(rng.random_range(0.0..2.0 * PI));
        let Some(vo) = virtual_obstacle(&x, &v, &world, &cfg, TailOptions::OFF, &mut scratch).unwrap() else {
            continue;
        };
        let frame = analytic_frame(&vo, &v, &cfg, TailOptions::OFF).unwrap();
        assert!(frame.reference.dot(&frame.normal) > 0.0);
        let e = frame.basis();
        assert!(e.determinant().abs() > 1e-12);
    }
}

#[test]
fn boundary_velocity_never_enters_an_obstacle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = AgentConfig::default();
    for tail in
        [TailOptions::OFF, TailOptions::default(), TailOptions { tail_negligence: true, decreasing_tail_weight: true }]
    {
        for _ in 0..500 {
            let world = random_world(&mut rng, 1);
            let o = &world[0];
            let dir = unit(rng.random_range(0.0..2.0 * PI));
            let reference = o.reference_point();
            // Point just outside the inflated boundary along the ray.
            let g = o.gamma(&(reference + dir)).unwrap();
            let x = reference + dir * ((1.0 + 1e-7) / g);
            let v = unit(rng.random_range(0.0..2.0 * PI));
            let xi = modulate_analytic(&x, &v, &world, &cfg, tail).unwrap();
            let n = surface_normal(o, &x).unwrap();
            assert!(n.dot(&xi) > -1e-5, "{:?} {tail:?}: {}", o.shape, n.dot(&xi));
        }
    }
}

#[test]
fn analytic_far_field_is_exact_identity() {
    let cfg = AgentConfig::default();
    let world = [StarObstacle::circle(vec2(0.0, 0.0), 1.0)];
    // Gamma 1e7 puts the raw weight far below the short-circuit threshold.
    let v = vec2(0.3, -0.8);
    let xi = modulate_analytic(&vec2(1e7, 0.0), &v, &world, &cfg, TailOptions::default()).unwrap();
    assert_eq!(xi, v);
}

#[test]
fn symmetric_scans_leave_velocity_unchanged() {
    let cfg = AgentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let x = vec2(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let mut points = Vec::new();
        for _ in 0..50 {
            let d = unit(rng.random_range(0.0..2.0 * PI)) * rng.random_range(0.6..4.0);
            points.push(x + d);
            points.push(x - d);
        }
        let v = unit(rng.random_range(0.0..2.0 * PI));
        let scan = ScanPointSet::new(points, 0.0, 7e-3);
        let xi = modulate_sampled(&x, &v, &scan, &cfg).unwrap();
        assert!((xi - v).norm() < 1e-9);
    }
}

#[test]
fn tail_switch_is_continuous() {
    let cfg = AgentConfig::default();
    let world = [StarObstacle::ellipse(vec2(0.0, 0.0), [1.5, 0.6], 0.4)];
    let x = vec2(0.0, 2.0);
    let n = surface_normal(&world[0], &x).unwrap();
    let t = vec2(-n.y, n.x);
    let mut last = None;
    for k in -200..=200 {
        let eps = k as f64 * 1e-6;
        let v = (t + n * eps).normalize();
        let xi = modulate_analytic(&x, &v, &world, &cfg, TailOptions::default()).unwrap();
        if let Some(prev) = last {
            let step: Vec2 = xi - prev;
            assert!(step.norm() < 5e-3, "jump {} at {eps}", step.norm());
        }
        last = Some(xi);
    }
}

fn slope(f: impl Fn(f64) -> f64, at: f64, h: f64) -> (f64, f64) {
    ((f(at) - f(at - h)) / h, (f(at + h) - f(at)) / h)
}

#[test]
fn sampled_eigenvalues_are_continuously_differentiable() {
    let h = 1e-6;
    let lambda_r = |m: f64| eigenvalue_reference_sampled(&vec2(m, 0.0), &vec2(1.0, 0.0));
    for at in [1.0, 2.0] {
        let (l, r) = slope(lambda_r, at, h);
        assert!((l - r).abs() < 1e-4, "λr at {at}: {l} vs {r}");
        assert!((lambda_r(at - 1e-12) - lambda_r(at + 1e-12)).abs() < 1e-9);
    }
    let (l, r) = slope(eigenvalue_tangent_sampled, 1.0, h);
    assert!((l - r).abs() < 1e-4, "λe: {l} vs {r}");
    // Independent closed-form derivatives at the branch points.
    assert!((-FRAC_PI_2 * (FRAC_PI_2 * 1.0f64).sin() - slope(lambda_r, 1.0, h).0).abs() < 1e-4);
}

#[test]
fn flat_wall_at_gap_distance_stays_within_unit_magnitude() {
    let cfg = AgentConfig::default();
    let delta = 7e-3;
    let x = vec2(0.0, 0.0);
    let normal = vec2(1.0, 0.0);
    let offset = cfg.radius + cfg.gap_distance;
    let points = wall_scan(&x, &[(normal, offset)], delta);
    let library = aggregated_reference(&points, &x, &cfg, delta).unwrap();
    // Oracle: direct weighted sum with the normalization written out.
    let mut oracle = Vec2::zeros();
    for p in &points {
        let d = (p - x).norm();
        oracle += (p - x) / d * (cfg.distance_scaling / (d - cfg.radius));
    }
    oracle *= cfg.gap_distance * delta / (2.0 * cfg.distance_scaling);
    assert!((library - oracle).norm() < 1e-12);
    assert!(oracle.norm() <= 1.0, "{}", oracle.norm());
    assert!(oracle.y.abs() < 1e-9 && oracle.x > 0.5);
}

#[test]
fn sampled_agent_does_not_stall_in_margin_exterior_space() {
    let cfg = AgentConfig::default();
    let delta = 7e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let x = vec2(0.0, 0.0);
        // Up to three walls, each at least the gap distance away.
        let walls: Vec<(Vec2, f64)> = (0..rng.random_range(1..4))
            .map(|_| {
                (unit(rng.random_range(0.0..2.0 * PI)), cfg.radius + cfg.gap_distance + rng.random_range(0.0..2.0))
            })
            .collect();
        let points = wall_scan(&x, &walls, delta);
        let v = unit(rng.random_range(0.0..2.0 * PI));
        let xi = modulate_sampled(&x, &v, &ScanPointSet::new(points, 0.0, delta), &cfg).unwrap();
        assert!(xi.norm() >= 1e-6);
    }
}

#[test]
fn mixed_reduces_to_sampled_without_analytic_obstacles() {
    let cfg = AgentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let none: [StarObstacle; 0] = [];
    let mut scratch = AnalyticScratch::default();
    for _ in 0..200 {
        let x = vec2(0.0, 0.0);
        let points: Vec<Vec2> = (0..40).map(|_| unit(rng.random_range(0.0..PI)) * rng.random_range(0.6..3.0)).collect();
        let v = unit(rng.random_range(0.0..2.0 * PI));
        let scan = ScanPointSet::new(points.clone(), 0.0, 7e-3);
        let sampled = modulate_sampled(&x, &v, &scan, &cfg).unwrap();
        let mixed = modulate_mixed(&x, &v, &points, 7e-3, &none, &cfg, TailOptions::OFF, &mut scratch).unwrap();
        assert!((sampled - mixed).norm() < 1e-12, "{sampled} vs {mixed}");
    }
}

#[test]
fn mixed_with_only_analytic_obstacles_keeps_the_analytic_normal() {
    let cfg = AgentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut scratch = AnalyticScratch::default();
    let no_points: [Vec2; 0] = [];
    for _ in 0..500 {
        let count = rng.random_range(1..5);
        let world = random_world(&mut rng, count);
        let x = random_free_point(&mut rng, &world);
        let v = unit(rng.random_range(0.0..2.0 * PI));
        let mixed = mixed_frame(&x, &v, &no_points, 7e-3, &world, &cfg, TailOptions::OFF, &mut scratch).unwrap();
        let Some(vo) = virtual_obstacle(&x, &v, &world, &cfg, TailOptions::OFF, &mut scratch).unwrap() else {
            assert!(mixed.modulation.is_none());
            continue;
        };
        let analytic = analytic_frame(&vo, &v, &cfg, TailOptions::OFF).unwrap();
        let m = mixed.modulation.unwrap();
        assert_eq!((mixed.sampled_weight, mixed.analytic_weight), (0.0, 1.0));
        // Toward-obstacle convention flips both reference and normal.
        assert!((m.reference + analytic.reference).norm() < 1e-12);
        assert!((m.normal + analytic.normal).norm() < 1e-12);
    }
}

#[test]
fn static_obstacles_drop_the_velocity_term() {
    let cfg = AgentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut scratch = AnalyticScratch::default();
    for _ in 0..500 {
        let world = random_world(&mut rng, 3);
        let x = random_free_point(&mut rng, &world);
        let points: Vec<Vec2> =
            (0..30).map(|_| x + unit(rng.random_range(0.0..2.0 * PI)) * rng.random_range(0.6..3.0)).collect();
        let points = prune_points(&points, &world);
        let v = unit(rng.random_range(0.0..2.0 * PI));
        let frame = mixed_frame(&x, &v, &points, 7e-3, &world, &cfg, TailOptions::OFF, &mut scratch).unwrap();
        let expected = frame.modulation.map_or(v, |m| m.apply(&v));
        assert!((apply_mixed(&frame, &v) - expected).norm() < 1e-12);
    }
}

#[test]
fn moving_obstacle_velocity_is_passed_through_at_the_boundary() {
    let cfg = AgentConfig::default();
    let world = [StarObstacle::circle(vec2(0.0, 0.0), 1.0).with_velocity(vec2(0.5, 0.0), 0.0)];
    let no_points: [Vec2; 0] = [];
    let mut scratch = AnalyticScratch::default();
    let x = vec2(1.0 + 1e-9, 0.0);
    let xi =
        modulate_mixed(&x, &vec2(0.0, 0.0), &no_points, 7e-3, &world, &cfg, TailOptions::OFF, &mut scratch).unwrap();
    // The resting agent is pushed at least as fast as the surface approaches.
    assert!(xi.x >= 0.5 - 1e-6, "{xi}");
}

#[test]
fn pruning_is_idempotent_and_generic_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let world = random_world(&mut rng, 4);
        let points: Vec<Vec2> =
            (0..200).map(|_| vec2(rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0))).collect();
        let once = prune_points(&points, &world);
        assert_eq!(prune_points(&once, &world), once);
        assert_eq!(prune_points_generic(&points, &world), once);
        assert!(once.iter().all(|p| world.iter().all(|o| o.gamma(p).unwrap() > 1.0)));
    }
}

#[test]
fn three_dimensional_sphere_is_avoided() {
    let cfg = AgentConfig::default();
    let sphere = Sphere { center: Vec3::zeros(), radius: 1.0, velocity: Vec3::zeros() };
    let x = Vec3::new(0.0, 0.0, 1.0 + 1e-9);
    let v = Vec3::new(0.3, 0.0, -1.0);
    let xi = modulate_analytic(&x, &v, &[sphere], &cfg, TailOptions::OFF).unwrap();
    assert!(xi.z.abs() < 1e-6);
    assert!(xi.x > 0.3);
}

#[test]
fn three_dimensional_sampled_and_mixed_paths_run() {
    let cfg = AgentConfig::default();
    let points = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.1, 0.0, 1.0)];
    let scan = ScanPointSet::new(points.clone(), 0.0, 0.05);
    let v = Vec3::new(0.0, 0.0, 1.0);
    let xi = modulate_sampled(&Vec3::zeros(), &v, &scan, &cfg).unwrap();
    assert!(xi.norm().is_finite());
    let sphere = Sphere { center: Vec3::new(3.0, 0.0, 0.0), radius: 1.0, velocity: Vec3::new(-1.0, 0.0, 0.0) };
    let mut scratch = AnalyticScratch::default();
    let mixed =
        modulate_mixed(&Vec3::zeros(), &v, &points, 0.05, &[sphere], &cfg, TailOptions::OFF, &mut scratch).unwrap();
    assert!(mixed.norm().is_finite());
}

proptest! {
    #[test]
    fn sampled_output_is_finite_and_bounded(
        px in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..50),
        a in 0.0f64..(2.0 * PI),
    ) {
        let cfg = AgentConfig::default();
        let points: Vec<Vec2> = px.into_iter().map(|(x, y)| vec2(x, y)).filter(|p| p.norm() > cfg.radius + 1e-6).collect();
        let v = unit(a);
        let scan = ScanPointSet::new(points, 0.0, 7e-3);
        let xi = modulate_sampled(&vec2(0.0, 0.0), &v, &scan, &cfg).unwrap();
        // Orthonormal frame with |λ| ≤ 2.
        prop_assert!(xi.norm() <= 2.0 + 1e-9);
    }

    #[test]
    fn mixed_is_bitwise_deterministic(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = AgentConfig::default();
        let world = random_world(&mut rng, 3);
        let x = random_free_point(&mut rng, &world);
        let points: Vec<Vec2> = (0..100).map(|_| x + unit(rng.random_range(0.0..2.0 * PI)) * rng.random_range(0.6..3.0)).collect();
        let points = prune_points(&points, &world);
        let v = unit(rng.random_range(0.0..2.0 * PI));
        let mut s1 = AnalyticScratch::default();
        let mut s2 = AnalyticScratch::default();
        let a = modulate_mixed(&x, &v, &points, 7e-3, &world, &cfg, TailOptions::default(), &mut s1).unwrap();
        let b = modulate_mixed(&x, &v, &points, 7e-3, &world, &cfg, TailOptions::default(), &mut s2).unwrap();
        prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
        prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
    }
}
