//! Gamma and normals checked against brute-force oracles that only use the
//! implicit inside/outside description of each shape.

use std::f64::consts::PI;

use dsavoid_core::obstacle::{gamma, reference_direction, surface_normal};
use dsavoid_core::{vec2, Shape, StarObstacle, Vec2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Implicit function of the base shape in world coordinates: negative
/// inside, zero on the boundary. Independent of the library's geometry.
fn implicit(o: &StarObstacle, p: &Vec2) -> f64 {
    let (s, c) = (-o.orientation).sin_cos();
    let d = p - o.center;
    let l = vec2(c * d.x - s * d.y, s * d.x + c * d.y);
    match &o.shape {
        Shape::Circle { radius } => l.norm_squared() / (radius * radius) - 1.0,
        Shape::Ellipse { semi_axes } => (l.x / semi_axes[0]).powi(2) + (l.y / semi_axes[1]).powi(2) - 1.0,
        Shape::Polygon { vertices } => {
            let n = vertices.len();
            let mut worst = f64::NEG_INFINITY;
            for i in 0..n {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let e = b - a;
                // Outward side for either winding, decided by the centroid.
                let mut normal = vec2(e.y, -e.x).normalize();
                let centroid = vertices.iter().fold(Vec2::zeros(), |acc, v| acc + v) / n as f64;
                if normal.dot(&(centroid - a)) > 0.0 {
                    normal = -normal;
                }
                worst = worst.max(normal.dot(&(l - a)));
            }
            worst
        }
    }
}

/// Brute-force Euclidean distance to the boundary: coarse sampling of the
/// boundary along rays from the reference point, then a ternary search on
/// the angle around the best sample.
fn brute_distance(o: &StarObstacle, p: &Vec2) -> f64 {
    let reference = o.reference_point();
    let at = |angle: f64| (bisect_boundary(o, &reference, &vec2(angle.cos(), angle.sin())) - p).norm();
    let samples = 1000;
    let step = 2.0 * PI / samples as f64;
    let best = (0..samples).map(|k| k as f64 * step).min_by(|a, b| at(*a).total_cmp(&at(*b))).unwrap();
    let (mut lo, mut hi) = (best - step, best + step);
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if at(m1) < at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at(0.5 * (lo + hi))
}

/// Boundary point along a ray from `origin` found by bisection on the
/// implicit function.
fn bisect_boundary(o: &StarObstacle, origin: &Vec2, dir: &Vec2) -> Vec2 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while implicit(o, &(origin + dir * hi)) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if implicit(o, &(origin + dir * mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    origin + dir * (0.5 * (lo + hi))
}

fn oracle_gamma(o: &StarObstacle, x: &Vec2) -> f64 {
    let reference = o.reference_point();
    let dir = (x - reference).normalize();
    let b = bisect_boundary(o, &reference, &dir);
    (x - reference).norm() / (b - reference).norm()
}

/// Outward normal at the ray's boundary hit via central finite differences.
fn oracle_normal(o: &StarObstacle, x: &Vec2) -> Vec2 {
    let reference = o.reference_point();
    let b = bisect_boundary(o, &reference, &(x - reference).normalize());
    let h = 1e-7;
    let gx = implicit(o, &(b + vec2(h, 0.0))) - implicit(o, &(b - vec2(h, 0.0)));
    let gy = implicit(o, &(b + vec2(0.0, h))) - implicit(o, &(b - vec2(0.0, h)));
    vec2(gx, gy).normalize()
}

fn random_obstacle(rng: &mut impl Rng) -> StarObstacle {
    let center = vec2(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let orientation = rng.random_range(0.0..PI);
    let obstacle = match rng.random_range(0..3) {
        0 => StarObstacle::circle(center, rng.random_range(0.2..2.0)),
        1 => StarObstacle::ellipse(center, [rng.random_range(0.2..2.5), rng.random_range(0.2..2.5)], orientation),
        _ => {
            let count = rng.random_range(3..8);
            let mut angles: Vec<f64> =
                (0..count).map(|k| 2.0 * PI * (k as f64 + rng.random_range(0.1..0.9)) / count as f64).collect();
            angles.sort_by(f64::total_cmp);
            let vertices = angles.iter().map(|a| vec2(a.cos(), a.sin()) * rng.random_range(0.5..2.0)).collect();
            match StarObstacle::new(Shape::Polygon { vertices }, center, orientation) {
                Ok(p) => p,
                Err(_) => StarObstacle::rectangle(center, [1.0, 0.5], orientation),
            }
        }
    };
    // Move the reference point off-center half of the time.
    if rng.random_bool(0.5) {
        let shift = vec2(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        if let Ok(o) = obstacle.clone().with_reference_point(center + shift) {
            return o;
        }
    }
    obstacle
}

fn random_exterior(o: &StarObstacle, rng: &mut impl Rng) -> Vec2 {
    loop {
        let p = o.center + vec2(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        if implicit(o, &p) > 1e-6 && o.signed_distance(&p) > 1e-6 {
            return p;
        }
    }
}

#[test]
fn ellipse_gamma_matches_bisection_oracle() {
    let el = StarObstacle::ellipse(vec2(0.0, 0.0), [2.0, 1.0], 0.0);
    let x = vec2(4.0, 0.0);
    let expected = oracle_gamma(&el, &x);
    assert!((expected - 2.0).abs() < 1e-12);
    assert!((gamma(&el, &x).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn ellipse_normal_matches_implicit_gradient() {
    let el = StarObstacle::ellipse(vec2(0.0, 0.0), [2.0, 1.0], 0.0);
    let x = vec2(0.0, 3.0);
    let expected = oracle_normal(&el, &x);
    assert!((expected - vec2(0.0, 1.0)).norm() < 1e-6);
    assert!((surface_normal(&el, &x).unwrap() - expected).norm() < 1e-6);
}

#[test]
fn gamma_and_normal_agree_with_oracles_on_random_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let o = random_obstacle(&mut rng);
        for _ in 0..5 {
            let x = random_exterior(&o, &mut rng);
            let g = gamma(&o, &x).unwrap();
            assert!((g - oracle_gamma(&o, &x)).abs() < 1e-6, "{:?} at {x}", o.shape);
            let n = surface_normal(&o, &x).unwrap();
            let expected = oracle_normal(&o, &x);
            // Polygon rays can land within FD reach of a vertex; skip those.
            if let Shape::Polygon { .. } = o.shape {
                let reference = o.reference_point();
                let b = bisect_boundary(&o, &reference, &(x - reference).normalize());
                let near_vertex = match &o.shape {
                    Shape::Polygon { vertices } => vertices.iter().any(|v| {
                        let (s, c) = o.orientation.sin_cos();
                        let w = o.center + vec2(c * v.x - s * v.y, s * v.x + c * v.y);
                        (w - b).norm() < 1e-5
                    }),
                    _ => false,
                };
                if near_vertex {
                    continue;
                }
            }
            assert!((n - expected).norm() < 1e-6, "{:?}: {n} vs {expected}", o.shape);
        }
    }
}

#[test]
fn inflated_gamma_matches_brute_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..8 {
        let margin = rng.random_range(0.05..0.6);
        let o = random_obstacle(&mut rng).with_margin(margin).unwrap();
        let reference = o.reference_point();
        for _ in 0..3 {
            let angle = rng.random_range(0.0..2.0 * PI);
            let dir = vec2(angle.cos(), angle.sin());
            // Walk outward until the brute distance crosses the margin.
            let base = bisect_boundary(&o, &reference, &dir);
            let start = (base - reference).norm();
            let (mut lo, mut hi) = (start, start + 4.0 * margin);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if brute_distance(&o, &(reference + dir * mid)) < margin {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let boundary = 0.5 * (lo + hi);
            let x = reference + dir * (2.0 * boundary);
            assert!((gamma(&o, &x).unwrap() - 2.0).abs() < 1e-6, "{:?}", o.shape);
        }
    }
}

#[test]
fn every_constructed_obstacle_is_star_shaped() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let mut o = random_obstacle(&mut rng);
        if rng.random_bool(0.5) {
            o = o.with_margin(rng.random_range(0.0..0.5)).unwrap();
        }
        assert!(o.is_star_shaped(360), "{:?}", o.shape);
    }
}

#[test]
fn exterior_points_have_gamma_above_one_and_increase_along_rays() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let o = random_obstacle(&mut rng);
        let reference = o.reference_point();
        for _ in 0..1000 {
            let x = random_exterior(&o, &mut rng);
            let g = gamma(&o, &x).unwrap();
            assert!(g > 1.0);
            let dir = reference_direction(&o, &x).unwrap();
            let dist = (x - reference).norm();
            if rng.random_range(0..10) == 0 {
                let mut last = 0.0;
                for k in 1..=10 {
                    let gk = gamma(&o, &(reference + dir * (dist * k as f64 / 5.0))).unwrap();
                    assert!(gk > last);
                    last = gk;
                }
            }
        }
    }
}

#[test]
fn ray_cast_matches_marching_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let o = random_obstacle(&mut rng);
        let origin = random_exterior(&o, &mut rng);
        let toward = (o.center - origin).normalize();
        let angle = rng.random_range(-0.4..0.4);
        let (s, c) = f64::sin_cos(angle);
        let dir = vec2(c * toward.x - s * toward.y, s * toward.x + c * toward.y);
        let hit = o.ray_cast(&origin, &dir);
        // March in 1 cm steps, then bisect the first sign change.
        let mut t = 0.0;
        let mut found = None;
        while t < 30.0 {
            if implicit(&o, &(origin + dir * (t + 0.01))) <= 0.0 {
                let (mut lo, mut hi) = (t, t + 0.01);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if implicit(&o, &(origin + dir * mid)) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                found = Some(hi);
                break;
            }
            t += 0.01;
        }
        match (hit, found) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-5, "{a} vs {b}"),
            (None, None) => {}
            // Grazing rays can slip between marching steps.
            (Some(_), None) => {}
            (None, Some(b)) => panic!("missed hit at {b}"),
        }
    }
}

proptest! {
    #[test]
    fn signed_distance_matches_implicit_sign(
        x in -5.0f64..5.0, y in -5.0f64..5.0, a in 0.3f64..3.0, b in 0.3f64..3.0, th in 0.0f64..PI
    ) {
        let el = StarObstacle::ellipse(vec2(0.5, -0.5), [a, b], th);
        let p = vec2(x, y);
        let f = implicit(&el, &p);
        let d = el.signed_distance(&p);
        if f.abs() > 1e-9 {
            prop_assert_eq!(f < 0.0, d < 0.0);
        }
    }
}
