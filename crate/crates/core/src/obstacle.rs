//! Analytic star-shaped obstacles and their Gamma distance functions.
//!
//! Every obstacle carries a body frame (center + orientation). Shape data is
//! stored in that frame and all queries are rotated into it first. The
//! margin is a true Minkowski offset of the base shape: the inflated
//! boundary is the level set `signed_distance = margin`.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::config::AgentConfig;
use crate::error::{AvoidError, Result};
use crate::linalg::{normalized, perp, rotate, vec2, Vec2, VecN};

/// Relative tolerance used when deciding whether a point is on a boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle {
        radius: f64,
    },
    Ellipse {
        semi_axes: [f64; 2],
    },
    /// Convex polygon, vertices in the body frame (relative to the center).
    Polygon {
        vertices: Vec<Vec2>,
    },
}

/// Per-query geometry of one obstacle, as consumed by the modulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleSample<const D: usize> {
    pub gamma: f64,
    /// Unit vector from the reference point toward the query.
    pub reference: VecN<D>,
    /// Outward unit normal of the inflated surface where the reference ray exits.
    pub normal: VecN<D>,
}

/// Anything the analytic modulation can avoid: a Gamma function with a
/// reference direction and surface normal, plus a rigid-body velocity field.
pub trait StarShape<const D: usize> {
    fn sample(&self, x: &VecN<D>) -> Result<ObstacleSample<D>>;

    fn gamma(&self, x: &VecN<D>) -> Result<f64> {
        self.sample(x).map(|s| s.gamma)
    }

    /// Velocity of the obstacle material at `x`.
    fn velocity_at(&self, _x: &VecN<D>) -> VecN<D> {
        VecN::<D>::zeros()
    }
}

/// Classification of a point with respect to a set of obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaRegion {
    Exterior,
    MarginExterior,
    Boundary,
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarObstacle {
    pub shape: Shape,
    pub center: Vec2,
    pub orientation: f64,
    /// Reference point in the body frame.
    reference_offset: Vec2,
    pub margin: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
    /// Polygon edges as (outward unit normal, offset) pairs in the body frame.
    faces: Vec<(Vec2, f64)>,
}

impl StarObstacle {
    pub fn circle(center: Vec2, radius: f64) -> Self {
        Self::new(Shape::Circle { radius }, center, 0.0).expect("valid circle")
    }

    pub fn ellipse(center: Vec2, semi_axes: [f64; 2], orientation: f64) -> Self {
        Self::new(Shape::Ellipse { semi_axes }, center, orientation).expect("valid ellipse")
    }

    /// Axis-aligned (before `orientation`) rectangle with the given half extents.
    pub fn rectangle(center: Vec2, half_extents: [f64; 2], orientation: f64) -> Self {
        let [hx, hy] = half_extents;
        let vertices = alloc::vec![vec2(-hx, -hy), vec2(hx, -hy), vec2(hx, hy), vec2(-hx, hy)];
        Self::new(Shape::Polygon { vertices }, center, orientation).expect("valid rectangle")
    }

    /// Builds an obstacle whose reference point is its center.
    pub fn new(shape: Shape, center: Vec2, orientation: f64) -> Result<Self> {
        let shape = match shape {
            Shape::Circle { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(AvoidError::InvalidShape("circle radius must be > 0"));
                }
                Shape::Circle { radius }
            }
            Shape::Ellipse { semi_axes } => {
                if !semi_axes.iter().all(|a| *a > 0.0 && a.is_finite()) {
                    return Err(AvoidError::InvalidShape("ellipse semi-axes must be > 0"));
                }
                Shape::Ellipse { semi_axes }
            }
            Shape::Polygon { vertices } => Shape::Polygon { vertices: convex_ccw(vertices)? },
        };
        let faces = match &shape {
            Shape::Polygon { vertices } => polygon_faces(vertices),
            _ => Vec::new(),
        };
        let obstacle = Self {
            shape,
            center,
            orientation,
            reference_offset: Vec2::zeros(),
            margin: 0.0,
            linear_velocity: Vec2::zeros(),
            angular_velocity: 0.0,
            faces,
        };
        if obstacle.base_signed_distance_local(&Vec2::zeros()) >= 0.0 {
            return Err(AvoidError::InvalidShape("center must lie inside the shape"));
        }
        Ok(obstacle)
    }

    /// Places the reference point (world frame). It must lie strictly inside
    /// the base shape.
    pub fn with_reference_point(mut self, reference_point: Vec2) -> Result<Self> {
        let offset = rotate(&(reference_point - self.center), -self.orientation);
        if !(self.base_signed_distance_local(&offset) < 0.0) {
            return Err(AvoidError::InvalidShape("reference point must lie strictly inside the shape"));
        }
        self.reference_offset = offset;
        Ok(self)
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(AvoidError::InvalidShape("margin must be >= 0"));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn with_velocity(mut self, linear: Vec2, angular: f64) -> Self {
        self.linear_velocity = linear;
        self.angular_velocity = angular;
        self
    }

    /// Same obstacle with `extra` added to its margin (e.g. the agent radius).
    pub fn inflated(&self, extra: f64) -> Self {
        let mut out = self.clone();
        out.margin += extra;
        out
    }

    pub fn reference_point(&self) -> Vec2 {
        self.center + rotate(&self.reference_offset, self.orientation)
    }

    /// Rigid-body motion over `dt` seconds at the current velocities.
    pub fn advanced(&self, dt: f64) -> Self {
        let mut out = self.clone();
        out.center += self.linear_velocity * dt;
        out.orientation += self.angular_velocity * dt;
        out
    }

    /// Distance from the center to the farthest base-shape point.
    pub fn bounding_radius(&self) -> f64 {
        match &self.shape {
            Shape::Circle { radius } => *radius,
            Shape::Ellipse { semi_axes } => semi_axes[0].max(semi_axes[1]),
            Shape::Polygon { vertices } => vertices.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    #[inline]
    fn to_local(&self, x: &Vec2) -> Vec2 {
        rotate(&(x - self.center), -self.orientation)
    }

    #[inline]
    fn to_world_dir(&self, v: &Vec2) -> Vec2 {
        rotate(v, self.orientation)
    }

    /// Signed Euclidean distance to the base shape (margin excluded);
    /// negative inside.
    pub fn signed_distance(&self, x: &Vec2) -> f64 {
        self.base_signed_distance_local(&self.to_local(x))
    }

    fn base_signed_distance_local(&self, p: &Vec2) -> f64 {
        self.closest_local(p).0
    }

    /// Signed distance and outward unit gradient of the base shape at a
    /// body-frame point.
    fn closest_local(&self, p: &Vec2) -> (f64, Vec2) {
        match &self.shape {
            Shape::Circle { radius } => {
                let n = p.norm();
                let dir = if n > 0.0 { p / n } else { vec2(1.0, 0.0) };
                (n - radius, dir)
            }
            Shape::Ellipse { semi_axes } => ellipse_signed_distance(semi_axes[0], semi_axes[1], p),
            Shape::Polygon { vertices } => polygon_signed_distance(vertices, &self.faces, p),
        }
    }

    /// Distance along the unit ray `origin + t * dir` (body frame, origin
    /// inside the base shape) to the base boundary, with the outward normal
    /// there.
    fn base_ray_exit(&self, origin: &Vec2, dir: &Vec2) -> (f64, Vec2) {
        match &self.shape {
            Shape::Circle { radius } => {
                let b = origin.dot(dir);
                let c = origin.norm_squared() - radius * radius;
                let t = -b + (b * b - c).max(0.0).sqrt();
                let hit = origin + dir * t;
                (t, hit / *radius)
            }
            Shape::Ellipse { semi_axes } => {
                let [a, b] = *semi_axes;
                let q = vec2(origin.x / a, origin.y / b);
                let w = vec2(dir.x / a, dir.y / b);
                let qa = w.norm_squared();
                let qb = q.dot(&w);
                let qc = q.norm_squared() - 1.0;
                // qc < 0, so the larger root is positive.
                let t = (-qb + (qb * qb - qa * qc).max(0.0).sqrt()) / qa;
                let hit = origin + dir * t;
                let grad = vec2(hit.x / (a * a), hit.y / (b * b));
                (t, grad.normalize())
            }
            Shape::Polygon { .. } => {
                let mut best = f64::INFINITY;
                let mut best_face = 0;
                for (i, (n, h)) in self.faces.iter().enumerate() {
                    let denom = n.dot(dir);
                    if denom > 0.0 {
                        let t = (h - n.dot(origin)) / denom;
                        if t < best {
                            best = t;
                            best_face = i;
                        }
                    }
                }
                // A ray leaving exactly through a vertex touches two faces.
                let tol = 1e-12 * best.abs().max(1.0);
                let mut normal = self.faces[best_face].0;
                let count = self.faces.len();
                for offset in [1, count - 1] {
                    let (n, h) = self.faces[(best_face + offset) % count];
                    let denom = n.dot(dir);
                    if denom > 0.0 && ((h - n.dot(origin)) / denom - best).abs() <= tol {
                        normal = (normal + n).normalize();
                    }
                }
                (best, normal)
            }
        }
    }

    /// Exit distance and normal of the margin-inflated boundary along a unit
    /// ray from the reference point (body frame).
    fn inflated_ray_exit(&self, dir: &Vec2) -> (f64, Vec2) {
        let origin = self.reference_offset;
        let (t0, n0) = self.base_ray_exit(&origin, dir);
        if self.margin <= 0.0 {
            return (t0, n0);
        }
        if let Shape::Circle { radius } = self.shape {
            if origin == Vec2::zeros() {
                return (radius + self.margin, *dir);
            }
            let b = origin.dot(dir);
            let r = radius + self.margin;
            let c = origin.norm_squared() - r * r;
            let t = -b + (b * b - c).max(0.0).sqrt();
            return (t, (origin + dir * t).normalize());
        }
        // The offset of a convex set is convex, so signed distance grows
        // monotonically along the ray once outside: bracket, then Newton
        // with bisection fallback.
        let g = |t: f64| self.closest_local(&(origin + dir * t));
        let mut lo = t0;
        let mut hi = t0 + self.margin;
        while g(hi).0 < self.margin {
            lo = hi;
            hi += self.margin.max(hi - t0);
        }
        let mut t = hi;
        for _ in 0..100 {
            let (sd, grad) = g(t);
            let f = sd - self.margin;
            if f.abs() <= 1e-14 * self.margin.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let slope = grad.dot(dir);
            let newton = t - f / slope;
            t = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let (_, normal) = g(t);
        (t, normal)
    }

    /// Gamma, reference direction and surface normal in the world frame.
    pub fn sample_2d(&self, x: &Vec2) -> Result<ObstacleSample<2>> {
        let local = self.to_local(x);
        let rel = local - self.reference_offset;
        let dist = rel.norm();
        if !(dist > 0.0) {
            return Err(AvoidError::GammaSingularity);
        }
        let dir = rel / dist;
        let (boundary, normal) = self.inflated_ray_exit(&dir);
        Ok(ObstacleSample {
            gamma: dist / boundary,
            reference: self.to_world_dir(&dir),
            normal: self.to_world_dir(&normal),
        })
    }

    /// First intersection of the world ray `origin + t * dir` (unit `dir`)
    /// with the base surface, for origins outside the shape.
    pub fn ray_cast(&self, origin: &Vec2, dir: &Vec2) -> Option<f64> {
        let o = self.to_local(origin);
        let d = rotate(dir, -self.orientation);
        match &self.shape {
            Shape::Circle { radius } => {
                let b = o.dot(&d);
                let c = o.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t >= 0.0).then_some(t)
            }
            Shape::Ellipse { semi_axes } => {
                let [a, b] = *semi_axes;
                let q = vec2(o.x / a, o.y / b);
                let w = vec2(d.x / a, d.y / b);
                let qa = w.norm_squared();
                let qb = q.dot(&w);
                let qc = q.norm_squared() - 1.0;
                let disc = qb * qb - qa * qc;
                if disc < 0.0 {
                    return None;
                }
                let t = (-qb - disc.sqrt()) / qa;
                (t >= 0.0).then_some(t)
            }
            Shape::Polygon { .. } => {
                let mut enter = 0.0_f64;
                let mut exit = f64::INFINITY;
                for (n, h) in &self.faces {
                    let denom = n.dot(&d);
                    let num = h - n.dot(&o);
                    if denom.abs() < 1e-300 {
                        if num < 0.0 {
                            return None;
                        }
                    } else if denom < 0.0 {
                        enter = enter.max(num / denom);
                    } else {
                        exit = exit.min(num / denom);
                    }
                }
                (enter <= exit).then_some(enter)
            }
        }
    }

    /// Boundary points of the inflated surface at `count` evenly spaced
    /// angles around the reference point.
    pub fn boundary_samples(&self, count: usize) -> Vec<(Vec2, Vec2)> {
        (0..count)
            .map(|k| {
                let angle = 2.0 * PI * (k as f64) / (count as f64);
                let dir = vec2(angle.cos(), angle.sin());
                let (t, normal) = self.inflated_ray_exit(&dir);
                let point = self.center + self.to_world_dir(&(self.reference_offset + dir * t));
                (point, self.to_world_dir(&normal))
            })
            .collect()
    }

    /// Checks the star condition on boundary samples: the reference ray
    /// and the outward normal never face away from each other.
    pub fn is_star_shaped(&self, count: usize) -> bool {
        let reference = self.reference_point();
        self.boundary_samples(count).iter().all(|(p, n)| match normalized(&(p - reference)) {
            Some(r) => r.dot(n) > 0.0,
            None => false,
        })
    }
}

impl StarShape<2> for StarObstacle {
    fn sample(&self, x: &Vec2) -> Result<ObstacleSample<2>> {
        self.sample_2d(x)
    }

    fn velocity_at(&self, x: &Vec2) -> Vec2 {
        self.linear_velocity + perp(&(x - self.center)) * self.angular_velocity
    }
}

/// Gamma of the margin-inflated obstacle at `x`.
pub fn gamma(obstacle: &StarObstacle, x: &Vec2) -> Result<f64> {
    obstacle.sample_2d(x).map(|s| s.gamma)
}

/// Unit direction from the obstacle's reference point to `x`.
pub fn reference_direction(obstacle: &StarObstacle, x: &Vec2) -> Result<Vec2> {
    normalized(&(x - obstacle.reference_point())).ok_or(AvoidError::GammaSingularity)
}

/// Outward unit normal of the inflated surface where the reference ray
/// through `x` exits. Only defined for exterior and boundary queries.
pub fn surface_normal(obstacle: &StarObstacle, x: &Vec2) -> Result<Vec2> {
    let sample = obstacle.sample_2d(x)?;
    if sample.gamma < 1.0 - BOUNDARY_TOLERANCE {
        return Err(AvoidError::InsideObstacle { index: 0 });
    }
    Ok(sample.normal)
}

/// Region of `x` with respect to the whole obstacle set.
pub fn classify(obstacles: &[StarObstacle], x: &Vec2, config: &AgentConfig) -> GammaRegion {
    let mut min_gamma = f64::INFINITY;
    let mut min_clearance = f64::INFINITY;
    for obstacle in obstacles {
        let g = match gamma(obstacle, x) {
            Ok(g) => g,
            Err(_) => return GammaRegion::Interior,
        };
        min_gamma = min_gamma.min(g);
        min_clearance = min_clearance.min(obstacle.signed_distance(x) - obstacle.margin);
    }
    if min_gamma < 1.0 - BOUNDARY_TOLERANCE {
        GammaRegion::Interior
    } else if min_gamma <= 1.0 + BOUNDARY_TOLERANCE {
        GammaRegion::Boundary
    } else if min_clearance >= config.radius + config.gap_distance {
        GammaRegion::MarginExterior
    } else {
        GammaRegion::Exterior
    }
}

fn convex_ccw(mut vertices: Vec<Vec2>) -> Result<Vec<Vec2>> {
    if vertices.len() < 3 {
        return Err(AvoidError::InvalidShape("polygon needs at least 3 vertices"));
    }
    if !vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite()) {
        return Err(AvoidError::InvalidShape("polygon vertices must be finite"));
    }
    let n = vertices.len();
    let area: f64 = (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a.x * b.y - a.y * b.x
        })
        .sum();
    if area == 0.0 {
        return Err(AvoidError::InvalidShape("degenerate polygon"));
    }
    if area < 0.0 {
        vertices.reverse();
    }
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        let e1 = b - a;
        let e2 = c - b;
        if e1.x * e2.y - e1.y * e2.x <= 0.0 {
            return Err(AvoidError::InvalidShape("polygon must be strictly convex"));
        }
    }
    Ok(vertices)
}

fn polygon_faces(vertices: &[Vec2]) -> Vec<(Vec2, f64)> {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let edge = (b - a).normalize();
            let normal = vec2(edge.y, -edge.x);
            (normal, normal.dot(&a))
        })
        .collect()
}

fn polygon_signed_distance(vertices: &[Vec2], faces: &[(Vec2, f64)], p: &Vec2) -> (f64, Vec2) {
    let mut max_face = f64::NEG_INFINITY;
    let mut max_normal = faces[0].0;
    for (n, h) in faces {
        let s = n.dot(p) - h;
        if s > max_face {
            max_face = s;
            max_normal = *n;
        }
    }
    if max_face <= 0.0 {
        return (max_face, max_normal);
    }
    // Outside: distance to the nearest edge segment.
    let count = vertices.len();
    let mut best = f64::INFINITY;
    let mut best_dir = max_normal;
    for i in 0..count {
        let a = vertices[i];
        let b = vertices[(i + 1) % count];
        let ab = b - a;
        let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        let diff = p - (a + ab * t);
        let d = diff.norm();
        if d < best {
            best = d;
            best_dir = if d > 0.0 { diff / d } else { faces[i].0 };
        }
    }
    (best, best_dir)
}

/// Signed distance from `p` to the ellipse with semi-axes `a` (x) and `b`
/// (y), together with the outward unit normal at the closest point.
fn ellipse_signed_distance(a: f64, b: f64, p: &Vec2) -> (f64, Vec2) {
    // Work in the first quadrant with the major axis first.
    let swap = b > a;
    let (e0, e1) = if swap { (b, a) } else { (a, b) };
    let (q0, q1) = if swap { (p.y, p.x) } else { (p.x, p.y) };
    let (y0, y1) = (q0.abs(), q1.abs());
    let (x0, x1) = ellipse_closest_first_quadrant(e0, e1, y0, y1);
    let inside = (y0 / e0).powi(2) + (y1 / e1).powi(2) < 1.0;
    let dist = ((y0 - x0).powi(2) + (y1 - x1).powi(2)).sqrt();
    let grad = vec2(x0 / (e0 * e0), x1 / (e1 * e1));
    let grad = grad.normalize();
    let (g0, g1) = (grad.x.copysign(q0), grad.y.copysign(q1));
    let normal = if swap { vec2(g1, g0) } else { vec2(g0, g1) };
    (if inside { -dist } else { dist }, normal)
}

fn ellipse_closest_first_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1).powi(2);
                let sbar = ellipse_root(r0, z0, z1, g);
                (r0 * y0 / (sbar + r0), y1 / (sbar + 1.0))
            } else {
                (y0, y1)
            }
        } else {
            (0.0, e1)
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let ratio = numer / denom;
            (e0 * ratio, e1 * (1.0 - ratio * ratio).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let value = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if value > 0.0 {
            s0 = s;
        } else if value < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol
        }
    }

    #[test]
    fn circle_gamma_scales_with_distance() {
        let c = StarObstacle::circle(vec2(0.0, 0.0), 1.0);
        assert!(close(gamma(&c, &vec2(2.0, 0.0)).unwrap(), 2.0, 1e-15));
        assert!(close(gamma(&c, &vec2(1.0, 0.0)).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn gamma_at_reference_point_is_singular() {
        let c = StarObstacle::circle(vec2(1.0, 1.0), 1.0);
        assert_eq!(gamma(&c, &vec2(1.0, 1.0)), Err(AvoidError::GammaSingularity));
        assert_eq!(reference_direction(&c, &vec2(1.0, 1.0)), Err(AvoidError::GammaSingularity));
    }

    #[test]
    fn reference_direction_examples() {
        let at = |r: Vec2, x: Vec2| {
            let c = StarObstacle::circle(r, 0.5);
            reference_direction(&c, &x).unwrap()
        };
        assert!((at(vec2(0.0, 0.0), vec2(3.0, 0.0)) - vec2(1.0, 0.0)).norm() < 1e-15);
        assert!((at(vec2(1.0, 1.0), vec2(1.0, 5.0)) - vec2(0.0, 1.0)).norm() < 1e-15);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((at(vec2(0.0, 0.0), vec2(1.0, 1.0)) - vec2(h, h)).norm() < 1e-15);
    }

    #[test]
    fn square_face_normal() {
        let sq = StarObstacle::rectangle(vec2(0.0, 0.0), [1.0, 1.0], 0.0);
        let n = surface_normal(&sq, &vec2(3.0, 0.2)).unwrap();
        assert!((n - vec2(1.0, 0.0)).norm() < 1e-15);
        // Exact vertex hit takes the bisector.
        let n = surface_normal(&sq, &vec2(2.0, 2.0)).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((n - vec2(h, h)).norm() < 1e-12);
    }

    #[test]
    fn circle_normal_is_radial() {
        let c = StarObstacle::circle(vec2(0.5, -0.5), 1.0);
        let x = vec2(3.0, 1.0);
        let n = surface_normal(&c, &x).unwrap();
        let r = reference_direction(&c, &x).unwrap();
        assert!((n - r).norm() < 1e-14);
    }

    #[test]
    fn interior_normal_is_rejected() {
        let c = StarObstacle::circle(vec2(0.0, 0.0), 1.0);
        assert!(matches!(surface_normal(&c, &vec2(0.5, 0.0)), Err(AvoidError::InsideObstacle { .. })));
    }

    #[test]
    fn classify_examples() {
        let cfg = AgentConfig { radius: 0.4, gap_distance: 0.1, ..AgentConfig::default() };
        assert_eq!(classify(&[], &vec2(3.0, 4.0), &cfg), GammaRegion::MarginExterior);
        let c = [StarObstacle::circle(vec2(0.0, 0.0), 1.0)];
        assert_eq!(classify(&c, &vec2(0.5, 0.0), &cfg), GammaRegion::Interior);
        assert_eq!(classify(&c, &vec2(1.0, 0.0), &cfg), GammaRegion::Boundary);
        assert_eq!(classify(&c, &vec2(1.6, 0.0), &cfg), GammaRegion::MarginExterior);
        assert_eq!(classify(&c, &vec2(1.3, 0.0), &cfg), GammaRegion::Exterior);
        assert_eq!(classify(&c, &vec2(0.0, 0.0), &cfg), GammaRegion::Interior);
    }

    #[test]
    fn margin_inflates_circle_exactly() {
        let c = StarObstacle::circle(vec2(0.0, 0.0), 1.0).with_margin(0.5).unwrap();
        assert!(close(gamma(&c, &vec2(0.0, 3.0)).unwrap(), 2.0, 1e-14));
    }

    #[test]
    fn margin_is_a_minkowski_offset_for_rectangles() {
        let sq = StarObstacle::rectangle(vec2(0.0, 0.0), [1.0, 1.0], 0.3).with_margin(0.25).unwrap();
        for (p, n) in sq.boundary_samples(97) {
            assert!(close(sq.signed_distance(&p), 0.25, 1e-10), "{}", sq.signed_distance(&p));
            assert!(close(n.norm(), 1.0, 1e-12));
        }
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(StarObstacle::new(Shape::Circle { radius: 0.0 }, vec2(0.0, 0.0), 0.0).is_err());
        let concave = alloc::vec![vec2(-1.0, -1.0), vec2(1.0, -1.0), vec2(0.0, -0.5), vec2(0.0, 1.0)];
        assert!(StarObstacle::new(Shape::Polygon { vertices: concave }, vec2(0.0, 0.0), 0.0).is_err());
        let c = StarObstacle::circle(vec2(0.0, 0.0), 1.0);
        assert!(c.clone().with_reference_point(vec2(1.0, 0.0)).is_err());
        assert!(c.with_reference_point(vec2(0.5, 0.0)).is_ok());
    }

    #[test]
    fn clockwise_polygon_is_reoriented() {
        let cw = alloc::vec![vec2(-1.0, -1.0), vec2(-1.0, 1.0), vec2(1.0, 1.0), vec2(1.0, -1.0)];
        let p = StarObstacle::new(Shape::Polygon { vertices: cw }, vec2(0.0, 0.0), 0.0).unwrap();
        assert!(close(p.signed_distance(&vec2(2.0, 0.0)), 1.0, 1e-15));
        assert!(close(p.signed_distance(&vec2(0.5, 0.0)), -0.5, 1e-15));
    }

    #[test]
    fn ray_cast_hits_front_surface() {
        let c = StarObstacle::circle(vec2(5.0, 0.0), 1.0);
        assert!(close(c.ray_cast(&vec2(0.0, 0.0), &vec2(1.0, 0.0)).unwrap(), 4.0, 1e-12));
        assert!(c.ray_cast(&vec2(0.0, 0.0), &vec2(-1.0, 0.0)).is_none());
        let sq = StarObstacle::rectangle(vec2(5.0, 0.0), [1.0, 1.0], 0.0);
        assert!(close(sq.ray_cast(&vec2(0.0, 0.5), &vec2(1.0, 0.0)).unwrap(), 4.0, 1e-12));
        assert!(sq.ray_cast(&vec2(0.0, 1.5), &vec2(1.0, 0.0)).is_none());
        let el = StarObstacle::ellipse(vec2(5.0, 0.0), [2.0, 1.0], 0.0);
        assert!(close(el.ray_cast(&vec2(0.0, 0.0), &vec2(1.0, 0.0)).unwrap(), 3.0, 1e-12));
    }

    #[test]
    fn moving_obstacle_velocity_field() {
        let c = StarObstacle::circle(vec2(1.0, 0.0), 0.5).with_velocity(vec2(0.2, 0.0), 1.0);
        let v = c.velocity_at(&vec2(1.0, 2.0));
        assert!((v - vec2(0.2 - 2.0, 0.0)).norm() < 1e-15);
        let moved = c.advanced(2.0);
        assert!((moved.center - vec2(1.4, 0.0)).norm() < 1e-15);
        assert!(close(moved.orientation, 2.0, 1e-15));
    }
}
