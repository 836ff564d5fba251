//! Ground-truth world: obstacle bodies, an optional bounding wall and
//! range-sensor synthesis by ray casting.

use std::f64::consts::PI;

use dsavoid_core::{vec2, Pose, ScanPointSet, StarObstacle, Vec2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Axis-aligned room the agent moves inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub min: Vec2,
    pub max: Vec2,
}

impl Wall {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    /// Distance from an interior point to the nearest side; negative outside.
    pub fn clearance(&self, p: &Vec2) -> f64 {
        (p.x - self.min.x).min(self.max.x - p.x).min(p.y - self.min.y).min(self.max.y - p.y)
    }

    /// Exit distance of a ray starting inside the room.
    pub fn ray_exit(&self, origin: &Vec2, dir: &Vec2) -> Option<f64> {
        let mut exit = f64::INFINITY;
        for axis in 0..2 {
            let d = dir[axis];
            if d > 0.0 {
                exit = exit.min((self.max[axis] - origin[axis]) / d);
            } else if d < 0.0 {
                exit = exit.min((self.min[axis] - origin[axis]) / d);
            }
        }
        (exit.is_finite() && exit >= 0.0).then_some(exit)
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        [self.min, vec2(self.max.x, self.min.y), self.max, vec2(self.min.x, self.max.y)]
    }
}

/// An obstacle body. `analytic` marks obstacles whose description is
/// available to the controller; every body is visible to the range sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub obstacle: StarObstacle,
    pub analytic: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct World {
    pub bodies: Vec<Body>,
    pub wall: Option<Wall>,
}

/// Beam layout of a simulated planar range sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    /// Angular increment (rad).
    pub delta: f64,
    /// Field of view relative to the heading, `[min, max)` (rad).
    pub fov: [f64; 2],
    pub max_range: f64,
    /// Standard deviation of additive range noise (m).
    pub noise: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self { delta: 7e-3, fov: [-PI, PI], max_range: 30.0, noise: 0.0 }
    }
}

impl ScanSpec {
    pub fn beam_count(&self) -> usize {
        ((self.fov[1] - self.fov[0]) / self.delta).round().max(0.0) as usize
    }

    /// Beam angles relative to the heading.
    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.beam_count()).map(|k| self.fov[0] + k as f64 * self.delta)
    }
}

/// One beam of a synthesized scan, relative to the sensor heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub angle: f64,
    /// `None` when nothing was hit within range.
    pub range: Option<f64>,
}

impl World {
    pub fn new(bodies: Vec<Body>, wall: Option<Wall>) -> Self {
        Self { bodies, wall }
    }

    /// Bodies moved to time `t` (all velocities are constant).
    pub fn obstacles_at(&self, t: f64) -> impl Iterator<Item = (StarObstacle, bool)> + '_ {
        self.bodies.iter().map(move |b| {
            let o = if b.obstacle.linear_velocity == Vec2::zeros() && b.obstacle.angular_velocity == 0.0 {
                b.obstacle.clone()
            } else {
                b.obstacle.advanced(t)
            };
            (o, b.analytic)
        })
    }

    /// Obstacles the controller may know analytically, at time `t`.
    pub fn analytic_obstacles(&self, t: f64) -> Vec<StarObstacle> {
        self.obstacles_at(t).filter(|(_, a)| *a).map(|(o, _)| o).collect()
    }

    /// Nearest hit of a ray against every body surface and the wall.
    pub fn ray_cast_at(&self, obstacles: &[StarObstacle], origin: &Vec2, dir: &Vec2) -> Option<f64> {
        let mut best = self.wall.and_then(|w| w.ray_exit(origin, dir));
        for o in obstacles {
            let reach = o.bounding_radius();
            // Skip bodies the ray cannot reach.
            let to_center = o.center - origin;
            let along = to_center.dot(dir);
            if along < -reach || to_center.norm_squared() - along * along > reach * reach {
                continue;
            }
            if let Some(t) = o.ray_cast(origin, dir) {
                if best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
        }
        best
    }

    /// Beams from a sensor at `origin` looking along `heading`.
    pub fn scan_beams(
        &self,
        t: f64,
        origin: &Vec2,
        heading: f64,
        spec: &ScanSpec,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Vec<Beam> {
        let obstacles: Vec<StarObstacle> = self.obstacles_at(t).map(|(o, _)| o).collect();
        let noise = if spec.noise > 0.0 { Normal::new(0.0, spec.noise).ok() } else { None };
        let mut rng = rng;
        spec.angles()
            .map(|angle| {
                let world_angle = heading + angle;
                let dir = vec2(world_angle.cos(), world_angle.sin());
                let mut range = self.ray_cast_at(&obstacles, origin, &dir);
                if let (Some(r), Some(n), Some(rng)) = (range.as_mut(), noise.as_ref(), rng.as_mut()) {
                    *r = (*r + n.sample(&mut **rng)).max(0.0);
                }
                Beam { angle, range: range.filter(|r| *r <= spec.max_range) }
            })
            .collect()
    }

    /// World-frame points of a scan taken at `pose` (sensor at `origin`).
    pub fn synthesize_scan(
        &self,
        t: f64,
        origin: &Vec2,
        heading: f64,
        spec: &ScanSpec,
        rng: Option<&mut ChaCha8Rng>,
    ) -> ScanPointSet<2> {
        let points = beams_to_points(&self.scan_beams(t, origin, heading, spec, rng), origin, heading);
        ScanPointSet::new(points, t, spec.delta)
    }

    /// Signed distance between the agent disc at `x` and the nearest body
    /// surface or wall; negative means overlap.
    pub fn clearance(&self, t: f64, x: &Vec2, radius: f64) -> f64 {
        let mut best = self.wall.map_or(f64::INFINITY, |w| w.clearance(x));
        for (o, _) in self.obstacles_at(t) {
            best = best.min(o.signed_distance(x));
        }
        best - radius
    }
}

pub fn beams_to_points(beams: &[Beam], origin: &Vec2, heading: f64) -> Vec<Vec2> {
    beams
        .iter()
        .filter_map(|b| {
            b.range.map(|r| {
                let a = heading + b.angle;
                origin + vec2(a.cos(), a.sin()) * r
            })
        })
        .collect()
}

/// Sensor origin for a pose: the control point of the agent disc.
pub fn sensor_origin(pose: &Pose, control_point_offset: f64) -> Vec2 {
    pose.control_point(control_point_offset)
}

/// Uniform point in `[lo, hi)²`.
pub fn uniform_point(rng: &mut impl Rng, lo: Vec2, hi: Vec2) -> Vec2 {
    vec2(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y))
}
