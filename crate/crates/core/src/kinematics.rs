//! Differential-drive output mapping and shared-control metrics.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{rotate, vec2, Vec2};

/// Planar pose `(x, y, θ)` of the wheel-axle midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        vec2(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        vec2(self.theta.cos(), self.theta.sin())
    }

    /// The control point, `offset` ahead of the axle along the heading.
    pub fn control_point(&self, offset: f64) -> Vec2 {
        self.position() + self.heading() * offset
    }
}

/// Jacobian `J^Q = diag(1, d_c)` mapping (linear, angular) commands to the
/// body-frame velocity of the control point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPointJacobian {
    pub offset: f64,
}

impl ControlPointJacobian {
    pub fn new(offset: f64) -> Self {
        Self { offset }
    }

    pub fn forward(&self, linear: f64, angular: f64) -> Vec2 {
        vec2(linear, self.offset * angular)
    }

    /// `(J^Q)⁻¹`: body-frame control-point velocity to (linear m/s, angular rad/s).
    pub fn inverse(&self, body_velocity: &Vec2) -> (f64, f64) {
        (body_velocity.x, body_velocity.y / self.offset)
    }
}

pub fn world_to_body(pose: &Pose, v: &Vec2) -> Vec2 {
    rotate(v, -pose.theta)
}

pub fn body_to_world(pose: &Pose, v: &Vec2) -> Vec2 {
    rotate(v, pose.theta)
}

/// Relative controller input `‖ξ̇ − v^N‖ / ‖v^N‖`. Zero when both vanish;
/// infinite when the controller moves the agent without any command.
pub fn control_contribution(modulated: &Vec2, nominal: &Vec2) -> f64 {
    let diff = (modulated - nominal).norm();
    let speed = nominal.norm();
    if speed > 0.0 {
        diff / speed
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Mean of the `count` smallest distances, `None` for an empty input.
pub fn mean_of_smallest(distances: &[f64], count: usize) -> Option<f64> {
    if distances.is_empty() || count == 0 {
        return None;
    }
    let mut sorted: Vec<f64> = distances.to_vec();
    let k = count.min(sorted.len());
    sorted.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    let head = &sorted[..k];
    Some(head.iter().sum::<f64>() / k as f64)
}

/// `D^min`: mean distance between the agent surface and its ten closest points.
pub fn min_distance_metric(position: &Vec2, points: &[Vec2], radius: f64) -> Option<f64> {
    let distances: Vec<f64> = points.iter().map(|p| (p - position).norm() - radius).collect();
    mean_of_smallest(&distances, 10)
}
