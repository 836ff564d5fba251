//! Avoidance computed directly from sampled surface points (e.g. a laser
//! scan), with no segmentation into individual obstacles.
//!
//! Reference directions here point from the agent toward the points.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
#[allow(unused_imports)]
use num_traits::Float;

use crate::config::AgentConfig;
use crate::error::{AvoidError, Result};
use crate::frame::ModulationFrame;
use crate::linalg::VecN;

/// A batch of sampled surface points, all taken at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPointSet<const D: usize> {
    pub points: Vec<VecN<D>>,
    pub timestamp: f64,
    /// Angular increment between neighbouring beams (rad).
    pub sampling_angle: f64,
}

impl<const D: usize> ScanPointSet<D> {
    pub fn new(points: Vec<VecN<D>>, timestamp: f64, sampling_angle: f64) -> Self {
        Self { points, timestamp, sampling_angle }
    }

    pub fn empty(timestamp: f64, sampling_angle: f64) -> Self {
        Self::new(Vec::new(), timestamp, sampling_angle)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unit direction toward each point and its distance to the agent surface.
pub fn point_reference_and_distance<const D: usize>(
    x: &VecN<D>,
    points: &[VecN<D>],
    radius: f64,
) -> Result<Vec<(VecN<D>, f64)>> {
    let mut contact = Vec::new();
    let out: Vec<_> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let diff = p - x;
            let dist = diff.norm();
            let gap = dist - radius;
            if !(gap > 0.0) {
                contact.push(i);
            }
            (if dist > 0.0 { diff / dist } else { diff }, gap)
        })
        .collect();
    if contact.is_empty() {
        Ok(out)
    } else {
        Err(AvoidError::Contact { indices: contact })
    }
}

/// Normalization `w_norm = D_gap·δ / (2·D_scal)` that caps the aggregated
/// reference magnitude at one for a half-plane of points at the gap distance.
#[inline]
pub fn weight_norm(config: &AgentConfig, sampling_angle: f64) -> f64 {
    config.gap_distance * sampling_angle / (2.0 * config.distance_scaling)
}

/// Aggregated reference `r̂^p = w_norm · Σ (D_scal / D_i) r_i`.
///
/// Runs in a single fixed-order pass; the result is bitwise reproducible
/// for a fixed point order. Empty input yields the zero vector.
pub fn aggregated_reference<const D: usize>(
    points: &[VecN<D>],
    x: &VecN<D>,
    config: &AgentConfig,
    sampling_angle: f64,
) -> Result<VecN<D>> {
    let mut sum = VecN::<D>::zeros();
    let mut in_contact = false;
    for p in points {
        let diff = p - x;
        let dist = diff.norm();
        let gap = dist - config.radius;
        if !(gap > 0.0) {
            in_contact = true;
            continue;
        }
        sum += diff * (1.0 / (dist * gap));
    }
    if in_contact {
        return Err(contact_error(points, x, config.radius));
    }
    Ok(sum * (config.distance_scaling * weight_norm(config, sampling_angle)))
}

fn contact_error<const D: usize>(points: &[VecN<D>], x: &VecN<D>, radius: f64) -> AvoidError {
    let indices =
        points.iter().enumerate().filter(|(_, p)| !((*p - x).norm() - radius > 0.0)).map(|(i, _)| i).collect();
    AvoidError::Contact { indices }
}

/// Radial eigenvalue in `[−1, 1]`. Its sign flips to let the agent retreat
/// when it is closer than the no-stall distance and moving away.
pub fn eigenvalue_reference_sampled<const D: usize>(reference: &VecN<D>, velocity: &VecN<D>) -> f64 {
    reference_eigenvalue(reference.norm(), reference.dot(velocity))
}

/// Radial eigenvalue from the reference magnitude and the sign of the
/// velocity along the toward-obstacle direction (`approach < 0` retreats).
pub fn reference_eigenvalue(magnitude: f64, approach: f64) -> f64 {
    let base = if magnitude < 2.0 { (FRAC_PI_2 * magnitude).cos() } else { -1.0 };
    if magnitude > 1.0 && approach < 0.0 {
        -base
    } else {
        base
    }
}

/// Tangent eigenvalue in `[0, 2]`, C¹ in the reference magnitude.
pub fn eigenvalue_tangent_sampled(magnitude: f64) -> f64 {
    if magnitude < 1.0 {
        1.0 + (FRAC_PI_2 * magnitude).sin()
    } else {
        2.0 * (PI / (2.0 * magnitude)).sin()
    }
}

/// Orthonormal frame for an aggregated (toward-obstacle) reference.
/// `None` when the reference vanishes, i.e. the modulation is the identity.
pub fn sampled_frame<const D: usize>(reference: &VecN<D>, velocity: &VecN<D>) -> Option<ModulationFrame<D>> {
    let magnitude = reference.norm();
    if !(magnitude > 0.0) {
        return None;
    }
    let unit = if magnitude.is_finite() {
        reference / magnitude
    } else {
        // Overflowed sums only happen on top of a point; keep the direction.
        let scaled = reference.map(|c| c.clamp(-f64::MAX, f64::MAX) * 0.5);
        scaled.normalize()
    };
    Some(ModulationFrame::orthonormal(
        *reference,
        unit,
        eigenvalue_reference_sampled(reference, velocity),
        eigenvalue_tangent_sampled(magnitude),
    ))
}

/// Modulated velocity from sampled points alone.
pub fn modulate_sampled<const D: usize>(
    x: &VecN<D>,
    nominal: &VecN<D>,
    scan: &ScanPointSet<D>,
    config: &AgentConfig,
) -> Result<VecN<D>> {
    let reference = aggregated_reference(&scan.points, x, config, scan.sampling_angle)?;
    Ok(match sampled_frame(&reference, nominal) {
        Some(frame) => frame.apply(nominal),
        None => *nominal,
    })
}

/// Extra radius (relative to the robot radius) covering obstacle edges
/// that fall between two beams, for a minimum obstacle corner angle.
pub fn missed_edge_margin(sampling_angle: f64, min_corner_angle: f64) -> f64 {
    let half = 0.5 * sampling_angle;
    half.sin() / (0.5 * min_corner_angle).tan() + (1.0 - half.cos())
}

/// Whether an obstacle of curvature radius `obstacle_to_robot_ratio`
/// (relative to the robot radius) is resolved safely by the scan.
pub fn curvature_is_resolvable(obstacle_to_robot_ratio: f64, sampling_angle: f64, min_corner_angle: f64) -> bool {
    obstacle_to_robot_ratio > (0.5 * sampling_angle).sin() / (0.5 * min_corner_angle).cos()
}
