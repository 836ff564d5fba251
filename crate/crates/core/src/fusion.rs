//! Fusion of sampled points with analytic obstacle descriptions.
//!
//! The mixed frame works in the toward-obstacle convention of the sampled
//! path: the analytic reference (obstacle → agent) is negated before mixing.
//! Eigenvalues always come from the trigonometric (sampled) family since the
//! mixed magnitude may exceed one.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::analytic::{blend_tail, combine_normal, retreat_alignment, virtual_obstacle, AnalyticScratch};
use crate::config::{AgentConfig, TailOptions};
use crate::error::Result;
use crate::frame::ModulationFrame;
use crate::linalg::{normalized, VecN};
use crate::obstacle::{StarObstacle, StarShape};
use crate::sampled::{aggregated_reference, eigenvalue_tangent_sampled, reference_eigenvalue};

/// Drops every point lying on or inside one of the analytic obstacles.
pub fn prune_points(points: &[crate::linalg::Vec2], obstacles: &[StarObstacle]) -> Vec<crate::linalg::Vec2> {
    points
        .iter()
        .filter(|p| {
            !obstacles.iter().any(|o| {
                let reach = o.bounding_radius() + o.margin;
                if (*p - o.center).norm_squared() > reach * reach {
                    return false;
                }
                match o.gamma(p) {
                    Ok(g) => g <= 1.0,
                    Err(_) => true,
                }
            })
        })
        .copied()
        .collect()
}

/// Same as [`prune_points`] for any star shape, without the bounding prefilter.
pub fn prune_points_generic<const D: usize, O: StarShape<D>>(points: &[VecN<D>], obstacles: &[O]) -> Vec<VecN<D>> {
    points.iter().filter(|p| !obstacles.iter().any(|o| o.gamma(p).map_or(true, |g| g <= 1.0))).copied().collect()
}

fn importance(magnitude: f64) -> f64 {
    1.0 / (1.0 - magnitude) - 1.0
}

/// Importance of the sampled and the analytic information, `(w^p, w^o)`.
///
/// Both magnitudes are unbounded proximity measures: the sampled magnitude
/// `‖r̄^p‖` and the norm of the raw-weighted analytic reference
/// `‖r̄^o‖ = ‖Σ ŵ_i r_i‖`, which equals `‖r̂^o‖` until the raw weights sum
/// past one. Below one, each enters as `1/(1 − m) − 1`, which diverges at
/// one, so a saturated side takes all the weight. When both are saturated
/// the split follows the excess over one, which grows without bound at the
/// respective surfaces. The weights are continuous except at the single
/// point where both magnitudes equal one. Both zero encodes "no
/// information".
pub fn fusion_weights(sampled_magnitude: f64, analytic_magnitude: f64) -> (f64, f64) {
    let (p, o) = (sampled_magnitude.max(0.0), analytic_magnitude.max(0.0));
    let (wp, wo) = match (p >= 1.0, o >= 1.0) {
        (true, true) if p + o == 2.0 => (1.0, 1.0),
        (true, true) => (p - 1.0, o - 1.0),
        (true, false) => (1.0, 0.0),
        (false, true) => (0.0, 1.0),
        (false, false) => (importance(p), importance(o)),
    };
    let total = wp + wo;
    if total > 0.0 {
        (wp / total, wo / total)
    } else {
        (0.0, 0.0)
    }
}

/// Mixed reference `r^m = w^p·r̂^p − w^o·r̂^o` (toward-obstacle convention).
pub fn mixed_reference<const D: usize>(
    sampled_weight: f64,
    analytic_weight: f64,
    sampled_reference: &VecN<D>,
    analytic_reference: &VecN<D>,
) -> VecN<D> {
    sampled_reference * sampled_weight - analytic_reference * analytic_weight
}

/// Intermediate quantities of one mixed evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedFrame<const D: usize> {
    pub sampled_weight: f64,
    pub analytic_weight: f64,
    pub sampled_reference: VecN<D>,
    pub analytic_reference: VecN<D>,
    pub mixed_reference: VecN<D>,
    /// Weighted average velocity of the analytic obstacles at the agent.
    pub obstacle_velocity: VecN<D>,
    /// `w^o` times the obstacle velocity.
    pub damped_velocity: VecN<D>,
    /// `None` when the modulation is the identity.
    pub modulation: Option<ModulationFrame<D>>,
}

/// Builds the fused frame for the agent at `x`.
///
/// `points` must already be pruned against `obstacles`. The tangent space
/// is taken orthogonal to a mixed normal: the analytic normal offset scaled
/// by `w^o` and recombined with the mixed reference, so the frame reduces to
/// the analytic one when only analytic obstacles are present and to the
/// orthonormal sampled one when only points are.
#[allow(clippy::too_many_arguments)]
pub fn mixed_frame<const D: usize, O: StarShape<D>>(
    x: &VecN<D>,
    nominal: &VecN<D>,
    points: &[VecN<D>],
    sampling_angle: f64,
    obstacles: &[O],
    config: &AgentConfig,
    tail: TailOptions,
    scratch: &mut AnalyticScratch<D>,
) -> Result<MixedFrame<D>> {
    let sampled_reference = aggregated_reference(points, x, config, sampling_angle)?;
    let analytic_tail = TailOptions { tail_negligence: false, ..tail };
    let virtual_obstacle = virtual_obstacle(x, nominal, obstacles, config, analytic_tail, scratch)?;

    let (analytic_reference, normal_offset, obstacle_velocity, raw_magnitude) = match &virtual_obstacle {
        Some(v) => {
            let velocity = obstacles
                .iter()
                .zip(&v.weights.normalized)
                .fold(VecN::<D>::zeros(), |acc, (o, w)| acc + o.velocity_at(x) * *w);
            (v.reference, v.normal_offset, velocity, v.reference.norm() * v.weights.raw_sum.max(1.0))
        }
        None => (VecN::<D>::zeros(), VecN::<D>::zeros(), VecN::<D>::zeros(), 0.0),
    };

    let (sampled_weight, analytic_weight) = fusion_weights(sampled_reference.norm(), raw_magnitude);
    let mixed = mixed_reference(sampled_weight, analytic_weight, &sampled_reference, &analytic_reference);
    let damped_velocity = obstacle_velocity * analytic_weight;
    let relative = nominal - damped_velocity;

    let modulation = normalized(&mixed).map(|unit| {
        let normal = combine_normal(&unit, &(-normal_offset * analytic_weight));
        let magnitude = mixed.norm();
        // The retreat test uses the normal so that motion into the surface
        // is never treated as moving away.
        let mut eigenvalues =
            (reference_eigenvalue(magnitude, normal.unit.dot(&relative)), eigenvalue_tangent_sampled(magnitude));
        if tail.tail_negligence && analytic_weight > 0.0 {
            // Analytic tail negligence, in proportion to the analytic share.
            let w_r = analytic_weight * (1.0 / magnitude).min(1.0);
            let w_v = retreat_alignment(&-normal.unit, &relative, config.power_weight);
            eigenvalues = blend_tail(eigenvalues, w_r, w_v);
        }
        ModulationFrame {
            averaged_reference: mixed,
            reference: unit,
            normal: normal.unit,
            normal_offset: normal.offset,
            normal_scaling: normal.scaling,
            lambda_r: eigenvalues.0,
            lambda_e: eigenvalues.1,
        }
    });

    Ok(MixedFrame {
        sampled_weight,
        analytic_weight,
        sampled_reference,
        analytic_reference,
        mixed_reference: mixed,
        obstacle_velocity,
        damped_velocity,
        modulation,
    })
}

/// Modulated velocity from fused sampled and analytic information,
/// including the obstacle-velocity term: `ξ̇ = M·(v^N − ξ̇_d) + ξ̇_d`.
#[allow(clippy::too_many_arguments)]
pub fn modulate_mixed<const D: usize, O: StarShape<D>>(
    x: &VecN<D>,
    nominal: &VecN<D>,
    points: &[VecN<D>],
    sampling_angle: f64,
    obstacles: &[O],
    config: &AgentConfig,
    tail: TailOptions,
    scratch: &mut AnalyticScratch<D>,
) -> Result<VecN<D>> {
    let frame = mixed_frame(x, nominal, points, sampling_angle, obstacles, config, tail, scratch)?;
    Ok(apply_mixed(&frame, nominal))
}

pub fn apply_mixed<const D: usize>(frame: &MixedFrame<D>, nominal: &VecN<D>) -> VecN<D> {
    match &frame.modulation {
        Some(m) => m.apply(&(nominal - frame.damped_velocity)) + frame.damped_velocity,
        None => *nominal,
    }
}

/// Distance scaling that gives sampled and analytic obstacles comparable
/// influence: `2π / δ^(d−1)` for a surface scan in `d` dimensions.
pub fn importance_scaling(sampling_angle: f64, dimension: u32) -> f64 {
    2.0 * PI / sampling_angle.powi(dimension as i32 - 1)
}
