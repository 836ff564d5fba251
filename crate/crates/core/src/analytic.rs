//! Fast avoidance of analytic star worlds through one virtual obstacle.
//!
//! All obstacles are folded into a single averaged reference direction and a
//! summed normal, so exactly one modulation matrix is applied per query.
//! Reference directions point from the obstacles toward the agent.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
#[allow(unused_imports)]
use num_traits::Float;

use crate::config::{AgentConfig, TailOptions};
use crate::error::{AvoidError, Result};
use crate::frame::ModulationFrame;
use crate::linalg::{normalized, VecN};
use crate::obstacle::{ObstacleSample, StarShape};

/// Raw weights below this are treated as "no influence".
pub const WEIGHT_EPSILON: f64 = 1e-12;

/// Floor for the alignment factor of the decreasing tail weight.
pub const TAIL_ALIGNMENT_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleWeights {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub raw_sum: f64,
}

impl ObstacleWeights {
    /// Normalizes only when the raw weights sum above one.
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let raw_sum: f64 = raw.iter().sum();
        let normalized = if raw_sum > 1.0 { raw.iter().map(|w| w / raw_sum).collect() } else { raw.clone() };
        Self { raw, normalized, raw_sum }
    }
}

/// Distance weight of a single obstacle for a given Gamma.
#[inline]
pub fn raw_weight(gamma: f64, config: &AgentConfig) -> f64 {
    (config.distance_scaling / (gamma - 1.0)).powf(config.scaling_potential)
}

/// Weights of each obstacle at `x`. Fails when `x` is not exterior to one of them.
pub fn obstacle_weights<const D: usize, O: StarShape<D>>(
    obstacles: &[O],
    x: &VecN<D>,
    config: &AgentConfig,
) -> Result<ObstacleWeights> {
    let raw = obstacles
        .iter()
        .enumerate()
        .map(|(index, o)| {
            let g = o.gamma(x).map_err(|_| AvoidError::InsideObstacle { index })?;
            if g <= 1.0 {
                return Err(AvoidError::InsideObstacle { index });
            }
            Ok(raw_weight(g, config))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ObstacleWeights::from_raw(raw))
}

/// Weighted sum of the unit reference directions.
pub fn averaged_reference<const D: usize>(weights: &[f64], references: &[VecN<D>]) -> VecN<D> {
    weights.iter().zip(references).fold(VecN::<D>::zeros(), |acc, (w, r)| acc + r * *w)
}

/// Result of summing the per-obstacle normals around a reference direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummedNormal<const D: usize> {
    /// Unnormalized normal `c^n r + n^Δ`.
    pub raw: VecN<D>,
    pub unit: VecN<D>,
    pub offset: VecN<D>,
    pub scaling: f64,
}

/// Weighted normal offset `Σ w_i (n_i − r_i)`.
pub fn normal_offset<const D: usize>(weights: &[f64], normals: &[VecN<D>], references: &[VecN<D>]) -> VecN<D> {
    weights.iter().zip(normals.iter().zip(references)).fold(VecN::<D>::zeros(), |acc, (w, (n, r))| acc + (n - r) * *w)
}

/// Combines a unit reference direction with a normal offset. The scaling
/// `c^n ∈ [1, √2]` keeps `⟨r, n̂⟩ > 0` whenever `‖n^Δ‖ < √2`.
pub fn combine_normal<const D: usize>(reference: &VecN<D>, offset: &VecN<D>) -> SummedNormal<D> {
    let offset_norm = offset.norm();
    if offset_norm == 0.0 {
        return SummedNormal { raw: *reference, unit: *reference, offset: *offset, scaling: 1.0 };
    }
    let projection = -reference.dot(offset) / offset_norm;
    let scaling = if projection < FRAC_1_SQRT_2 { 1.0 } else { SQRT_2 * projection };
    let raw = reference * scaling + offset;
    let unit = normalized(&raw).unwrap_or(*reference);
    SummedNormal { raw, unit, offset: *offset, scaling }
}

pub fn summed_normal<const D: usize>(
    weights: &[f64],
    normals: &[VecN<D>],
    references: &[VecN<D>],
    reference: &VecN<D>,
) -> SummedNormal<D> {
    combine_normal(reference, &normal_offset(weights, normals, references))
}

/// `(λ^r, λ^e) = (1 − ‖r̂‖^ρ, 1 + ‖r̂‖^ρ)`, with the magnitude clamped to [0, 1].
pub fn eigenvalues_analytic(reference_norm: f64, reactivity: f64) -> (f64, f64) {
    let p = reference_norm.clamp(0.0, 1.0).powf(reactivity);
    (1.0 - p, 1.0 + p)
}

/// Blends the eigenvalues toward one when the nominal velocity already
/// leaves the virtual obstacle. `direction` is the unit outward direction
/// used for the alignment test; the frame passes its normal so that a
/// velocity entering the surface is never exempted.
pub fn tail_eigenvalues<const D: usize>(
    eigenvalues: (f64, f64),
    reference_norm: f64,
    direction: &VecN<D>,
    nominal: &VecN<D>,
    power_weight: f64,
) -> (f64, f64) {
    let speed = nominal.norm();
    if speed == 0.0 || reference_norm == 0.0 {
        return eigenvalues;
    }
    let w_r = (1.0 / reference_norm).min(1.0);
    blend_tail(eigenvalues, w_r, retreat_alignment(direction, nominal, power_weight))
}

/// `w^v = max(0, ⟨d, v⟩/‖v‖)^{c_w}` for the outward direction `d`.
pub fn retreat_alignment<const D: usize>(direction: &VecN<D>, velocity: &VecN<D>, power_weight: f64) -> f64 {
    let speed = velocity.norm();
    if speed == 0.0 {
        return 0.0;
    }
    (direction.dot(velocity) / speed).max(0.0).powf(power_weight)
}

/// Tail blend of `(λ^r, λ^e)` toward one with the weights `w^r`, `w^v`.
pub fn blend_tail(eigenvalues: (f64, f64), w_r: f64, w_v: f64) -> (f64, f64) {
    let (lambda_r, lambda_e) = eigenvalues;
    let sign = if w_v > 0.0 { 1.0 } else { 0.0 };
    let tail_e = w_r * w_v + (1.0 - w_r * w_v) * lambda_e;
    let tail_r = tail_e * w_r * sign + (1.0 - w_r * sign) * lambda_r;
    (tail_r, tail_e)
}

/// Reduces the raw weights of obstacles lying in the wake of `nominal`.
pub fn decreasing_tail_weight<const D: usize>(raw: &mut [f64], references: &[VecN<D>], nominal: &VecN<D>) {
    let speed = nominal.norm();
    let total: f64 = raw.iter().sum();
    if speed == 0.0 || !(total > 0.0) || !total.is_finite() {
        return;
    }
    for (w, r) in raw.iter_mut().zip(references) {
        if *w == 0.0 {
            continue;
        }
        let alignment = 1.0 - nominal.dot(r) / (speed * r.norm());
        let c = alignment.max(TAIL_ALIGNMENT_FLOOR);
        *w *= (*w / total).powf(1.0 / c);
    }
}

/// Per-obstacle geometry gathered once per query.
#[derive(Debug, Clone, Default)]
pub struct AnalyticScratch<const D: usize> {
    pub samples: Vec<ObstacleSample<D>>,
    pub raw: Vec<f64>,
}

/// Weights, summed reference and normal of the virtual obstacle. `None`
/// when no obstacle has any influence at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualObstacle<const D: usize> {
    pub weights: ObstacleWeights,
    /// Averaged reference `r̂^o` (obstacle → agent), norm in [0, 1].
    pub reference: VecN<D>,
    /// Weighted normal offset `n^Δ`.
    pub normal_offset: VecN<D>,
}

/// Gathers the virtual obstacle seen from `x`, reusing `scratch`.
pub fn virtual_obstacle<const D: usize, O: StarShape<D>>(
    x: &VecN<D>,
    nominal: &VecN<D>,
    obstacles: &[O],
    config: &AgentConfig,
    tail: TailOptions,
    scratch: &mut AnalyticScratch<D>,
) -> Result<Option<VirtualObstacle<D>>> {
    scratch.samples.clear();
    scratch.raw.clear();
    for (index, obstacle) in obstacles.iter().enumerate() {
        let sample = obstacle.sample(x).map_err(|_| AvoidError::InsideObstacle { index })?;
        if !(sample.gamma > 1.0) {
            return Err(AvoidError::InsideObstacle { index });
        }
        scratch.raw.push(raw_weight(sample.gamma, config));
        scratch.samples.push(sample);
    }
    if !scratch.raw.iter().any(|w| *w > WEIGHT_EPSILON) {
        return Ok(None);
    }
    let references: Vec<VecN<D>> = scratch.samples.iter().map(|s| s.reference).collect();
    let normals: Vec<VecN<D>> = scratch.samples.iter().map(|s| s.normal).collect();
    let mut raw = scratch.raw.clone();
    if tail.decreasing_tail_weight {
        decreasing_tail_weight(&mut raw, &references, nominal);
    }
    let weights = ObstacleWeights::from_raw(raw);
    let reference = averaged_reference(&weights.normalized, &references);
    let normal_offset = normal_offset(&weights.normalized, &normals, &references);
    Ok(Some(VirtualObstacle { weights, reference, normal_offset }))
}

/// Builds the modulation frame of the virtual obstacle.
pub fn analytic_frame<const D: usize>(
    virtual_obstacle: &VirtualObstacle<D>,
    nominal: &VecN<D>,
    config: &AgentConfig,
    tail: TailOptions,
) -> Option<ModulationFrame<D>> {
    let reference_norm = virtual_obstacle.reference.norm().min(1.0);
    let unit_reference = normalized(&virtual_obstacle.reference)?;
    let normal = combine_normal(&unit_reference, &virtual_obstacle.normal_offset);
    let mut eigenvalues = eigenvalues_analytic(reference_norm, config.reactivity);
    if tail.tail_negligence {
        eigenvalues = tail_eigenvalues(eigenvalues, reference_norm, &normal.unit, nominal, config.power_weight);
    }
    Some(ModulationFrame {
        averaged_reference: virtual_obstacle.reference,
        reference: unit_reference,
        normal: normal.unit,
        normal_offset: normal.offset,
        normal_scaling: normal.scaling,
        lambda_r: eigenvalues.0,
        lambda_e: eigenvalues.1,
    })
}

/// Modulated velocity around an analytic star world.
pub fn modulate_analytic<const D: usize, O: StarShape<D>>(
    x: &VecN<D>,
    nominal: &VecN<D>,
    obstacles: &[O],
    config: &AgentConfig,
    tail: TailOptions,
) -> Result<VecN<D>> {
    let mut scratch = AnalyticScratch::default();
    modulate_analytic_with(x, nominal, obstacles, config, tail, &mut scratch)
}

pub fn modulate_analytic_with<const D: usize, O: StarShape<D>>(
    x: &VecN<D>,
    nominal: &VecN<D>,
    obstacles: &[O],
    config: &AgentConfig,
    tail: TailOptions,
    scratch: &mut AnalyticScratch<D>,
) -> Result<VecN<D>> {
    let Some(virtual_obstacle) = virtual_obstacle(x, nominal, obstacles, config, tail, scratch)? else {
        return Ok(*nominal);
    };
    match analytic_frame(&virtual_obstacle, nominal, config, tail) {
        Some(frame) => Ok(frame.apply(nominal)),
        // Perfectly cancelling references: zero magnitude, identity eigenvalues.
        None => Ok(*nominal),
    }
}

/// Modulation around moving analytic obstacles: the nominal velocity is
/// taken relative to the weighted obstacle velocity `ξ̇_d`, which is added
/// back afterwards, `ξ̇ = M·(v^N − ξ̇_d) + ξ̇_d`. Equals
/// [`modulate_analytic_with`] when every obstacle is at rest.
pub fn modulate_analytic_moving_with<const D: usize, O: StarShape<D>>(
    x: &VecN<D>,
    nominal: &VecN<D>,
    obstacles: &[O],
    config: &AgentConfig,
    tail: TailOptions,
    scratch: &mut AnalyticScratch<D>,
) -> Result<VecN<D>> {
    let Some(virtual_obstacle) = virtual_obstacle(x, nominal, obstacles, config, tail, scratch)? else {
        return Ok(*nominal);
    };
    let obstacle_velocity = obstacles
        .iter()
        .zip(&virtual_obstacle.weights.normalized)
        .fold(VecN::<D>::zeros(), |acc, (o, w)| acc + o.velocity_at(x) * *w);
    let relative = nominal - obstacle_velocity;
    match analytic_frame(&virtual_obstacle, &relative, config, tail) {
        Some(frame) => Ok(frame.apply(&relative) + obstacle_velocity),
        None => Ok(*nominal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{vec2, Vec2};
    use crate::obstacle::StarObstacle;

    fn cfg() -> AgentConfig {
        AgentConfig::default()
    }

    #[test]
    fn weight_examples() {
        let c = StarObstacle::circle(vec2(0.0, 0.0), 1.0);
        let w = obstacle_weights(core::slice::from_ref(&c), &vec2(2.0, 0.0), &cfg()).unwrap();
        assert_eq!(w.raw, [1.0]);
        assert_eq!(w.normalized, [1.0]);

        let d = StarObstacle::circle(vec2(4.0, 0.0), 1.0);
        let w = obstacle_weights(&[c.clone(), d], &vec2(2.0, 0.0), &cfg()).unwrap();
        assert_eq!(w.raw, [1.0, 1.0]);
        assert_eq!(w.normalized, [0.5, 0.5]);

        let w = obstacle_weights(core::slice::from_ref(&c), &vec2(3.0, 0.0), &cfg()).unwrap();
        assert!((w.raw[0] - 0.25).abs() < 1e-15);
        assert_eq!(w.normalized, w.raw);

        let err = obstacle_weights(&[c], &vec2(0.5, 0.0), &cfg()).unwrap_err();
        assert_eq!(err, AvoidError::InsideObstacle { index: 0 });
    }

    #[test]
    fn averaged_reference_examples() {
        let r = averaged_reference(&[0.5, 0.5], &[vec2(1.0, 0.0), vec2(-1.0, 0.0)]);
        assert_eq!(r, vec2(0.0, 0.0));
        let r = averaged_reference(&[1.0], &[vec2(0.0, 1.0)]);
        assert_eq!(r, vec2(0.0, 1.0));
        let r = averaged_reference(&[0.5, 0.5], &[vec2(1.0, 0.0), vec2(0.0, 1.0)]);
        assert!((r.norm() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn summed_normal_examples() {
        // Spheres: normals equal references, offset vanishes.
        let refs = [vec2(1.0, 0.0), vec2(0.0, 1.0)];
        let r = averaged_reference(&[0.5, 0.5], &refs).normalize();
        let s = summed_normal(&[0.5, 0.5], &refs, &refs, &r);
        assert_eq!(s.unit, r);
        assert_eq!(s.scaling, 1.0);

        let s = combine_normal(&vec2(1.0, 0.0), &vec2(0.0, 0.5));
        assert_eq!(s.scaling, 1.0);
        assert!((s.raw - vec2(1.0, 0.5)).norm() < 1e-15);

        // Projection is normalized by the offset length: p = 1, so c = √2.
        let s = combine_normal(&vec2(1.0, 0.0), &vec2(-0.9, 0.0));
        assert_eq!(s.scaling, SQRT_2);
        assert!((s.raw.x - (SQRT_2 - 0.9)).abs() < 1e-15);
        assert!(s.raw.x > 0.0);
        // Partial anti-alignment, p = 0.8 ≥ √2/2.
        let s = combine_normal(&vec2(1.0, 0.0), &vec2(-0.8, 0.6));
        assert!((s.scaling - SQRT_2 * 0.8).abs() < 1e-15);
        assert!(s.raw.dot(&vec2(1.0, 0.0)) > 0.0);
    }

    #[test]
    fn analytic_eigenvalue_examples() {
        assert_eq!(eigenvalues_analytic(0.0, 1.0), (1.0, 1.0));
        assert_eq!(eigenvalues_analytic(1.0, 1.0), (0.0, 2.0));
        let (r, e) = eigenvalues_analytic(0.5, 2.0);
        assert!((r - 0.75).abs() < 1e-15 && (e - 1.25).abs() < 1e-15);
    }

    #[test]
    fn tail_eigenvalue_examples() {
        let r = vec2(1.0, 0.0);
        // Moving toward the obstacle: unchanged.
        assert_eq!(tail_eigenvalues((0.3, 1.7), 0.7, &r, &vec2(-1.0, 0.2), 0.2), (0.3, 1.7));
        // Directly away at surface level: identity.
        let (tr, te) = tail_eigenvalues((0.0, 2.0), 1.0, &r, &vec2(2.0, 0.0), 0.2);
        assert!((tr - 1.0).abs() < 1e-15 && (te - 1.0).abs() < 1e-15);
        // Partial alignment.
        let (le, lr) = (1.5, 0.5);
        let v = vec2(0.5, 0.75f64.sqrt());
        let (_, te) = tail_eigenvalues((lr, le), 0.5, &r, &v, 0.2);
        let wv = 0.5f64.powf(0.2);
        assert!((wv - 0.870_550_563_3).abs() < 1e-9);
        assert!((te - (wv + (1.0 - wv) * le)).abs() < 1e-12);
    }

    #[test]
    fn decreasing_tail_weight_examples() {
        let mut w = [2.0];
        decreasing_tail_weight(&mut w, &[vec2(1.0, 0.0)], &vec2(0.0, 1.0));
        assert_eq!(w, [2.0]);

        let mut w = [1.0, 1.0];
        decreasing_tail_weight(&mut w, &[vec2(1.0, 0.0), vec2(1.0, 0.0)], &vec2(-1.0, 0.0));
        assert!((w[0] - 0.5f64.sqrt()).abs() < 1e-15);

        let mut w = [1.0, 1.0];
        decreasing_tail_weight(&mut w, &[vec2(1.0, 0.0), vec2(0.0, 1.0)], &vec2(1.0, 0.0));
        assert!(w[0] < 1e-300);
        assert!((w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_world_is_identity() {
        let none: [StarObstacle; 0] = [];
        let v = modulate_analytic(&vec2(1.0, 2.0), &vec2(1.0, 0.0), &none, &cfg(), TailOptions::default()).unwrap();
        assert_eq!(v, vec2(1.0, 0.0));
    }

    #[test]
    fn head_on_saddle_stops_at_surface() {
        let c = [StarObstacle::circle(vec2(0.0, 0.0), 1.0)];
        let nominal = vec2(-1.0, 0.0);
        for gap in [1e-6, 1e-12] {
            let x: Vec2 = vec2(1.0 + gap, 0.0);
            let v = modulate_analytic(&x, &nominal, &c, &cfg(), TailOptions::default()).unwrap();
            assert!(v.norm() < 1e-10, "{v}");
        }
    }

    #[test]
    fn far_field_short_circuit_is_exact() {
        let c = [StarObstacle::ellipse(vec2(0.0, 0.0), [2.0, 1.0], 0.3)];
        let nominal = vec2(0.3, -0.7);
        let v = modulate_analytic(&vec2(1e7, 3e6), &nominal, &c, &cfg(), TailOptions::default()).unwrap();
        assert_eq!(v, nominal);
    }

    #[test]
    fn moving_obstacle_term() {
        let mut scratch = AnalyticScratch::default();
        let tail = TailOptions::default();
        let still = [StarObstacle::ellipse(vec2(0.0, 0.0), [1.5, 0.7], 0.4)];
        let x = vec2(1.2, 1.1);
        let v = vec2(-0.4, -0.9);
        let a = modulate_analytic_moving_with(&x, &v, &still, &cfg(), tail, &mut scratch).unwrap();
        let b = modulate_analytic(&x, &v, &still, &cfg(), tail).unwrap();
        assert_eq!(a, b);

        // A resting agent on the surface of an approaching circle moves with it.
        let moving = [StarObstacle::circle(vec2(0.0, 0.0), 1.0).with_velocity(vec2(0.5, 0.0), 0.0)];
        let xi =
            modulate_analytic_moving_with(&vec2(1.0 + 1e-9, 0.0), &Vec2::zeros(), &moving, &cfg(), tail, &mut scratch)
                .unwrap();
        assert!((xi.x - 0.5).abs() < 1e-6 && xi.y.abs() < 1e-12, "{xi}");
    }
}
