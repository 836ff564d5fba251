use crate::error::{AvoidError, Result};

/// Geometry and tuning of the controlled agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    /// Agent radius in meters.
    pub radius: f64,
    /// Distance (m) outside of which sampled obstacles must never stall the agent.
    pub gap_distance: f64,
    /// Offset (m) of the control point ahead of the wheel axle. Zero means holonomic.
    pub control_point_offset: f64,
    /// Reactivity exponent of the analytic eigenvalues.
    pub reactivity: f64,
    /// Exponent of the analytic distance weights.
    pub scaling_potential: f64,
    pub distance_scaling: f64,
    /// Exponent of the tail-negligence velocity weight.
    pub power_weight: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            radius: 0.45,
            gap_distance: 0.1,
            control_point_offset: 0.0,
            reactivity: 1.0,
            scaling_potential: 2.0,
            distance_scaling: 1.0,
            power_weight: 0.2,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.radius) {
            return Err(AvoidError::InvalidConfig("radius must be > 0"));
        }
        if !positive(self.gap_distance) {
            return Err(AvoidError::InvalidConfig("gap_distance must be > 0"));
        }
        if !(self.control_point_offset >= 0.0 && self.control_point_offset.is_finite()) {
            return Err(AvoidError::InvalidConfig("control_point_offset must be >= 0"));
        }
        if !positive(self.reactivity) {
            return Err(AvoidError::InvalidConfig("reactivity must be > 0"));
        }
        if !positive(self.scaling_potential) {
            return Err(AvoidError::InvalidConfig("scaling_potential must be > 0"));
        }
        if !positive(self.distance_scaling) {
            return Err(AvoidError::InvalidConfig("distance_scaling must be > 0"));
        }
        if !positive(self.power_weight) {
            return Err(AvoidError::InvalidConfig("power_weight must be > 0"));
        }
        Ok(())
    }
}

/// Switches for the wake-suppression refinements of the analytic modulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TailOptions {
    /// Blend the eigenvalues toward identity when moving away from obstacles.
    pub tail_negligence: bool,
    /// Down-weight obstacles lying in the wake of the nominal velocity.
    pub decreasing_tail_weight: bool,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self { tail_negligence: true, decreasing_tail_weight: false }
    }
}

impl TailOptions {
    pub const OFF: TailOptions = TailOptions { tail_negligence: false, decreasing_tail_weight: false };
}
