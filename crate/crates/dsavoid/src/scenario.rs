//! Scenario files: world, agent, start, goal, sensor and integrator settings.
//!
//! Obstacle entries:
//!
//! ```json
//! { "type": "ellipse", "center": [1, 2], "axes": [1.0, 0.5], "orientation": 0.3 }
//! { "type": "circle", "center": [0, 0], "radius": 0.5, "velocity": [0.2, 0] }
//! { "type": "polygon", "center": [3, 0], "vertices": [[-1, -1], [1, -1], [1, 1], [-1, 1]] }
//! ```
//!
//! `axes` are semi-axes; polygon vertices are convex, relative to `center`
//! and rotated by `orientation`. Optional fields: `reference_point` (world
//! frame, defaults to the center), `margin`, `velocity`, `angular_velocity`
//! and `analytic` (default `true`; `false` hides the body from the
//! controller so only the range sensor sees it).

use std::f64::consts::PI;
use std::path::Path;

use dsavoid_core::{vec2, AgentConfig, Pose, Shape, StarObstacle, TailOptions, Vec2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::runtime::{Mode, NominalCommand, RuntimeConfig, StalenessLimits};
use crate::world::{Body, ScanSpec, Wall, World};

/// A schema violation located by a JSON pointer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{pointer}: {message}")]
pub struct ScenarioError {
    pub pointer: String,
    pub message: String,
}

impl ScenarioError {
    fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self { pointer: pointer.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    Ellipse,
    Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    #[serde(rename = "type")]
    pub kind: ShapeKind,
    pub center: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<[f64; 2]>,
    #[serde(default)]
    pub orientation: f64,
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub angular_velocity: f64,
    #[serde(default = "yes")]
    pub analytic: bool,
}

fn yes() -> bool {
    true
}

impl ObstacleSpec {
    pub fn circle(center: Vec2, radius: f64) -> Self {
        Self::blank(ShapeKind::Circle, center).with(|s| s.radius = Some(radius))
    }

    pub fn ellipse(center: Vec2, axes: [f64; 2], orientation: f64) -> Self {
        Self::blank(ShapeKind::Ellipse, center).with(|s| {
            s.axes = Some(axes);
            s.orientation = orientation;
        })
    }

    pub fn rectangle(center: Vec2, half: [f64; 2], orientation: f64) -> Self {
        let [a, b] = half;
        Self::blank(ShapeKind::Polygon, center).with(|s| {
            s.vertices = Some(vec![[-a, -b], [a, -b], [a, b], [-a, b]]);
            s.orientation = orientation;
        })
    }

    fn blank(kind: ShapeKind, center: Vec2) -> Self {
        Self {
            kind,
            center: [center.x, center.y],
            radius: None,
            axes: None,
            vertices: None,
            reference_point: None,
            orientation: 0.0,
            margin: 0.0,
            velocity: [0.0, 0.0],
            angular_velocity: 0.0,
            analytic: true,
        }
    }

    pub fn with(mut self, f: impl FnOnce(&mut Self)) -> Self {
        f(&mut self);
        self
    }

    pub fn to_body(&self, pointer: &str) -> Result<Body, ScenarioError> {
        let shape = match self.kind {
            ShapeKind::Circle => Shape::Circle {
                radius: self.radius.ok_or_else(|| ScenarioError::at(format!("{pointer}/radius"), "missing field"))?,
            },
            ShapeKind::Ellipse => Shape::Ellipse {
                semi_axes: self.axes.ok_or_else(|| ScenarioError::at(format!("{pointer}/axes"), "missing field"))?,
            },
            ShapeKind::Polygon => Shape::Polygon {
                vertices: self
                    .vertices
                    .as_ref()
                    .ok_or_else(|| ScenarioError::at(format!("{pointer}/vertices"), "missing field"))?
                    .iter()
                    .map(|v| vec2(v[0], v[1]))
                    .collect(),
            },
        };
        let field = match self.kind {
            ShapeKind::Circle => "radius",
            ShapeKind::Ellipse => "axes",
            ShapeKind::Polygon => "vertices",
        };
        let center = vec2(self.center[0], self.center[1]);
        let mut o = StarObstacle::new(shape, center, self.orientation)
            .map_err(|e| ScenarioError::at(format!("{pointer}/{field}"), e.to_string()))?;
        if let Some(r) = self.reference_point {
            o = o
                .with_reference_point(vec2(r[0], r[1]))
                .map_err(|e| ScenarioError::at(format!("{pointer}/reference_point"), e.to_string()))?;
        }
        o = o.with_margin(self.margin).map_err(|e| ScenarioError::at(format!("{pointer}/margin"), e.to_string()))?;
        o = o.with_velocity(vec2(self.velocity[0], self.velocity[1]), self.angular_velocity);
        Ok(Body { obstacle: o, analytic: self.analytic })
    }

    /// Spec of an existing obstacle (used for state frames and exports).
    pub fn from_obstacle(o: &StarObstacle, analytic: bool) -> Self {
        let center = o.center;
        let mut spec = match &o.shape {
            Shape::Circle { radius } => Self::circle(center, *radius),
            Shape::Ellipse { semi_axes } => Self::ellipse(center, *semi_axes, o.orientation),
            Shape::Polygon { vertices } => Self::blank(ShapeKind::Polygon, center).with(|s| {
                s.vertices = Some(vertices.iter().map(|v| [v.x, v.y]).collect());
            }),
        };
        spec.orientation = o.orientation;
        let r = o.reference_point();
        if (r - center).norm() > 0.0 {
            spec.reference_point = Some([r.x, r.y]);
        }
        spec.margin = o.margin;
        spec.velocity = [o.linear_velocity.x, o.linear_velocity.y];
        spec.angular_velocity = o.angular_velocity;
        spec.analytic = analytic;
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSpec {
    pub radius: f64,
    pub gap_distance: f64,
    pub control_point_offset: f64,
    pub reactivity: f64,
    pub scaling_potential: f64,
    pub distance_scaling: f64,
    pub power_weight: f64,
}

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec::from(AgentConfig::default())
    }
}

impl From<AgentConfig> for AgentSpec {
    fn from(c: AgentConfig) -> Self {
        Self {
            radius: c.radius,
            gap_distance: c.gap_distance,
            control_point_offset: c.control_point_offset,
            reactivity: c.reactivity,
            scaling_potential: c.scaling_potential,
            distance_scaling: c.distance_scaling,
            power_weight: c.power_weight,
        }
    }
}

impl From<AgentSpec> for AgentConfig {
    fn from(s: AgentSpec) -> Self {
        Self {
            radius: s.radius,
            gap_distance: s.gap_distance,
            control_point_offset: s.control_point_offset,
            reactivity: s.reactivity,
            scaling_potential: s.scaling_potential,
            distance_scaling: s.distance_scaling,
            power_weight: s.power_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSettings {
    pub delta: f64,
    pub fov: [f64; 2],
    pub max_range: f64,
    pub noise: f64,
    /// Scan rate (Hz); `None` scans every control tick.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

impl Default for ScanSettings {
    fn default() -> Self {
        let s = ScanSpec::default();
        Self { delta: s.delta, fov: s.fov, max_range: s.max_range, noise: s.noise, rate: None }
    }
}

impl ScanSettings {
    pub fn spec(&self) -> ScanSpec {
        ScanSpec { delta: self.delta, fov: self.fov, max_range: self.max_range, noise: self.noise }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub scheme: Scheme,
    /// Simulated time limit (s).
    pub duration: f64,
    /// A tick counts as a collision below this clearance (m).
    pub collision_tolerance: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self { dt: 0.01, scheme: Scheme::Rk4, duration: 60.0, collision_tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NominalSpec {
    /// Constant command; used when no attractor is given.
    pub velocity: [f64; 2],
    pub gain: f64,
    pub max_speed: f64,
}

impl Default for NominalSpec {
    fn default() -> Self {
        Self { velocity: [0.0, 0.0], gain: 1.0, max_speed: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSpec {
    pub mode: Mode,
    pub tail_negligence: bool,
    pub decreasing_tail_weight: bool,
    pub importance_scaling: bool,
    pub extrapolate_obstacles: bool,
    /// Rate (Hz) of analytic obstacle updates; `None` updates every tick.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_rate: Option<f64>,
    /// Corner angle (rad) covered by the missed-edge margin; `null` disables it.
    pub min_corner_angle: Option<f64>,
    pub staleness: StalenessLimits,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        let r = RuntimeConfig::default();
        Self {
            mode: r.mode,
            tail_negligence: r.tail.tail_negligence,
            decreasing_tail_weight: r.tail.decreasing_tail_weight,
            importance_scaling: r.importance_scaling,
            extrapolate_obstacles: r.extrapolate_obstacles,
            analytic_rate: None,
            min_corner_angle: r.min_corner_angle,
            staleness: StalenessLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default)]
    pub agent: AgentSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<WallSpec>,
    /// `[x, y, θ]` of the axle midpoint.
    pub start: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attractor: Option<[f64; 2]>,
    #[serde(default)]
    pub nominal: NominalSpec,
    #[serde(default)]
    pub scan: ScanSettings,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// Empty room-less scene with defaults.
    pub fn new(start: Pose) -> Self {
        Self {
            name: String::new(),
            agent: AgentSpec::default(),
            obstacles: Vec::new(),
            wall: None,
            start: [start.x, start.y, start.theta],
            attractor: None,
            nominal: NominalSpec::default(),
            scan: ScanSettings::default(),
            integrator: IntegratorSpec::default(),
            controller: ControllerSpec::default(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = json_pointer(e.path());
            ScenarioError::at(pointer, e.inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ScenarioError::at("", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Semantic checks beyond the JSON shape.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        AgentConfig::from(self.agent).validate().map_err(|e| {
            let field = match e {
                dsavoid_core::AvoidError::InvalidConfig(msg) => msg.split_whitespace().next().unwrap_or(""),
                _ => "",
            };
            ScenarioError::at(format!("/agent/{field}"), e.to_string())
        })?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.to_body(&format!("/obstacles/{i}"))?;
        }
        if let Some(w) = &self.wall {
            if !(w.min[0] < w.max[0] && w.min[1] < w.max[1]) {
                return Err(ScenarioError::at("/wall", "min must be below max"));
            }
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.scan.delta) {
            return Err(ScenarioError::at("/scan/delta", "must be > 0"));
        }
        if !(self.scan.fov[0] < self.scan.fov[1] && self.scan.fov[1] - self.scan.fov[0] <= 2.0 * PI + 1e-12) {
            return Err(ScenarioError::at("/scan/fov", "must be an increasing range of at most 2π"));
        }
        if !positive(self.scan.max_range) {
            return Err(ScenarioError::at("/scan/max_range", "must be > 0"));
        }
        if !(self.scan.noise >= 0.0) {
            return Err(ScenarioError::at("/scan/noise", "must be >= 0"));
        }
        if self.scan.rate.is_some_and(|r| !positive(r)) {
            return Err(ScenarioError::at("/scan/rate", "must be > 0"));
        }
        if self.controller.analytic_rate.is_some_and(|r| !positive(r)) {
            return Err(ScenarioError::at("/controller/analytic_rate", "must be > 0"));
        }
        if self.controller.min_corner_angle.is_some_and(|a| !(a > 0.0 && a < PI)) {
            return Err(ScenarioError::at("/controller/min_corner_angle", "must lie in (0, π)"));
        }
        if !positive(self.integrator.dt) {
            return Err(ScenarioError::at("/integrator/dt", "must be > 0"));
        }
        if !(self.integrator.duration >= 0.0) {
            return Err(ScenarioError::at("/integrator/duration", "must be >= 0"));
        }
        if !positive(self.nominal.max_speed) {
            return Err(ScenarioError::at("/nominal/max_speed", "must be > 0"));
        }
        if !positive(self.nominal.gain) {
            return Err(ScenarioError::at("/nominal/gain", "must be > 0"));
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        self.agent.into()
    }

    pub fn world(&self) -> World {
        let bodies = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| o.to_body(&format!("/obstacles/{i}")).expect("validated scenario"))
            .collect();
        let wall = self.wall.map(|w| Wall::new(vec2(w.min[0], w.min[1]), vec2(w.max[0], w.max[1])));
        World::new(bodies, wall)
    }

    pub fn start_pose(&self) -> Pose {
        Pose::new(self.start[0], self.start[1], self.start[2])
    }

    pub fn attractor_point(&self) -> Option<Vec2> {
        self.attractor.map(|a| vec2(a[0], a[1]))
    }

    pub fn nominal_command(&self) -> NominalCommand {
        match self.attractor_point() {
            Some(point) => {
                NominalCommand::Attractor { point, gain: self.nominal.gain, max_speed: self.nominal.max_speed }
            }
            None => NominalCommand::Velocity(vec2(self.nominal.velocity[0], self.nominal.velocity[1])),
        }
    }

    pub fn runtime_config(&self) -> RuntimeConfig {
        RuntimeConfig {
            agent: self.agent_config(),
            mode: self.controller.mode,
            tail: TailOptions {
                tail_negligence: self.controller.tail_negligence,
                decreasing_tail_weight: self.controller.decreasing_tail_weight,
            },
            extrapolate_obstacles: self.controller.extrapolate_obstacles,
            importance_scaling: self.controller.importance_scaling,
            min_corner_angle: self.controller.min_corner_angle,
        }
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex(&Sha256::digest(&bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        out.push('/');
        match segment {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}
