//! Asynchronous controller: latest-value sensor mailbox and the fixed-rate
//! control step.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use dsavoid_core::analytic::{modulate_analytic_moving_with, AnalyticScratch};
use dsavoid_core::fusion::{apply_mixed, importance_scaling, mixed_frame, prune_points};
use dsavoid_core::kinematics::{control_contribution, min_distance_metric, world_to_body};
use dsavoid_core::sampled::{aggregated_reference, missed_edge_margin, sampled_frame};
use dsavoid_core::{AgentConfig, ControlPointJacobian, Pose, ScanPointSet, StarObstacle, TailOptions, Vec2};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

/// Extra margin used when removing scan points that belong to an analytic
/// obstacle, so hits on its true surface are always dropped.
pub const PRUNE_TOLERANCE: f64 = 1e-6;

/// How many recent payloads each channel keeps for time-indexed reads.
const CHANNEL_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Sampled,
    #[default]
    Mixed,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Sampled => "sampled",
            Mode::Mixed => "mixed",
        })
    }
}

/// Operator or planner command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NominalCommand {
    Velocity(Vec2),
    /// Linear dynamics `gain·(ξ^a − ξ)`, saturated at `max_speed`.
    Attractor {
        point: Vec2,
        gain: f64,
        max_speed: f64,
    },
}

impl NominalCommand {
    pub fn at(&self, x: &Vec2) -> Vec2 {
        match self {
            NominalCommand::Velocity(v) => *v,
            NominalCommand::Attractor { point, gain, max_speed } => {
                let v = (point - x) * *gain;
                let speed = v.norm();
                if speed > *max_speed {
                    v * (*max_speed / speed)
                } else {
                    v
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MailboxError {
    #[error("stale write on the {channel} channel: t={timestamp} is older than t={latest}")]
    StaleWrite { channel: &'static str, timestamp: f64, latest: f64 },
}

#[derive(Debug)]
pub struct Stamped<T> {
    pub timestamp: f64,
    pub value: Arc<T>,
}

impl<T> Clone for Stamped<T> {
    fn clone(&self) -> Self {
        Self { timestamp: self.timestamp, value: Arc::clone(&self.value) }
    }
}

#[derive(Debug)]
struct Channel<T> {
    name: &'static str,
    history: Mutex<VecDeque<Stamped<T>>>,
}

impl<T> Channel<T> {
    fn new(name: &'static str) -> Self {
        Self { name, history: Mutex::new(VecDeque::with_capacity(CHANNEL_DEPTH)) }
    }

    fn push(&self, timestamp: f64, value: T) -> Result<(), MailboxError> {
        let mut history = self.history.lock();
        if let Some(latest) = history.back() {
            if timestamp < latest.timestamp || timestamp.is_nan() {
                return Err(MailboxError::StaleWrite { channel: self.name, timestamp, latest: latest.timestamp });
            }
            if timestamp == latest.timestamp {
                history.pop_back();
            }
        }
        if history.len() == CHANNEL_DEPTH {
            history.pop_front();
        }
        history.push_back(Stamped { timestamp, value: Arc::new(value) });
        Ok(())
    }

    /// Newest payload stamped at or before `t`.
    fn read(&self, t: f64) -> Option<Stamped<T>> {
        self.history.lock().iter().rev().find(|s| s.timestamp <= t).cloned()
    }

    fn latest(&self) -> Option<Stamped<T>> {
        self.history.lock().back().cloned()
    }

    fn clear(&self) {
        self.history.lock().clear();
    }
}

/// Per-channel age (s) after which a payload is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StalenessLimits {
    pub scan: f64,
    pub obstacles: f64,
    pub nominal: f64,
}

impl Default for StalenessLimits {
    fn default() -> Self {
        Self { scan: 0.25, obstacles: 2.0, nominal: 0.25 }
    }
}

/// Latest-value registers for scans, analytic obstacle sets and nominal
/// commands. Writers and the control step may live on different threads.
#[derive(Debug)]
pub struct SensorMailbox {
    scan: Channel<ScanPointSet<2>>,
    obstacles: Channel<Vec<StarObstacle>>,
    nominal: Channel<NominalCommand>,
    pub limits: StalenessLimits,
}

impl Default for SensorMailbox {
    fn default() -> Self {
        Self::new(StalenessLimits::default())
    }
}

/// Channel contents valid at one instant.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub time: f64,
    pub scan: Option<Stamped<ScanPointSet<2>>>,
    pub obstacles: Option<Stamped<Vec<StarObstacle>>>,
    pub nominal: Option<Stamped<NominalCommand>>,
    pub scan_stale: bool,
    pub obstacles_stale: bool,
    pub nominal_stale: bool,
}

impl SensorMailbox {
    pub fn new(limits: StalenessLimits) -> Self {
        Self {
            scan: Channel::new("scan"),
            obstacles: Channel::new("obstacles"),
            nominal: Channel::new("nominal"),
            limits,
        }
    }

    pub fn push_scan(&self, scan: ScanPointSet<2>) -> Result<(), MailboxError> {
        self.scan.push(scan.timestamp, scan)
    }

    pub fn push_obstacles(&self, obstacles: Vec<StarObstacle>, timestamp: f64) -> Result<(), MailboxError> {
        self.obstacles.push(timestamp, obstacles)
    }

    pub fn push_nominal(&self, command: NominalCommand, timestamp: f64) -> Result<(), MailboxError> {
        self.nominal.push(timestamp, command)
    }

    pub fn latest_scan(&self) -> Option<Stamped<ScanPointSet<2>>> {
        self.scan.latest()
    }

    pub fn latest_obstacles(&self) -> Option<Stamped<Vec<StarObstacle>>> {
        self.obstacles.latest()
    }

    pub fn latest_nominal(&self) -> Option<Stamped<NominalCommand>> {
        self.nominal.latest()
    }

    pub fn clear(&self) {
        self.scan.clear();
        self.obstacles.clear();
        self.nominal.clear();
    }

    /// Newest payload per channel with timestamp ≤ `t`; stale payloads are
    /// dropped and flagged.
    pub fn read(&self, t: f64) -> Inputs {
        fn fresh<T>(s: Option<Stamped<T>>, t: f64, limit: f64) -> (Option<Stamped<T>>, bool) {
            match s {
                Some(s) if t - s.timestamp > limit => (None, true),
                Some(s) => (Some(s), false),
                None => (None, true),
            }
        }
        let (scan, scan_stale) = fresh(self.scan.read(t), t, self.limits.scan);
        let (obstacles, obstacles_stale) = fresh(self.obstacles.read(t), t, self.limits.obstacles);
        let (nominal, nominal_stale) = fresh(self.nominal.read(t), t, self.limits.nominal);
        Inputs { time: t, scan, obstacles, nominal, scan_stale, obstacles_stale, nominal_stale }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeConfig {
    pub agent: AgentConfig,
    pub mode: Mode,
    pub tail: TailOptions,
    /// Move analytic obstacles along their velocity from their timestamp
    /// to the evaluation time.
    pub extrapolate_obstacles: bool,
    /// Use `2π/δ` as distance scaling of the analytic obstacles in mixed mode.
    pub importance_scaling: bool,
    /// Smallest obstacle corner angle (rad) the scan must resolve. Sampled
    /// points are avoided with the radius grown by the missed-edge margin
    /// for this angle; `None` uses the bare radius.
    pub min_corner_angle: Option<f64>,
}

impl RuntimeConfig {
    /// Radius used against sampled points of a scan with increment `delta`.
    pub fn sampled_radius(&self, delta: f64) -> f64 {
        let r = self.agent.radius;
        self.min_corner_angle.map_or(r, |phi| r * (1.0 + missed_edge_margin(delta, phi)))
    }
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            mode: Mode::Mixed,
            tail: TailOptions::default(),
            extrapolate_obstacles: true,
            importance_scaling: false,
            min_corner_angle: Some(FRAC_PI_4),
        }
    }
}

/// Result of one controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTick {
    pub time: f64,
    pub pose: Pose,
    /// Evaluated point ξ (center of the agent disc).
    pub control_point: Vec2,
    /// Modulated control-point velocity, world frame.
    pub xi_dot: Vec2,
    /// Nominal velocity, world frame (zero when stale).
    pub nominal: Vec2,
    /// Linear command (m/s). For holonomic agents the body-frame x velocity.
    pub linear: f64,
    /// Angular command (rad/s). For holonomic agents the body-frame y velocity.
    pub angular: f64,
    pub delta_c: f64,
    pub d_min: Option<f64>,
    /// The agent touched sensed points or entered an analytic obstacle.
    pub contact: bool,
    pub stale_nominal: bool,
    pub sampled_weight: f64,
    pub analytic_weight: f64,
}

#[derive(Debug, Default)]
pub struct Controller {
    pub config: RuntimeConfig,
    scratch: AnalyticScratch<2>,
}

impl Controller {
    pub fn new(config: RuntimeConfig) -> Self {
        Self { config, scratch: AnalyticScratch::default() }
    }

    /// Reads the mailbox at `t` and evaluates the command at `pose`.
    pub fn step(&mut self, mailbox: &SensorMailbox, pose: &Pose, t: f64) -> ControlTick {
        let inputs = mailbox.read(t);
        self.evaluate(&inputs, pose, t)
    }

    /// Evaluates the controller on a fixed input snapshot. `t` may differ
    /// from the snapshot time (integrator sub-stages).
    pub fn evaluate(&mut self, inputs: &Inputs, pose: &Pose, t: f64) -> ControlTick {
        let agent = self.config.agent;
        let x = pose.control_point(agent.control_point_offset);
        let points = inputs.scan.as_ref().map_or(&[][..], |s| s.value.points.as_slice());
        let out = self.modulate(inputs, &x, t);
        let (linear, angular) = body_command(pose, &out.xi_dot, agent.control_point_offset);
        ControlTick {
            time: t,
            pose: *pose,
            control_point: x,
            xi_dot: out.xi_dot,
            nominal: out.nominal,
            linear,
            angular,
            delta_c: control_contribution(&out.xi_dot, &out.nominal),
            d_min: min_distance_metric(&x, points, agent.radius),
            contact: out.contact,
            stale_nominal: inputs.nominal.is_none(),
            sampled_weight: out.sampled_weight,
            analytic_weight: out.analytic_weight,
        }
    }

    /// Modulated velocity of the control point `x` without the metrics.
    pub fn modulate(&mut self, inputs: &Inputs, x: &Vec2, t: f64) -> Modulated {
        let agent = self.config.agent;
        let mut out = Modulated::default();
        let Some(nominal) = &inputs.nominal else {
            return out;
        };
        let v = nominal.value.at(x);
        out.nominal = v;
        let (points, delta) = match &inputs.scan {
            Some(s) => (s.value.points.as_slice(), s.value.sampling_angle),
            None => (&[][..], 7e-3),
        };

        let obstacles: Vec<StarObstacle> = match &inputs.obstacles {
            Some(o) if self.config.mode != Mode::Sampled => o
                .value
                .iter()
                .map(|ob| {
                    let dt = t - o.timestamp;
                    if self.config.extrapolate_obstacles && dt != 0.0 {
                        ob.advanced(dt)
                    } else {
                        ob.clone()
                    }
                })
                .collect(),
            _ => Vec::new(),
        };
        let inflated: Vec<StarObstacle> = obstacles.iter().map(|o| o.inflated(agent.radius)).collect();
        let mut sampled_agent = agent;
        sampled_agent.radius = self.config.sampled_radius(delta);

        let result = match self.config.mode {
            Mode::Analytic => {
                modulate_analytic_moving_with(x, &v, &inflated, &agent, self.config.tail, &mut self.scratch)
                    .map(|xi| (xi, 0.0, 1.0))
            }
            Mode::Sampled => aggregated_reference(points, x, &sampled_agent, delta)
                .map(|r| (sampled_frame(&r, &v).map_or(v, |f| f.apply(&v)), 1.0, 0.0)),
            Mode::Mixed => {
                let pruners: Vec<StarObstacle> = obstacles.iter().map(|o| o.inflated(PRUNE_TOLERANCE)).collect();
                let kept = prune_points(points, &pruners);
                let mut mixed_agent = sampled_agent;
                if self.config.importance_scaling {
                    mixed_agent.distance_scaling = importance_scaling(delta, 2);
                }
                mixed_frame(x, &v, &kept, delta, &inflated, &mixed_agent, self.config.tail, &mut self.scratch)
                    .map(|f| (apply_mixed(&f, &v), f.sampled_weight, f.analytic_weight))
            }
        };
        match result {
            Ok((xi, wp, wo)) => {
                out.xi_dot = xi;
                out.sampled_weight = wp;
                out.analytic_weight = wo;
            }
            Err(_) => out.contact = true,
        }
        out
    }
}

/// Output of [`Controller::modulate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Modulated {
    pub xi_dot: Vec2,
    pub nominal: Vec2,
    pub contact: bool,
    pub sampled_weight: f64,
    pub analytic_weight: f64,
}

/// `(J^Q)⁻¹` applied to the body-frame control-point velocity. A zero
/// offset means a holonomic agent: the body-frame components are returned.
pub fn body_command(pose: &Pose, xi_dot: &Vec2, control_point_offset: f64) -> (f64, f64) {
    let body = world_to_body(pose, xi_dot);
    if control_point_offset > 0.0 {
        ControlPointJacobian::new(control_point_offset).inverse(&body)
    } else {
        (body.x, body.y)
    }
}
