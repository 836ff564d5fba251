//! Deterministic rollouts of the controller in a simulated world.

use dsavoid_core::{Pose, ScanPointSet, Vec2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::runtime::{body_command, ControlTick, Controller, Inputs, Mode, SensorMailbox};
use crate::scenario::{Scenario, Scheme};
use crate::world::World;

/// Distance to the attractor below which a rollout has converged (m).
pub const CONVERGENCE_RADIUS: f64 = 0.01;
/// Speed below which the agent counts as stopped (m/s).
pub const STALL_SPEED: f64 = 1e-4;
/// Time the agent must stay stopped to declare a local minimum (s).
pub const STALL_TIME: f64 = 2.0;
/// Stops closer than this to the attractor are not local minima (m).
pub const STALL_GOAL_DISTANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Converged,
    LocalMinimum,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Converged => 0,
            Outcome::LocalMinimum => 2,
            Outcome::Collision => 3,
            Outcome::Timeout => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::LocalMinimum => "local-minimum",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub ticks: Vec<ControlTick>,
    pub outcome: Outcome,
    /// Simulated time at which the attractor was reached.
    pub time_to_converge: Option<f64>,
    /// Smallest true clearance between the agent disc and any surface (m).
    pub min_clearance: f64,
    pub final_pose: Pose,
}

/// Something that sets the nominal command at each tick; scenario
/// rollouts use the attractor or constant velocity of the scenario.
pub type NominalSource<'a> = &'a mut dyn FnMut(f64, &Pose) -> Option<crate::runtime::NominalCommand>;

/// Where the simulated range sensor gets its points.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum ScanSource {
    /// Ray cast against the scenario world.
    #[default]
    Synthesized,
    /// Recorded world-frame scans, oldest first. The newest one stamped at
    /// or before the current time is re-issued every tick, so a single
    /// scan replays as a frozen environment.
    Recorded(Vec<ScanPointSet<2>>),
}

/// Per-tick state of a running simulation, shared by batch rollouts and
/// the live bridge.
pub struct Simulation {
    pub scenario: Scenario,
    pub world: World,
    pub mailbox: SensorMailbox,
    pub controller: Controller,
    pub pose: Pose,
    pub time: f64,
    pub source: ScanSource,
    rng: ChaCha8Rng,
    next_scan: f64,
    next_analytic: f64,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Self {
        Self::with_source(scenario, ScanSource::Synthesized)
    }

    pub fn with_source(scenario: Scenario, source: ScanSource) -> Self {
        let world = scenario.world();
        let controller = Controller::new(scenario.runtime_config());
        let mailbox = SensorMailbox::new(scenario.controller.staleness);
        let pose = scenario.start_pose();
        let rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        Self { scenario, world, mailbox, controller, pose, time: 0.0, source, rng, next_scan: 0.0, next_analytic: 0.0 }
    }

    pub fn control_point(&self) -> Vec2 {
        self.pose.control_point(self.scenario.agent.control_point_offset)
    }

    /// True clearance of the agent disc. Recorded scans count as surfaces.
    pub fn clearance(&self) -> f64 {
        let x = self.control_point();
        let radius = self.scenario.agent.radius;
        let mut c = self.world.clearance(self.time, &x, radius);
        if let Some(scan) = self.recorded_scan() {
            let nearest = scan.points.iter().map(|p| (p - x).norm()).fold(f64::INFINITY, f64::min);
            c = c.min(nearest - radius);
        }
        c
    }

    fn recorded_scan(&self) -> Option<&ScanPointSet<2>> {
        match &self.source {
            ScanSource::Synthesized => None,
            ScanSource::Recorded(scans) => scans.iter().rev().find(|s| s.timestamp <= self.time + 1e-9),
        }
    }

    /// Pushes the sensor channels that are due at the current time.
    pub fn sense(&mut self) {
        let t = self.time;
        let eps = 1e-9;
        if let ScanSource::Recorded(_) = self.source {
            if let Some(scan) = self.recorded_scan() {
                let scan = ScanPointSet::new(scan.points.clone(), t, scan.sampling_angle);
                let _ = self.mailbox.push_scan(scan);
            }
        } else if t + eps >= self.next_scan {
            let origin = self.control_point();
            let spec = self.scenario.scan.spec();
            let rng = (spec.noise > 0.0).then_some(&mut self.rng);
            let scan = self.world.synthesize_scan(t, &origin, self.pose.theta, &spec, rng);
            // A rejected write only happens for duplicate timestamps.
            let _ = self.mailbox.push_scan(scan);
            self.next_scan = match self.scenario.scan.rate {
                Some(rate) => self.next_scan + 1.0 / rate,
                None => t,
            };
        }
        if self.scenario.controller.mode != Mode::Sampled && t + eps >= self.next_analytic {
            let _ = self.mailbox.push_obstacles(self.world.analytic_obstacles(t), t);
            self.next_analytic = match self.scenario.controller.analytic_rate {
                Some(rate) => self.next_analytic + 1.0 / rate,
                None => t,
            };
        }
    }

    /// One control tick: read the mailbox, evaluate, integrate the plant
    /// over `dt`. Returns the tick evaluated at the start of the step.
    pub fn advance(&mut self) -> ControlTick {
        let t = self.time;
        let dt = self.scenario.integrator.dt;
        let inputs = self.mailbox.read(t);
        let tick = self.controller.evaluate(&inputs, &self.pose, t);
        self.pose = match self.scenario.integrator.scheme {
            Scheme::Euler => {
                let d = self.derivative(&tick.pose, &tick.xi_dot);
                offset(&self.pose, &d, dt)
            }
            Scheme::Rk4 => {
                let k1 = self.derivative(&self.pose, &tick.xi_dot);
                let p2 = offset(&self.pose, &k1, 0.5 * dt);
                let k2 = self.stage(&inputs, &p2, t + 0.5 * dt);
                let p3 = offset(&self.pose, &k2, 0.5 * dt);
                let k3 = self.stage(&inputs, &p3, t + 0.5 * dt);
                let p4 = offset(&self.pose, &k3, dt);
                let k4 = self.stage(&inputs, &p4, t + dt);
                let d = [0, 1, 2].map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
                offset(&self.pose, &d, dt)
            }
        };
        self.time = t + dt;
        tick
    }

    fn stage(&mut self, inputs: &Inputs, pose: &Pose, t: f64) -> [f64; 3] {
        let x = pose.control_point(self.scenario.agent.control_point_offset);
        let xi = self.controller.modulate(inputs, &x, t).xi_dot;
        self.derivative(pose, &xi)
    }

    /// Pose rate for a commanded control-point velocity.
    fn derivative(&self, pose: &Pose, xi_dot: &Vec2) -> [f64; 3] {
        let offset = self.scenario.agent.control_point_offset;
        if offset > 0.0 {
            let (v, w) = body_command(pose, xi_dot, offset);
            [v * pose.theta.cos(), v * pose.theta.sin(), w]
        } else {
            [xi_dot.x, xi_dot.y, 0.0]
        }
    }
}

fn offset(pose: &Pose, d: &[f64; 3], h: f64) -> Pose {
    Pose::new(pose.x + h * d[0], pose.y + h * d[1], pose.theta + h * d[2])
}

/// Runs a scenario to completion.
pub fn rollout(scenario: &Scenario) -> RolloutResult {
    let mut nominal = |_: f64, _: &Pose| Some(scenario.nominal_command());
    rollout_with(scenario, &mut nominal)
}

/// Runs a scenario with an external nominal command source (`None` means
/// no command is sent at that tick).
pub fn rollout_with(scenario: &Scenario, nominal: NominalSource<'_>) -> RolloutResult {
    rollout_source(scenario, ScanSource::Synthesized, nominal)
}

/// Rollout with an explicit scan source, e.g. a recorded log.
pub fn rollout_source(scenario: &Scenario, source: ScanSource, nominal: NominalSource<'_>) -> RolloutResult {
    let mut sim = Simulation::with_source(scenario.clone(), source);
    let attractor = scenario.attractor_point();
    let steps = (scenario.integrator.duration / scenario.integrator.dt).round() as usize;
    let tolerance = scenario.integrator.collision_tolerance;
    let mut ticks = Vec::with_capacity(steps);
    let mut min_clearance = f64::INFINITY;
    let mut stalled_for = 0.0;
    let mut outcome = Outcome::Timeout;
    let mut time_to_converge = None;

    for _ in 0..steps {
        if let Some(cmd) = nominal(sim.time, &sim.pose) {
            let _ = sim.mailbox.push_nominal(cmd, sim.time);
        }
        sim.sense();
        let clearance = sim.clearance();
        min_clearance = min_clearance.min(clearance);
        if clearance < -tolerance {
            outcome = Outcome::Collision;
            break;
        }
        let x = sim.control_point();
        if let Some(goal) = attractor {
            let distance = (x - goal).norm();
            if distance < CONVERGENCE_RADIUS {
                outcome = Outcome::Converged;
                time_to_converge = Some(sim.time);
                break;
            }
            let tick = sim.advance();
            if tick.xi_dot.norm() < STALL_SPEED && distance > STALL_GOAL_DISTANCE {
                stalled_for += scenario.integrator.dt;
            } else {
                stalled_for = 0.0;
            }
            ticks.push(tick);
            if stalled_for >= STALL_TIME - 1e-9 {
                outcome = Outcome::LocalMinimum;
                break;
            }
        } else {
            ticks.push(sim.advance());
        }
    }
    if outcome == Outcome::Timeout {
        let clearance = sim.clearance();
        min_clearance = min_clearance.min(clearance);
        if clearance < -tolerance {
            outcome = Outcome::Collision;
        }
    }
    RolloutResult { ticks, outcome, time_to_converge, min_clearance, final_pose: sim.pose }
}
