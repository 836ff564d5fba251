//! Live shared-control sessions over WebSocket.
//!
//! An operator sends nominal velocities; the simulated robot executes the
//! modulated command. Text frames carry JSON:
//!
//! ```text
//! client → server  {"type":"nominal","v":[vx,vy]}
//!                  {"type":"reset","scenario":{...} | "wall" | "doorway"}
//!                  {"type":"pause"}            (toggles)
//! server → client  {"type":"state","t":..,"pose":[x,y,θ],"xi_dot":[..],"v_n":[..],
//!                   "scan":[[x,y],..],"obstacles":[..],"delta_c":..,"d_min":..}
//!                  {"type":"event","kind":"collision"|"converged"|"stale_nominal"}
//!                  {"type":"error","message":".."}
//! ```
//!
//! [`Session`] holds all the logic and is driven tick by tick; [`serve`]
//! only pumps frames between a socket and a session on a real-time clock.

use std::net::SocketAddr;
use std::time::Duration;

use dsavoid_core::vec2;
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

use crate::runtime::NominalCommand;
use crate::scenario::{ObstacleSpec, Scenario};
use crate::scenes;
use crate::sim::{Simulation, CONVERGENCE_RADIUS};

/// State frames per second of simulated time.
pub const FRAME_RATE: f64 = 30.0;
/// Most scan points sent per frame.
pub const MAX_SCAN_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    /// Built-in scene: `wall` or `doorway`.
    Named(String),
    Inline(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Nominal { v: [f64; 2] },
    Reset { scenario: ScenarioRef },
    Pause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collision,
    Converged,
    StaleNominal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub pose: [f64; 3],
    pub xi_dot: [f64; 2],
    pub v_n: [f64; 2],
    pub scan: Vec<[f64; 2]>,
    pub obstacles: Vec<ObstacleSpec>,
    pub delta_c: f64,
    /// `null` when the scan is empty.
    pub d_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateFrame),
    Event { kind: EventKind },
    Error { message: String },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    if let ClientMessage::Nominal { v } = &msg {
        if !v.iter().all(|c| c.is_finite()) {
            return Err("malformed message: nominal velocity must be finite".into());
        }
    }
    Ok(msg)
}

pub fn resolve_scenario(r: &ScenarioRef) -> Result<Scenario, String> {
    match r {
        ScenarioRef::Named(name) => match name.as_str() {
            "wall" => Ok(scenes::wall_room()),
            "doorway" => Ok(scenes::doorway(1.0)),
            other => Err(format!("unknown scenario '{other}'")),
        },
        ScenarioRef::Inline(value) => {
            Scenario::from_json(&value.to_string()).map_err(|e| format!("invalid scenario at {e}"))
        }
    }
}

/// One operator session: a simulation advanced one control period per
/// [`Session::tick`].
pub struct Session {
    pub sim: Simulation,
    pub paused: bool,
    halted: bool,
    converged: bool,
    nominal_seen: bool,
    stale: bool,
    next_frame: f64,
}

impl Session {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            sim: Simulation::new(scenario),
            paused: false,
            halted: false,
            converged: false,
            nominal_seen: false,
            stale: true,
            next_frame: 0.0,
        }
    }

    /// Handles one text frame from the client.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        match parse_client(text) {
            Ok(msg) => self.apply(msg),
            Err(message) => vec![ServerMessage::Error { message }],
        }
    }

    pub fn apply(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Nominal { v } => {
                let cmd = NominalCommand::Velocity(vec2(v[0], v[1]));
                // Commands never go back in time: a write at the current
                // tick replaces the previous one.
                let _ = self.sim.mailbox.push_nominal(cmd, self.sim.time);
                self.nominal_seen = true;
                Vec::new()
            }
            ClientMessage::Reset { scenario } => match resolve_scenario(&scenario) {
                Ok(s) => {
                    *self = Session::new(s);
                    Vec::new()
                }
                Err(message) => vec![ServerMessage::Error { message }],
            },
            ClientMessage::Pause => {
                self.paused = !self.paused;
                Vec::new()
            }
        }
    }

    /// Advances one control period and returns the frames that are due.
    pub fn tick(&mut self) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        if self.paused || self.halted {
            return out;
        }
        self.sim.sense();
        if self.sim.clearance() < -self.sim.scenario.integrator.collision_tolerance {
            self.halted = true;
            out.push(ServerMessage::Event { kind: EventKind::Collision });
            return out;
        }
        let tick = self.sim.advance();
        if tick.stale_nominal && !self.stale && self.nominal_seen {
            out.push(ServerMessage::Event { kind: EventKind::StaleNominal });
        }
        self.stale = tick.stale_nominal;
        if let Some(goal) = self.sim.scenario.attractor_point() {
            let reached = (self.sim.control_point() - goal).norm() < CONVERGENCE_RADIUS;
            if reached && !self.converged {
                out.push(ServerMessage::Event { kind: EventKind::Converged });
            }
            self.converged = reached;
        }
        if tick.time + 1e-9 >= self.next_frame {
            self.next_frame += 1.0 / FRAME_RATE;
            let scan = self.sim.mailbox.latest_scan().map(|s| decimate(&s.value.points)).unwrap_or_default();
            let obstacles = self
                .sim
                .world
                .analytic_obstacles(tick.time)
                .iter()
                .map(|o| ObstacleSpec::from_obstacle(o, true))
                .collect();
            out.push(ServerMessage::State(StateFrame {
                t: tick.time,
                pose: [tick.pose.x, tick.pose.y, tick.pose.theta],
                xi_dot: [tick.xi_dot.x, tick.xi_dot.y],
                v_n: [tick.nominal.x, tick.nominal.y],
                scan,
                obstacles,
                delta_c: tick.delta_c,
                d_min: tick.d_min,
            }));
        }
        out
    }
}

/// Every k-th point so that at most [`MAX_SCAN_POINTS`] remain.
fn decimate(points: &[dsavoid_core::Vec2]) -> Vec<[f64; 2]> {
    let step = points.len().div_ceil(MAX_SCAN_POINTS).max(1);
    points.iter().step_by(step).map(|p| [p.x, p.y]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServeOptions {
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { speed: 1.0 }
    }
}

/// Accepts clients forever; each connection gets its own session.
pub async fn serve(listener: TcpListener, scenario: Scenario, options: ServeOptions) -> std::io::Result<()> {
    loop {
        let (stream, peer) = listener.accept().await?;
        let scenario = scenario.clone();
        tokio::spawn(async move {
            if let Err(e) = run_connection(stream, peer, scenario, options).await {
                eprintln!("session {peer}: {e}");
            }
        });
    }
}

async fn run_connection(
    stream: TcpStream,
    peer: SocketAddr,
    scenario: Scenario,
    options: ServeOptions,
) -> Result<(), tokio_tungstenite::tungstenite::Error> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    eprintln!("session {peer}: connected");
    let (mut sink, mut stream) = ws.split();
    let dt = scenario.integrator.dt;
    let mut session = Session::new(scenario);
    let mut clock = tokio::time::interval(Duration::from_secs_f64(dt / options.speed.max(1e-6)));
    clock.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            incoming = stream.next() => {
                let text = match incoming {
                    None | Some(Ok(Message::Close(_))) => break,
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(_)) => continue,
                    Some(Err(e)) => return Err(e),
                };
                for msg in session.handle_text(&text) {
                    sink.send(Message::text(msg.to_json())).await?;
                }
            }
            _ = clock.tick() => {
                for msg in session.tick() {
                    sink.send(Message::text(msg.to_json())).await?;
                }
            }
        }
    }
    eprintln!("session {peer}: closed");
    Ok(())
}
