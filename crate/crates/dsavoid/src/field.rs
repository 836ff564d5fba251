//! Vector fields of the modulated dynamics on a grid, with CSV and SVG
//! export.
//!
//! Every node is evaluated as if the agent stood there: the range sensor
//! scans the world from the node and the controller sees the analytic
//! obstacles of the scene. Nodes where the agent disc overlaps a surface
//! are marked and not evaluated.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use dsavoid_core::{vec2, Vec2};
use serde::Serialize;

use crate::io::{create_with_header, IoError, Provenance};
use crate::runtime::{Controller, Inputs, Stamped};
use crate::scenario::Scenario;
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Bounds of the room, or of the scene content with a 1 m border.
    pub fn around(s: &Scenario, nx: usize, ny: usize) -> Self {
        if let Some(w) = s.wall {
            return Self { min: w.min, max: w.max, nx, ny };
        }
        let mut lo = vec2(s.start[0], s.start[1]);
        let mut hi = lo;
        let mut grow = |p: Vec2, r: f64| {
            lo = lo.inf(&(p - vec2(r, r)));
            hi = hi.sup(&(p + vec2(r, r)));
        };
        if let Some(a) = s.attractor_point() {
            grow(a, 0.0);
        }
        for (o, _) in s.world().obstacles_at(0.0) {
            grow(o.center, o.bounding_radius());
        }
        Self { min: [lo.x - 1.0, lo.y - 1.0], max: [hi.x + 1.0, hi.y + 1.0], nx, ny }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec2> + '_ {
        let step = |lo: f64, hi: f64, n: usize, i: usize| {
            if n > 1 {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            } else {
                0.5 * (lo + hi)
            }
        };
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).map(move |i| {
                vec2(step(self.min[0], self.max[0], self.nx, i), step(self.min[1], self.max[1], self.ny, j))
            })
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.min[0] < self.max[0] && self.min[1] < self.max[1]) {
            return Err("grid min must be below max".into());
        }
        if self.nx == 0 || self.ny == 0 {
            return Err("grid needs at least one node per axis".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldNode {
    pub x: f64,
    pub y: f64,
    pub inside: bool,
    /// `None` for inside nodes and when the controller reports contact.
    pub xi_dot: Option<[f64; 2]>,
    pub nominal: [f64; 2],
    pub delta_c: Option<f64>,
}

/// Evaluates the controller of `scenario` at every grid node.
pub fn evaluate_field(scenario: &Scenario, grid: &Grid) -> Vec<FieldNode> {
    let world = scenario.world();
    let spec = scenario.scan.spec();
    let radius = scenario.agent.radius;
    let mut controller = Controller::new(scenario.runtime_config());
    let obstacles = Stamped { timestamp: 0.0, value: Arc::new(world.analytic_obstacles(0.0)) };
    let nominal = Stamped { timestamp: 0.0, value: Arc::new(scenario.nominal_command()) };
    grid.nodes()
        .map(|p| {
            let v = nominal.value.at(&p);
            let mut node =
                FieldNode { x: p.x, y: p.y, inside: false, xi_dot: None, nominal: [v.x, v.y], delta_c: None };
            if world.clearance(0.0, &p, radius) < 0.0 {
                node.inside = true;
                return node;
            }
            let scan = world.synthesize_scan(0.0, &p, 0.0, &spec, None);
            let inputs = Inputs {
                time: 0.0,
                scan: Some(Stamped { timestamp: 0.0, value: Arc::new(scan) }),
                obstacles: Some(obstacles.clone()),
                nominal: Some(nominal.clone()),
                scan_stale: false,
                obstacles_stale: false,
                nominal_stale: false,
            };
            let out = controller.modulate(&inputs, &p, 0.0);
            if !out.contact {
                node.xi_dot = Some([out.xi_dot.x, out.xi_dot.y]);
                node.delta_c = Some(dsavoid_core::kinematics::control_contribution(&out.xi_dot, &out.nominal));
            }
            node
        })
        .collect()
}

pub fn write_field_csv(path: &Path, provenance: &Provenance, nodes: &[FieldNode]) -> Result<(), IoError> {
    let mut w = create_with_header(path, provenance)?;
    let io = |source| IoError::Io { path: path.to_path_buf(), source };
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    writeln!(w, "x,y,inside,xi_x,xi_y,v_x,v_y,delta_c").map_err(io)?;
    for n in nodes {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            n.x,
            n.y,
            n.inside as u8,
            opt(n.xi_dot.map(|v| v[0])),
            opt(n.xi_dot.map(|v| v[1])),
            n.nominal[0],
            n.nominal[1],
            opt(n.delta_c)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

fn outline(points: &[Vec2], to_px: &impl Fn(Vec2) -> (f64, f64)) -> String {
    points.iter().map(|p| to_px(*p)).map(|(x, y)| format!("{x:.1},{y:.1}")).collect::<Vec<_>>().join(" ")
}

/// Quiver plot of the field over the scene. Analytic obstacles are filled,
/// scan-only surfaces are drawn as sample dots.
pub fn render_svg(scenario: &Scenario, grid: &Grid, nodes: &[FieldNode], provenance: &Provenance) -> String {
    let world: World = scenario.world();
    let scale = 800.0 / (grid.max[0] - grid.min[0]).max(grid.max[1] - grid.min[1]);
    let width = (grid.max[0] - grid.min[0]) * scale + 40.0;
    let height = (grid.max[1] - grid.min[1]) * scale + 40.0;
    let to_px = |p: Vec2| (20.0 + (p.x - grid.min[0]) * scale, 20.0 + (grid.max[1] - p.y) * scale);
    let mut svg = String::new();
    let _ = writeln!(svg, "{}", provenance.comment("<!--") + " -->");
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(
        svg,
        r##"<defs><marker id="a" viewBox="0 0 6 6" refX="5" refY="3" markerWidth="4" markerHeight="4" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#234"/></marker></defs>"##
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(w) = &world.wall {
        let corners: Vec<Vec2> = w.corners().to_vec();
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="none" stroke="#555" stroke-width="3"/>"##,
            outline(&corners, &to_px)
        );
    }
    for (o, analytic) in world.obstacles_at(0.0) {
        let boundary: Vec<Vec2> = o.boundary_samples(96).into_iter().map(|(p, _)| p).collect();
        if analytic {
            let _ = writeln!(
                svg,
                r##"<polygon points="{}" fill="#c9d6e8" stroke="#35557f" stroke-width="1.5"/>"##,
                outline(&boundary, &to_px)
            );
        } else {
            for p in boundary.iter().step_by(2) {
                let (x, y) = to_px(*p);
                let _ = writeln!(svg, r##"<circle cx="{x:.1}" cy="{y:.1}" r="1.6" fill="#b3402a"/>"##);
            }
        }
    }
    let dx = (grid.max[0] - grid.min[0]) / grid.nx.max(2) as f64;
    let dy = (grid.max[1] - grid.min[1]) / grid.ny.max(2) as f64;
    let arrow = 0.8 * dx.min(dy) * scale;
    for n in nodes {
        let (x, y) = to_px(vec2(n.x, n.y));
        match n.xi_dot {
            _ if n.inside => {
                let _ = writeln!(svg, r##"<circle cx="{x:.1}" cy="{y:.1}" r="1.2" fill="#999"/>"##);
            }
            Some([vx, vy]) if vx.hypot(vy) > 1e-12 => {
                let s = arrow / vx.hypot(vy);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{:.1}" stroke="#234" stroke-width="1" marker-end="url(#a)"/>"##,
                    x + vx * s,
                    y - vy * s
                );
            }
            _ => {
                let _ = writeln!(svg, r##"<circle cx="{x:.1}" cy="{y:.1}" r="1.5" fill="none" stroke="#234"/>"##);
            }
        }
    }
    if let Some(a) = scenario.attractor_point() {
        let (x, y) = to_px(a);
        let _ = writeln!(svg, r##"<circle cx="{x:.1}" cy="{y:.1}" r="6" fill="#e0a100" stroke="black"/>"##);
    }
    svg.push_str("</svg>\n");
    svg
}
