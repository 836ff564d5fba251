//! Scene generators used by the experiments, the acceptance suite and the
//! live bridge.

use std::f64::consts::PI;

use dsavoid_core::{vec2, Pose, Vec2};
use rand::Rng;

use crate::runtime::Mode;
use crate::scenario::{ObstacleSpec, Scenario, WallSpec};
use crate::world::uniform_point;

/// Straight wall at `x = 0` with one opening of width `gap`, attractor
/// behind it. All surfaces are only visible to the range sensor.
pub fn doorway(gap: f64) -> Scenario {
    let thickness = 0.2;
    let length = 3.0;
    let offset = gap / 2.0 + length / 2.0;
    let mut s = Scenario::new(Pose::new(-3.0, 0.0, 0.0));
    s.name = format!("doorway-{gap:.3}");
    s.obstacles = [offset, -offset]
        .into_iter()
        .map(|y| {
            ObstacleSpec::rectangle(vec2(0.0, y), [thickness / 2.0, length / 2.0], 0.0).with(|o| o.analytic = false)
        })
        .collect();
    s.attractor = Some([3.0, 0.0]);
    s.controller.mode = Mode::Sampled;
    s.integrator.duration = 30.0;
    s
}

/// Empty room with one pillar; the operator drives the agent by hand.
pub fn wall_room() -> Scenario {
    let mut s = Scenario::new(Pose::new(0.0, 0.0, 0.0));
    s.name = "wall".into();
    s.wall = Some(WallSpec { min: [-4.0, -3.0], max: [4.0, 3.0] });
    s.obstacles.push(ObstacleSpec::circle(vec2(-2.0, 1.5), 0.5).with(|o| o.analytic = false));
    s.integrator.duration = 3600.0;
    s
}

/// Random obstacle for property scenes: circle, ellipse or rectangle.
pub fn random_obstacle(rng: &mut impl Rng, center: Vec2) -> ObstacleSpec {
    let orientation = rng.random_range(0.0..PI);
    match rng.random_range(0..3) {
        0 => ObstacleSpec::circle(center, rng.random_range(0.2..1.0)),
        1 => ObstacleSpec::ellipse(center, [rng.random_range(0.2..1.2), rng.random_range(0.2..1.2)], orientation),
        _ => ObstacleSpec::rectangle(center, [rng.random_range(0.15..0.9), rng.random_range(0.15..0.9)], orientation),
    }
}

/// Random scene for impenetrability checks. Analytic scenes are wall-less
/// (the bounding wall is only seen by the range sensor); sampled and
/// mixed scenes sit in a room. Analytic obstacles stay apart by more than
/// the agent diameter for the whole run, so that their inflated shapes
/// form a star world. Starts are exterior with a small margin; attractors
/// are uniform and may lie inside obstacles.
pub fn random_scene(rng: &mut impl Rng, mode: Mode, seed: u64) -> Scenario {
    let lo = vec2(-4.0, -4.0);
    let hi = vec2(4.0, 4.0);
    let mut s = Scenario::new(Pose::new(0.0, 0.0, 0.0));
    s.name = format!("random-{mode}-{seed}");
    s.seed = seed;
    s.controller.mode = mode;
    s.integrator.duration = 8.0;
    if mode != Mode::Analytic {
        s.wall = Some(WallSpec { min: [-5.0, -5.0], max: [5.0, 5.0] });
    }
    let count = rng.random_range(1..=4);
    let clearance = 2.0 * s.agent.radius + ANALYTIC_SEPARATION;
    while s.obstacles.len() < count {
        let center = uniform_point(rng, lo, hi);
        let mut o = random_obstacle(rng, center);
        o.analytic = match mode {
            Mode::Analytic => true,
            Mode::Sampled => false,
            Mode::Mixed => rng.random_bool(0.5),
        };
        if mode == Mode::Analytic && rng.random_bool(0.25) {
            let v = uniform_point(rng, vec2(-0.3, -0.3), vec2(0.3, 0.3));
            o.velocity = [v.x, v.y];
        }
        let duration = s.integrator.duration;
        if o.analytic && s.obstacles.iter().filter(|p| p.analytic).any(|p| min_separation(&o, p, duration) < clearance)
        {
            continue;
        }
        s.obstacles.push(o);
    }
    s.agent.control_point_offset = if rng.random_bool(0.5) { 0.0625 } else { 0.0 };
    let world = s.world();
    let start = loop {
        let p = uniform_point(rng, lo, hi);
        if world.clearance(0.0, &p, s.agent.radius) > 0.05 {
            break p;
        }
    };
    let theta = rng.random_range(-PI..PI);
    // Place the pose so that the control point lands on `start`.
    let d = s.agent.control_point_offset;
    s.start = [start.x - d * theta.cos(), start.y - d * theta.sin(), theta];
    let goal = uniform_point(rng, lo, hi);
    s.attractor = Some([goal.x, goal.y]);
    s
}

/// Analytic circle sweeping through a resting agent at constant velocity.
pub fn moving_sweep(analytic_rate: Option<f64>) -> Scenario {
    let mut s = Scenario::new(Pose::new(0.0, 0.0, 0.0));
    s.name = "moving-sweep".into();
    s.obstacles.push(ObstacleSpec::circle(vec2(-3.0, 0.1), 0.6).with(|o| o.velocity = [0.5, 0.0]));
    s.nominal.velocity = [0.0, 0.0];
    s.controller.mode = Mode::Analytic;
    s.controller.analytic_rate = analytic_rate;
    s.integrator.duration = 14.0;
    s
}

/// Room of the convergence experiment.
pub const TABLE1_ROOM: WallSpec = WallSpec { min: [-6.0, -4.5], max: [6.0, 4.5] };

/// Four-obstacle scene: two fixed squares near the diagonal, two random
/// ellipses in the top-right and bottom-left quadrants. With `disparate`
/// the squares are known analytically and the controller fuses both
/// descriptions; otherwise every surface is only sampled.
pub fn table1_scene(rng: &mut impl Rng, disparate: bool) -> Scenario {
    let (start, goal, ellipses) = table1_layout(rng);
    table1_from_layout(start, goal, &ellipses, disparate)
}

/// Random part of the convergence scene: start, attractor and ellipses.
pub fn table1_layout(rng: &mut impl Rng) -> (Vec2, Vec2, [ObstacleSpec; 2]) {
    let squares = table1_squares();
    let quadrants = [(vec2(0.8, 0.8), vec2(5.0, 3.8)), (vec2(-5.0, -3.8), vec2(-0.8, -0.8))];
    let mut ellipses: Vec<ObstacleSpec> = Vec::with_capacity(2);
    for (lo, hi) in quadrants {
        let e = loop {
            let axes = [rng.random_range(0.3..1.2), rng.random_range(0.3..1.2)];
            let center = uniform_point(rng, lo, hi);
            let e = ObstacleSpec::ellipse(center, axes, rng.random_range(0.0..PI)).with(|o| o.analytic = false);
            let clear = squares.iter().chain(&ellipses).all(|o| separated(o, &e, 0.2));
            if clear && inside_room(&e) {
                break e;
            }
        };
        ellipses.push(e);
    }
    let mut probe =
        table1_from_layout(Vec2::zeros(), Vec2::zeros(), &[ellipses[0].clone(), ellipses[1].clone()], false);
    probe.attractor = None;
    let world = probe.world();
    let radius = probe.agent.radius;
    let mut free = |lo: Vec2, hi: Vec2| loop {
        let p = uniform_point(rng, lo, hi);
        if world.clearance(0.0, &p, radius) > 0.3 {
            break p;
        }
    };
    let start = free(vec2(-5.3, 1.5), vec2(-3.5, 3.8));
    let goal = free(vec2(3.5, -3.8), vec2(5.3, -1.5));
    (start, goal, [ellipses.remove(0), ellipses.remove(0)])
}

fn table1_squares() -> [ObstacleSpec; 2] {
    [
        ObstacleSpec::rectangle(vec2(-1.4, 1.0), [0.6, 0.6], 0.0),
        ObstacleSpec::rectangle(vec2(1.4, -1.0), [0.6, 0.6], 0.0),
    ]
}

pub fn table1_from_layout(start: Vec2, goal: Vec2, ellipses: &[ObstacleSpec; 2], disparate: bool) -> Scenario {
    let mut s = Scenario::new(Pose::new(start.x, start.y, 0.0));
    s.name = if disparate { "table1-disparate" } else { "table1-sampled" }.into();
    s.wall = Some(TABLE1_ROOM);
    s.obstacles = table1_squares().into_iter().map(|o| o.with(|o| o.analytic = disparate)).collect();
    s.obstacles.extend(ellipses.iter().cloned());
    s.attractor = Some([goal.x, goal.y]);
    s.controller.mode = if disparate { Mode::Mixed } else { Mode::Sampled };
    s.integrator.duration = 60.0;
    s
}

fn bounding(o: &ObstacleSpec) -> (Vec2, f64) {
    let r = match (o.radius, o.axes, &o.vertices) {
        (Some(r), _, _) => r,
        (_, Some([a, b]), _) => a.max(b),
        (_, _, Some(v)) => v.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max),
        _ => 0.0,
    };
    (vec2(o.center[0], o.center[1]), r)
}

/// Extra distance kept between the agent-inflated analytic obstacles of
/// random scenes, on top of the agent diameter.
pub const ANALYTIC_SEPARATION: f64 = 0.05;

/// Smallest surface distance between two obstacles over `[0, duration]`,
/// sampled every 0.1 s along their constant-velocity motion.
pub fn min_separation(a: &ObstacleSpec, b: &ObstacleSpec, duration: f64) -> f64 {
    let (Ok(a), Ok(b)) = (a.to_body(""), b.to_body("")) else {
        return f64::NEG_INFINITY;
    };
    let steps = (duration / 0.1).ceil() as usize;
    (0..=steps)
        .map(|k| {
            let t = k as f64 * 0.1;
            let (a, b) = (a.obstacle.advanced(t), b.obstacle.advanced(t));
            a.boundary_samples(720).iter().map(|(p, _)| b.signed_distance(p)).fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

fn separated(a: &ObstacleSpec, b: &ObstacleSpec, gap: f64) -> bool {
    let (ca, ra) = bounding(a);
    let (cb, rb) = bounding(b);
    (ca - cb).norm() > ra + rb + gap
}

fn inside_room(o: &ObstacleSpec) -> bool {
    let (c, r) = bounding(o);
    let room = TABLE1_ROOM;
    c.x - r > room.min[0] + 0.2
        && c.x + r < room.max[0] - 0.2
        && c.y - r > room.min[1] + 0.2
        && c.y + r < room.max[1] - 0.2
}
