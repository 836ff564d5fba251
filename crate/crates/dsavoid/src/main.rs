#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dsavoid::bench::{run_benchmarks, SIZES};
use dsavoid::bridge::{resolve_scenario, serve, ScenarioRef, ServeOptions};
use dsavoid::experiment::convergence_experiment;
use dsavoid::field::{evaluate_field, render_svg, write_field_csv, Grid};
use dsavoid::io::{create_with_header, read_scan_logs, write_trajectory, Provenance, ScanLog};
use dsavoid::runtime::Mode;
use dsavoid::scenario::Scenario;
use dsavoid::sim::{rollout, rollout_source, RolloutResult, ScanSource};
use serde_json::json;

/// Exit code for unusable input (sysexits EX_DATAERR).
const EXIT_INPUT: u8 = 64;
/// Exit code for failed writes (EX_IOERR).
const EXIT_OUTPUT: u8 = 74;

#[derive(Parser)]
#[command(name = "dsavoid", version, about = "Reactive obstacle avoidance by dynamical-system modulation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the control period (s).
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Tail negligence.
    #[arg(long, global = true)]
    tail: Option<Switch>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Machine-readable summary on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a scenario and write its trajectory.
    Run { scenario: PathBuf },
    /// Evaluate the modulated vector field on a grid (CSV + SVG).
    Field {
        scenario: PathBuf,
        /// `xmin,ymin,xmax,ymax`; defaults to the room or the scene extent.
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<[f64; 4]>,
        #[arg(long, default_value_t = 41)]
        nx: usize,
        #[arg(long, default_value_t = 31)]
        ny: usize,
    },
    /// Roll out against recorded scans (a CSV file or a directory of them).
    Replay {
        scans: PathBuf,
        /// Attractor `x,y`.
        #[arg(long, value_parser = parse_pair, conflicts_with = "velocity")]
        attractor: Option<[f64; 2]>,
        /// Constant nominal velocity `vx,vy`.
        #[arg(long, value_parser = parse_pair)]
        velocity: Option<[f64; 2]>,
        /// Start pose `x,y,theta`; defaults to the pose of the first scan.
        #[arg(long, value_parser = parse_pose)]
        start: Option<[f64; 3]>,
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
    },
    /// Write the scan seen from the scenario start as a scan log.
    Scan { scenario: PathBuf },
    /// Sampled-only vs disparate convergence comparison.
    Experiment {
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Time the modulation paths.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        repetitions: usize,
    },
    /// Live shared-control bridge over WebSocket.
    Serve {
        /// Scenario file or built-in scene (`wall`, `doorway`).
        #[arg(default_value = "wall")]
        scenario: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_floats(s)
}

fn parse_pose(s: &str) -> Result<[f64; 3], String> {
    parse_floats(s)
}

fn parse_bounds(s: &str) -> Result<[f64; 4], String> {
    parse_floats(s)
}

/// Failure with its exit code.
struct Fail(u8, String);

fn input(e: impl std::fmt::Display) -> Fail {
    Fail(EXIT_INPUT, e.to_string())
}

fn output(e: impl std::fmt::Display) -> Fail {
    Fail(EXIT_OUTPUT, e.to_string())
}

impl Common {
    fn apply(&self, s: &mut Scenario) -> Result<(), Fail> {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(dt) = self.dt {
            s.integrator.dt = dt;
        }
        if let Some(mode) = self.mode {
            s.controller.mode = mode;
        }
        if let Some(tail) = self.tail {
            s.controller.tail_negligence = matches!(tail, Switch::On);
        }
        s.validate().map_err(input)
    }

    fn load(&self, path: &Path) -> Result<Scenario, Fail> {
        let mut s = Scenario::load(path).map_err(input)?;
        self.apply(&mut s)?;
        Ok(s)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, Fail> {
        std::fs::create_dir_all(&self.out).map_err(output)?;
        let path = self.out.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(value).expect("json")).map_err(output)?;
        Ok(path)
    }

    fn report(&self, summary: &serde_json::Value, text: &str) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(summary).expect("json"));
        } else {
            print!("{text}");
        }
    }
}

fn rollout_summary(c: &Common, s: &Scenario, r: &RolloutResult, name: &str) -> Result<u8, Fail> {
    let provenance = Provenance::for_scenario(s);
    let path = c.out.join(format!("{name}.csv"));
    write_trajectory(&path, &provenance, &r.ticks).map_err(output)?;
    let summary = json!({
        "provenance": provenance,
        "outcome": r.outcome,
        "exit_code": r.outcome.exit_code(),
        "time_to_converge": r.time_to_converge,
        "min_clearance": r.min_clearance,
        "ticks": r.ticks.len(),
        "final_pose": [r.final_pose.x, r.final_pose.y, r.final_pose.theta],
        "trajectory": path,
    });
    let text = format!(
        "{}: {} after {:.2} s, min clearance {:.4} m\ntrajectory: {}\n",
        if s.name.is_empty() { name } else { &s.name },
        r.outcome.as_str(),
        r.ticks.len() as f64 * s.integrator.dt,
        r.min_clearance,
        path.display()
    );
    c.report(&summary, &text);
    Ok(r.outcome.exit_code() as u8)
}

fn run(cli: Cli) -> Result<u8, Fail> {
    let c = &cli.common;
    match cli.command {
        Command::Run { scenario } => {
            let s = c.load(&scenario)?;
            let r = rollout(&s);
            rollout_summary(c, &s, &r, "trajectory")
        }
        Command::Field { scenario, bounds, nx, ny } => {
            let s = c.load(&scenario)?;
            let grid = match bounds {
                Some([x0, y0, x1, y1]) => Grid { min: [x0, y0], max: [x1, y1], nx, ny },
                None => Grid::around(&s, nx, ny),
            };
            grid.validate().map_err(input)?;
            let nodes = evaluate_field(&s, &grid);
            let provenance = Provenance::for_scenario(&s);
            let csv = c.out.join("field.csv");
            write_field_csv(&csv, &provenance, &nodes).map_err(output)?;
            let svg = c.out.join("field.svg");
            std::fs::write(&svg, render_svg(&s, &grid, &nodes, &provenance)).map_err(output)?;
            let inside = nodes.iter().filter(|n| n.inside).count();
            let summary =
                json!({ "provenance": provenance, "nodes": nodes.len(), "inside": inside, "csv": csv, "svg": svg });
            c.report(
                &summary,
                &format!("{} nodes ({inside} inside)\n{}\n{}\n", nodes.len(), csv.display(), svg.display()),
            );
            Ok(0)
        }
        Command::Replay { scans, attractor, velocity, start, duration } => {
            let logs = read_scan_logs(&scans).map_err(input)?;
            let first = &logs[0];
            let pose = start.unwrap_or(first.meta.pose);
            let mut s = Scenario::new(dsavoid_core::Pose::new(pose[0], pose[1], pose[2]));
            s.name = format!("replay-{}", scans.file_stem().map_or("scan".into(), |n| n.to_string_lossy()));
            s.attractor = attractor;
            if let Some(v) = velocity {
                s.nominal.velocity = v;
            }
            s.controller.mode = Mode::Sampled;
            s.scan.delta = first.meta.delta;
            s.integrator.duration = duration;
            if !(duration >= 0.0) {
                return Err(input("--duration must be >= 0"));
            }
            c.apply(&mut s)?;
            let source = ScanSource::Recorded(logs.iter().map(ScanLog::points).collect());
            let mut nominal = |_: f64, _: &dsavoid_core::Pose| Some(s.nominal_command());
            let r = rollout_source(&s, source, &mut nominal);
            rollout_summary(c, &s, &r, "replay")
        }
        Command::Scan { scenario } => {
            let s = c.load(&scenario)?;
            let pose = s.start_pose();
            let origin = pose.control_point(s.agent.control_point_offset);
            let spec = s.scan.spec();
            let beams = s.world().scan_beams(0.0, &origin, pose.theta, &spec, None);
            let sensor = dsavoid_core::Pose::new(origin.x, origin.y, pose.theta);
            let log = ScanLog::from_beams(&spec, &sensor, 0.0, beams);
            let path = c.out.join("scan.csv");
            log.write(&path, &Provenance::for_scenario(&s)).map_err(output)?;
            let hits = log.beams.iter().filter(|b| b.range.is_some()).count();
            let summary = json!({ "beams": log.beams.len(), "returns": hits, "csv": path });
            c.report(&summary, &format!("{} beams, {hits} returns\n{}\n", log.beams.len(), path.display()));
            Ok(0)
        }
        Command::Experiment { runs } => {
            let seed = c.seed.unwrap_or(0);
            let table = convergence_experiment(runs, seed);
            let provenance = Provenance::new(seed, format!("table1-runs={runs}"));
            let path = c.out.join("convergence.csv");
            let mut w = create_with_header(&path, &provenance).map_err(output)?;
            let mut csv = csv::Writer::from_writer(&mut w);
            csv.write_record(["run", "seed", "sampled", "disparate", "sampled_time", "disparate_time"])
                .map_err(output)?;
            let opt = |t: Option<f64>| t.map_or(String::new(), |t| format!("{t:.2}"));
            for r in &table.runs {
                csv.write_record([
                    r.run.to_string(),
                    r.seed.to_string(),
                    r.sampled.as_str().into(),
                    r.disparate.as_str().into(),
                    opt(r.sampled_time),
                    opt(r.disparate_time),
                ])
                .map_err(output)?;
            }
            csv.flush().map_err(output)?;
            drop(csv);
            let summary = json!({ "provenance": provenance, "table": table, "csv": path });
            c.report(&summary, &table.render());
            Ok(0)
        }
        Command::Bench { sizes, repetitions } => {
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(input("--sizes must be positive"));
            }
            let report = run_benchmarks(&sizes, repetitions, c.seed.unwrap_or(0));
            std::fs::create_dir_all(&c.out).map_err(output)?;
            let path = c.out.join("bench.csv");
            std::fs::write(&path, report.to_csv()).map_err(output)?;
            c.write_json("bench.json", &serde_json::to_value(&report).expect("json"))?;
            c.report(&serde_json::to_value(&report).expect("json"), &report.render());
            Ok(0)
        }
        Command::Serve { scenario, port, host, speed } => {
            let reference = if Path::new(&scenario).is_file() {
                let text = std::fs::read_to_string(&scenario).map_err(input)?;
                ScenarioRef::Inline(serde_json::from_str(&text).map_err(input)?)
            } else {
                ScenarioRef::Named(scenario)
            };
            let mut s = resolve_scenario(&reference).map_err(input)?;
            c.apply(&mut s)?;
            if !(speed > 0.0) {
                return Err(input("--speed must be > 0"));
            }
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(output)?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await.map_err(output)?;
                eprintln!("listening on ws://{}", listener.local_addr().map_err(output)?);
                serve(listener, s, ServeOptions { speed }).await.map_err(output)
            })?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
