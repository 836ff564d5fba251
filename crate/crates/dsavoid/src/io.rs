//! File formats: scan logs with their metadata sidecar, trajectory CSV and
//! the provenance header carried by every output file.
//!
//! A scan log is a CSV with header `angle_rad,range_m` (angles relative to
//! the sensor heading) next to a JSON sidecar of the same stem:
//!
//! ```json
//! { "delta": 0.007, "fov": [-2.356, 2.356], "max_range": 30.0, "pose": [0, 0, 0] }
//! ```
//!
//! An optional `"timestamp"` orders the scans of a time-indexed log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dsavoid_core::{vec2, Pose, ScanPointSet};
use serde::{Deserialize, Serialize};

use crate::runtime::ControlTick;
use crate::scenario::Scenario;
use crate::world::{beams_to_points, Beam, ScanSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}: missing metadata sidecar")]
    MissingSidecar(PathBuf),
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

/// Tool version, seed and scenario hash of a generated file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the scenario, or of the inputs for scenario-less outputs.
    pub scenario_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, scenario_hash: impl Into<String>) -> Self {
        Self { tool: "dsavoid".into(), version: VERSION.into(), seed, scenario_hash: scenario_hash.into() }
    }

    pub fn for_scenario(s: &Scenario) -> Self {
        Self::new(s.seed, s.hash())
    }

    /// One comment line, `# dsavoid 0.1.0 seed=7 scenario=<hash>`.
    pub fn comment(&self, prefix: &str) -> String {
        format!("{prefix} {} {} seed={} scenario={}", self.tool, self.version, self.seed, self.scenario_hash)
    }

    /// Parses a line written by [`Provenance::comment`].
    pub fn parse_comment(line: &str) -> Option<Self> {
        let mut words = line.trim_start_matches(['#', '<', '!', '-', ' ']).split_whitespace();
        let tool = words.next()?.to_string();
        let version = words.next()?.to_string();
        let seed = words.next()?.strip_prefix("seed=")?.parse().ok()?;
        let scenario_hash = words.next()?.strip_prefix("scenario=")?.to_string();
        Some(Self { tool, version, seed, scenario_hash })
    }
}

/// Creates `path` (and its parent directory) and writes the header line.
pub fn create_with_header(path: &Path, provenance: &Provenance) -> Result<BufWriter<File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "{}", provenance.comment("#")).map_err(io_err(path))?;
    Ok(w)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file))
}

/// Reads the provenance line at the top of a generated file, if any.
pub fn read_provenance(path: &Path) -> Result<Option<Provenance>, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text.lines().next().and_then(Provenance::parse_comment))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v_cmd_lin: f64,
    pub v_cmd_ang: f64,
    pub delta_c: f64,
    /// Empty when the scan had no points.
    pub d_min: Option<f64>,
}

impl From<&ControlTick> for TrajectoryRow {
    fn from(t: &ControlTick) -> Self {
        Self {
            t: t.time,
            x: t.pose.x,
            y: t.pose.y,
            theta: t.pose.theta,
            v_cmd_lin: t.linear,
            v_cmd_ang: t.angular,
            delta_c: t.delta_c,
            d_min: t.d_min,
        }
    }
}

pub fn write_trajectory(path: &Path, provenance: &Provenance, ticks: &[ControlTick]) -> Result<(), IoError> {
    let w = create_with_header(path, provenance)?;
    let mut csv = csv::Writer::from_writer(w);
    for tick in ticks {
        csv.serialize(TrajectoryRow::from(tick)).map_err(csv_err(path))?;
    }
    csv.flush().map_err(io_err(path))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, IoError> {
    csv_reader(path)?.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

/// Sidecar metadata of one scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub delta: f64,
    pub fov: [f64; 2],
    pub max_range: f64,
    /// Sensor pose `[x, y, θ]` in the world frame.
    pub pose: [f64; 3],
    #[serde(default)]
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ScanRow {
    angle_rad: f64,
    range_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanLog {
    pub meta: ScanMeta,
    /// Beams without a return have no range.
    pub beams: Vec<Beam>,
}

impl ScanLog {
    pub fn from_beams(spec: &ScanSpec, pose: &Pose, timestamp: f64, beams: Vec<Beam>) -> Self {
        let meta = ScanMeta {
            delta: spec.delta,
            fov: spec.fov,
            max_range: spec.max_range,
            pose: [pose.x, pose.y, pose.theta],
            timestamp,
        };
        Self { meta, beams }
    }

    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    pub fn read(csv_path: &Path) -> Result<Self, IoError> {
        let sidecar = Self::sidecar_path(csv_path);
        if !sidecar.is_file() {
            return Err(IoError::MissingSidecar(csv_path.to_path_buf()));
        }
        let text = std::fs::read_to_string(&sidecar).map_err(io_err(&sidecar))?;
        let meta: ScanMeta =
            serde_json::from_str(&text).map_err(|source| IoError::Json { path: sidecar.clone(), source })?;
        if !(meta.delta > 0.0 && meta.max_range > 0.0) {
            return Err(IoError::Invalid { path: sidecar, message: "delta and max_range must be > 0".into() });
        }
        let rows: Vec<ScanRow> =
            csv_reader(csv_path)?.deserialize().collect::<Result<_, _>>().map_err(csv_err(csv_path))?;
        let beams = rows
            .into_iter()
            .map(|r| Beam {
                angle: r.angle_rad,
                range: (r.range_m.is_finite() && r.range_m > 0.0 && r.range_m < meta.max_range).then_some(r.range_m),
            })
            .collect();
        Ok(Self { meta, beams })
    }

    /// Writes the CSV and its sidecar. Beams without a return are stored at
    /// `max_range`.
    pub fn write(&self, csv_path: &Path, provenance: &Provenance) -> Result<(), IoError> {
        let w = create_with_header(csv_path, provenance)?;
        let mut csv = csv::Writer::from_writer(w);
        for b in &self.beams {
            let row = ScanRow { angle_rad: b.angle, range_m: b.range.unwrap_or(self.meta.max_range) };
            csv.serialize(row).map_err(csv_err(csv_path))?;
        }
        csv.flush().map_err(io_err(csv_path))?;
        let sidecar = Self::sidecar_path(csv_path);
        let text = serde_json::to_string_pretty(&self.meta).expect("metadata serializes");
        std::fs::write(&sidecar, text).map_err(io_err(&sidecar))
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.meta.pose[0], self.meta.pose[1], self.meta.pose[2])
    }

    /// World-frame points of the returns.
    pub fn points(&self) -> ScanPointSet<2> {
        let [x, y, theta] = self.meta.pose;
        ScanPointSet::new(beams_to_points(&self.beams, &vec2(x, y), theta), self.meta.timestamp, self.meta.delta)
    }
}

/// Reads one scan file, or every `*.csv` scan of a directory ordered by
/// timestamp then file name.
pub fn read_scan_logs(path: &Path) -> Result<Vec<ScanLog>, IoError> {
    if path.is_file() {
        return Ok(vec![ScanLog::read(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(IoError::Invalid { path: path.to_path_buf(), message: "no scan CSV files".into() });
    }
    let mut logs = files.iter().map(|f| ScanLog::read(f)).collect::<Result<Vec<_>, _>>()?;
    logs.sort_by(|a, b| a.meta.timestamp.total_cmp(&b.meta.timestamp));
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dsavoid_core::Vec2;

    #[test]
    fn provenance_line_round_trips() {
        let p = Provenance::new(42, "abc123");
        assert_eq!(Provenance::parse_comment(&p.comment("#")), Some(p.clone()));
        assert_eq!(Provenance::parse_comment(&p.comment("<!--")), Some(p));
        assert_eq!(Provenance::parse_comment("t,x,y"), None);
    }

    #[test]
    fn scan_log_round_trips_and_needs_its_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        let spec = ScanSpec { delta: 0.5, fov: [-1.0, 1.0], max_range: 10.0, noise: 0.0 };
        let beams = vec![
            Beam { angle: -1.0, range: Some(2.0) },
            Beam { angle: -0.5, range: None },
            Beam { angle: 0.0, range: Some(4.0) },
        ];
        let log = ScanLog::from_beams(&spec, &Pose::new(1.0, 0.0, 0.0), 0.0, beams);
        log.write(&path, &Provenance::new(0, "x")).unwrap();
        let back = ScanLog::read(&path).unwrap();
        assert_eq!(back, log);
        let pts = back.points();
        assert_eq!(pts.len(), 2);
        assert!((pts.points[1] - Vec2::new(5.0, 0.0)).norm() < 1e-12);
        std::fs::remove_file(ScanLog::sidecar_path(&path)).unwrap();
        assert!(matches!(ScanLog::read(&path), Err(IoError::MissingSidecar(_))));
    }
}
