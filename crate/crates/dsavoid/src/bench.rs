//! Timing of the modulation paths against a per-obstacle baseline.
//!
//! The baseline modulates the nominal velocity around each obstacle on its
//! own and averages the results, magnitude and direction separately, with
//! the distance weights normalized to one. It is a re-creation for slope
//! comparison, not a bit-exact port of the earlier method.

use std::f64::consts::PI;
use std::hint::black_box;
use std::time::Instant;

use dsavoid_core::analytic::{modulate_analytic_with, obstacle_weights, AnalyticScratch, WEIGHT_EPSILON};
use dsavoid_core::linalg::rotate;
use dsavoid_core::{modulate_sampled, vec2, AgentConfig, Result, ScanPointSet, StarObstacle, TailOptions, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::io::Provenance;

/// Problem sizes of the default report.
pub const SIZES: [usize; 5] = [10, 100, 1_000, 10_000, 30_000];

/// Per-obstacle modulation with weighted averaging of the results.
pub fn baseline_modulate(
    x: &Vec2,
    nominal: &Vec2,
    obstacles: &[StarObstacle],
    config: &AgentConfig,
    tail: TailOptions,
    scratch: &mut AnalyticScratch<2>,
) -> Result<Vec2> {
    let weights = obstacle_weights(obstacles, x, config)?;
    let speed = nominal.norm();
    if weights.raw_sum <= WEIGHT_EPSILON || speed == 0.0 {
        return Ok(*nominal);
    }
    let mut magnitude = 0.0;
    let mut angle = 0.0;
    for (o, w) in obstacles.iter().zip(&weights.raw) {
        let w = w / weights.raw_sum;
        let xi = modulate_analytic_with(x, nominal, std::slice::from_ref(o), config, tail, scratch)?;
        magnitude += w * xi.norm();
        // Angle relative to the nominal direction, so that opposite
        // deflections cannot cancel to a zero vector.
        angle += w * (nominal.x * xi.y - nominal.y * xi.x).atan2(nominal.dot(&xi));
    }
    Ok(rotate(nominal, angle) * (magnitude / speed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchPath {
    FastAnalytic,
    BaselineAnalytic,
    Sampled,
}

impl BenchPath {
    pub const ALL: [BenchPath; 3] = [BenchPath::FastAnalytic, BenchPath::BaselineAnalytic, BenchPath::Sampled];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchPath::FastAnalytic => "fast-analytic",
            BenchPath::BaselineAnalytic => "baseline-analytic",
            BenchPath::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub path: BenchPath,
    /// Obstacles or points.
    pub n: usize,
    pub median_us: f64,
    pub p95_us: f64,
}

/// Least-squares line through (n, median time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub path: BenchPath,
    pub slope_us: f64,
    pub intercept_us: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub provenance: Provenance,
    pub repetitions: usize,
    pub timings: Vec<Timing>,
    pub fits: Vec<LinearFit>,
}

/// `n` small circles scattered around the origin, none covering it.
pub fn analytic_scene(n: usize, rng: &mut impl Rng) -> Vec<StarObstacle> {
    (0..n)
        .map(|_| {
            let angle = rng.random_range(0.0..2.0 * PI);
            let distance = rng.random_range(1.5..10.0);
            StarObstacle::circle(vec2(angle.cos(), angle.sin()) * distance, rng.random_range(0.1..0.5))
        })
        .collect()
}

/// `n` points on a noisy ring of radius 2 around the origin.
pub fn sampled_scene(n: usize, rng: &mut impl Rng) -> ScanPointSet<2> {
    let delta = 2.0 * PI / n as f64;
    let points = (0..n)
        .map(|k| {
            let a = k as f64 * delta;
            vec2(a.cos(), a.sin()) * (2.0 + rng.random_range(0.0..0.5))
        })
        .collect();
    ScanPointSet::new(points, 0.0, delta)
}

pub fn linear_fit(path: BenchPath, xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit { path, slope_us: slope, intercept_us: my - slope * mx, r2 }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

/// Times `f` after checking that it is deterministic. Only `f` is timed.
fn time_call(repetitions: usize, mut f: impl FnMut() -> Vec2) -> (f64, f64) {
    let first = f();
    assert_eq!(first, f(), "modulation is not deterministic");
    for _ in 0..repetitions.div_ceil(10) {
        black_box(f());
    }
    let mut samples: Vec<f64> = (0..repetitions.max(1))
        .map(|_| {
            let start = Instant::now();
            black_box(f());
            start.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    (percentile(&samples, 0.5), percentile(&samples, 0.95))
}

/// Median time of one path at one size.
pub fn time_path(path: BenchPath, n: usize, repetitions: usize, seed: u64) -> Timing {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let config = AgentConfig::default();
    let x = Vec2::zeros();
    let v = vec2(1.0, 0.3);
    let tail = TailOptions::default();
    let mut scratch = AnalyticScratch::default();
    let (median_us, p95_us) = match path {
        BenchPath::FastAnalytic => {
            let obstacles = analytic_scene(n, &mut rng);
            time_call(repetitions, || modulate_analytic_with(&x, &v, &obstacles, &config, tail, &mut scratch).unwrap())
        }
        BenchPath::BaselineAnalytic => {
            let obstacles = analytic_scene(n, &mut rng);
            time_call(repetitions, || baseline_modulate(&x, &v, &obstacles, &config, tail, &mut scratch).unwrap())
        }
        BenchPath::Sampled => {
            let scan = sampled_scene(n, &mut rng);
            time_call(repetitions, || modulate_sampled(&x, &v, &scan, &config).unwrap())
        }
    };
    Timing { path, n, median_us, p95_us }
}

pub fn run_benchmarks(sizes: &[usize], repetitions: usize, seed: u64) -> BenchReport {
    let mut timings = Vec::new();
    let mut fits = Vec::new();
    for path in BenchPath::ALL {
        let rows: Vec<Timing> = sizes.iter().map(|&n| time_path(path, n, repetitions, seed)).collect();
        let xs: Vec<f64> = rows.iter().map(|t| t.n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|t| t.median_us).collect();
        fits.push(linear_fit(path, &xs, &ys));
        timings.extend(rows);
    }
    let hash = format!("sizes={sizes:?},repetitions={repetitions}");
    BenchReport { provenance: Provenance::new(seed, hash.replace(' ', "")), repetitions, timings, fits }
}

impl BenchReport {
    pub fn fit(&self, path: BenchPath) -> Option<&LinearFit> {
        self.fits.iter().find(|f| f.path == path)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "n", "median_us", "p95_us"]).expect("in-memory write");
        for t in &self.timings {
            w.write_record([
                t.path.as_str().to_string(),
                t.n.to_string(),
                format!("{:.3}", t.median_us),
                format!("{:.3}", t.p95_us),
            ])
            .expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        format!("{}\n{body}", self.provenance.comment("#"))
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<18}{:>8}{:>14}{:>14}\n", "path", "n", "median (µs)", "p95 (µs)");
        for t in &self.timings {
            out += &format!("{:<18}{:>8}{:>14.2}{:>14.2}\n", t.path.as_str(), t.n, t.median_us, t.p95_us);
        }
        out += &format!("\n{:<18}{:>16}{:>10}\n", "path", "slope (µs/N)", "R²");
        for f in &self.fits {
            out += &format!("{:<18}{:>16.5}{:>10.4}\n", f.path.as_str(), f.slope_us, f.r2);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dsavoid_core::modulate_analytic;

    #[test]
    fn baseline_equals_fast_for_one_sphere() {
        let config = AgentConfig::default();
        let o = [StarObstacle::circle(vec2(2.0, 0.5), 0.8)];
        let mut scratch = AnalyticScratch::default();
        for (x, v) in
            [(vec2(0.0, 0.0), vec2(1.0, 0.0)), (vec2(0.5, 1.8), vec2(0.3, -0.9)), (vec2(3.5, 0.0), vec2(-1.0, 0.2))]
        {
            for tail in [TailOptions::OFF, TailOptions::default()] {
                let a = baseline_modulate(&x, &v, &o, &config, tail, &mut scratch).unwrap();
                let b = modulate_analytic(&x, &v, &o, &config, tail).unwrap();
                assert!((a - b).norm() < 1e-9, "{a} {b}");
            }
        }
    }

    #[test]
    fn baseline_is_identity_without_obstacles() {
        let none: [StarObstacle; 0] = [];
        let v = vec2(0.4, -2.0);
        let mut scratch = AnalyticScratch::default();
        assert_eq!(
            baseline_modulate(&Vec2::zeros(), &v, &none, &AgentConfig::default(), TailOptions::OFF, &mut scratch)
                .unwrap(),
            v
        );
    }

    #[test]
    fn linear_fit_of_exact_line() {
        let f = linear_fit(BenchPath::Sampled, &[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]);
        assert!((f.slope_us - 2.0).abs() < 1e-12 && (f.intercept_us - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_report_has_every_path() {
        let r = run_benchmarks(&[10, 20], 3, 1);
        assert_eq!(r.timings.len(), 6);
        assert!(BenchPath::ALL.iter().all(|p| r.fit(*p).is_some()));
        assert!(r.to_csv().starts_with("# dsavoid"));
        assert!(r.render().contains("baseline-analytic"));
    }
}
