//! Convergence comparison between sampled-only and disparate descriptions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::scenes::{table1_from_layout, table1_layout};
use crate::sim::{rollout, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub sampled: Outcome,
    pub disparate: Outcome,
    pub sampled_time: Option<f64>,
    pub disparate_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub seed: u64,
    pub runs: Vec<RunRecord>,
    pub sampled_ratio: f64,
    pub disparate_ratio: f64,
    /// Mean time to converge over the runs where both variants converged.
    pub sampled_mean_time: Option<f64>,
    pub disparate_mean_time: Option<f64>,
    pub jointly_converged: usize,
}

/// Seed of run `i` derived from the experiment seed.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(run as u64)
}

pub fn convergence_experiment(n_runs: usize, seed: u64) -> ConvergenceTable {
    let runs: Vec<RunRecord> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let run_seed = run_seed(seed, run);
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
            let (start, goal, ellipses) = table1_layout(&mut rng);
            let mut sampled = table1_from_layout(start, goal, &ellipses, false);
            let mut disparate = table1_from_layout(start, goal, &ellipses, true);
            sampled.seed = run_seed;
            disparate.seed = run_seed;
            let a = rollout(&sampled);
            let b = rollout(&disparate);
            RunRecord {
                run,
                seed: run_seed,
                sampled: a.outcome,
                disparate: b.outcome,
                sampled_time: a.time_to_converge,
                disparate_time: b.time_to_converge,
            }
        })
        .collect();
    summarize(seed, runs)
}

pub fn summarize(seed: u64, runs: Vec<RunRecord>) -> ConvergenceTable {
    let n = runs.len();
    let ratio = |f: fn(&RunRecord) -> Outcome| {
        if n == 0 {
            0.0
        } else {
            runs.iter().filter(|r| f(r) == Outcome::Converged).count() as f64 / n as f64
        }
    };
    let sampled_ratio = ratio(|r| r.sampled);
    let disparate_ratio = ratio(|r| r.disparate);
    let joint: Vec<(f64, f64)> = runs.iter().filter_map(|r| Some((r.sampled_time?, r.disparate_time?))).collect();
    let mean =
        |f: fn(&(f64, f64)) -> f64| (!joint.is_empty()).then(|| joint.iter().map(f).sum::<f64>() / joint.len() as f64);
    ConvergenceTable {
        seed,
        sampled_mean_time: mean(|p| p.0),
        disparate_mean_time: mean(|p| p.1),
        jointly_converged: joint.len(),
        sampled_ratio,
        disparate_ratio,
        runs,
    }
}

impl ConvergenceTable {
    /// Human-readable two-column summary.
    pub fn render(&self) -> String {
        let time = |t: Option<f64>| t.map_or("-".to_string(), |t| format!("{t:.1} s"));
        format!(
            "runs: {} (seed {})\n{:<18}{:>12}{:>12}\n{:<18}{:>11.0}%{:>11.0}%\n{:<18}{:>12}{:>12}\njointly converged: {}\n",
            self.runs.len(),
            self.seed,
            "",
            "sampled",
            "disparate",
            "convergence ratio",
            100.0 * self.sampled_ratio,
            100.0 * self.disparate_ratio,
            "average time",
            time(self.sampled_mean_time),
            time(self.disparate_mean_time),
            self.jointly_converged,
        )
    }
}
