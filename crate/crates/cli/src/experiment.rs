//! Seeded comparison of the four arms on a built-in benchmark.

use std::fmt::Write as _;

use bomuse_core::engine::EvaluatedPoint;
use bomuse_core::{Mode, ObjectiveConfig, RegretTrace, Session, SessionConfig};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub benchmark: String,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    /// BO-Muse batches; every mode spends `2 * batches` evaluations.
    pub batches: usize,
    pub num_init: usize,
    /// Noise standard deviation in objective units.
    pub sigma: Option<f64>,
    pub zeta: Option<f64>,
    pub delta: Option<f64>,
}

impl Plan {
    pub fn new(benchmark: &str, modes: Vec<Mode>, seeds: Vec<u64>, batches: usize, num_init: usize) -> Self {
        Self { benchmark: benchmark.into(), modes, seeds, batches, num_init, sigma: None, zeta: None, delta: None }
    }

    pub fn config(&self, mode: Mode, seed: u64) -> bomuse_core::Result<SessionConfig> {
        let mut c = SessionConfig::for_benchmark(&self.benchmark, mode, self.num_init, self.batches, seed)?;
        if let Some(sigma) = self.sigma {
            let range = ObjectiveConfig::builtin(&self.benchmark).instantiate()?.range_estimate().unwrap_or(1.0);
            c = c.with_noise_std(sigma, range);
        }
        if let Some(z) = self.zeta {
            c.zeta = z;
        }
        if let Some(d) = self.delta {
            c.delta = d;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub mode: Mode,
    pub seed: u64,
    pub points: Vec<EvaluatedPoint>,
    pub regret: RegretTrace,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.regret.simple_regret.as_ref().and_then(|r| r.last().copied()).unwrap_or(f64::NAN)
    }
}

/// Runs every (mode, seed) pair in parallel; results come back in plan order.
pub fn run_plan(plan: &Plan) -> bomuse_core::Result<Vec<RunResult>> {
    let jobs: Vec<(Mode, u64)> = plan.modes.iter().flat_map(|&m| plan.seeds.iter().map(move |&s| (m, s))).collect();
    jobs.par_iter()
        .map(|&(mode, seed)| {
            let mut session = Session::new(plan.config(mode, seed)?)?;
            while !session.is_finished() {
                session.run_batch(None)?;
            }
            let regret = session.regret();
            Ok(RunResult { mode, seed, points: session.into_data().observations, regret })
        })
        .collect()
}

/// One row per evaluation: `mode,seed,s,t,source,y,f_true,best,simple_regret`.
pub fn tidy_csv(results: &[RunResult]) -> String {
    let mut out = String::from("mode,seed,s,t,source,y,f_true,best,simple_regret\n");
    for r in results {
        for (i, p) in r.points.iter().enumerate() {
            let regret = r.regret.simple_regret.as_ref().map(|v| v[i].to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.mode.as_str(),
                r.seed,
                p.s,
                p.t,
                p.source.as_str(),
                p.y,
                p.f_true,
                r.regret.best_value[i],
                regret
            );
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub mode: Mode,
    pub t: usize,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Mean ± standard error of simple regret per evaluation index and mode.
pub fn regret_curves(results: &[RunResult]) -> Vec<CurvePoint> {
    let mut modes: Vec<Mode> = Vec::new();
    for r in results {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    let mut out = Vec::new();
    for mode in modes {
        let runs: Vec<&Vec<f64>> =
            results.iter().filter(|r| r.mode == mode).filter_map(|r| r.regret.simple_regret.as_ref()).collect();
        let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
        for i in 0..len {
            let vals: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            };
            out.push(CurvePoint { mode, t: i + 1, n, mean, stderr });
        }
    }
    out
}

/// Wide layout: one row per evaluation index, a mean and a standard error
/// column per mode, modes in first-seen order.
pub fn curves_csv(curves: &[CurvePoint]) -> String {
    let mut modes: Vec<Mode> = Vec::new();
    for c in curves {
        if !modes.contains(&c.mode) {
            modes.push(c.mode);
        }
    }
    let mut out = String::from("t");
    for m in &modes {
        let _ = write!(out, ",{0}_mean,{0}_stderr", m.as_str());
    }
    out.push('\n');
    let len = modes.iter().map(|m| curves.iter().filter(|c| c.mode == *m).count()).min().unwrap_or(0);
    for t in 1..=len {
        out.push_str(&t.to_string());
        for m in &modes {
            let c = curves.iter().find(|c| c.mode == *m && c.t == t).expect("curve point");
            let _ = write!(out, ",{},{}", c.mean, c.stderr);
        }
        out.push('\n');
    }
    out
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn final_regrets(results: &[RunResult], mode: Mode) -> Vec<(u64, f64)> {
    results.iter().filter(|r| r.mode == mode).map(|r| (r.seed, r.final_regret())).collect()
}

/// Seeds where `a` ends with regret no larger than `b`, out of the seeds both ran.
pub fn paired_wins(results: &[RunResult], a: Mode, b: Mode) -> (usize, usize) {
    let rb = final_regrets(results, b);
    let mut wins = 0;
    let mut n = 0;
    for (seed, ra) in final_regrets(results, a) {
        if let Some(&(_, rb)) = rb.iter().find(|(s, _)| *s == seed) {
            n += 1;
            if ra <= rb {
                wins += 1;
            }
        }
    }
    (wins, n)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub runs: usize,
    pub median_final_regret: f64,
    pub mean_final_regret: f64,
}

pub fn summarize(results: &[RunResult], modes: &[Mode]) -> Vec<ModeSummary> {
    modes
        .iter()
        .map(|&mode| {
            let finals: Vec<f64> = final_regrets(results, mode).into_iter().map(|(_, r)| r).collect();
            let mean = finals.iter().sum::<f64>() / finals.len().max(1) as f64;
            ModeSummary { mode, runs: finals.len(), median_final_regret: median(&finals), mean_final_regret: mean }
        })
        .collect()
}
