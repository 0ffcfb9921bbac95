//! Reset Cliff sweeps: one exact imitation-gap row per (method, H, seed).

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demos::collect_demos;
use crate::instances::{reset_cliff, ResetCliffSpec};
use crate::mdp::policy_return;
use crate::solvers::{solve, Method, SolverConfig};

/// SplitMix64 finalizer; used to derive independent per-cell seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one sweep cell, mixing the base seed with each coordinate in turn.
pub fn cell_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct BenchRow {
    pub method: Method,
    pub H: usize,
    pub S: usize,
    pub A: usize,
    pub N: usize,
    pub seed: u64,
    pub gap: f64,
    pub converged: bool,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "method,H,S,A,N,seed,gap,converged,wall_time_ms";

impl BenchRow {
    pub fn csv_line(&self, timing: bool) -> String {
        let gap = match &self.error {
            Some(_) => "NaN".to_string(),
            None => self.gap.to_string(),
        };
        let wall = if timing { format!("{:.3}", self.wall_time_ms) } else { "0".to_string() };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method, self.H, self.S, self.A, self.N, self.seed, gap, self.converged, wall
        )
    }
}

#[derive(Clone, Debug)]
#[allow(non_snake_case)]
pub struct SweepSpec {
    pub S: usize,
    pub A: usize,
    pub N: usize,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    /// Per-method overrides applied on top of `solver`.
    pub overrides: BTreeMap<Method, SolverConfig>,
}

impl SweepSpec {
    pub fn config_for(&self, m: Method) -> &SolverConfig {
        self.overrides.get(&m).unwrap_or(&self.solver)
    }
}

/// Runs every cell; rows come back sorted by (method, H, seed) regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> crate::Result<Vec<BenchRow>> {
    for &h in &spec.horizons {
        ResetCliffSpec { S: spec.S, A: spec.A, H: h, N: spec.N }.validate()?;
    }
    let cells: Vec<(usize, u64)> =
        spec.horizons.iter().flat_map(|&h| spec.seeds.iter().map(move |&s| (h, s))).collect();
    let mut rows: Vec<BenchRow> = cells.par_iter().flat_map_iter(|&(h, seed)| run_cell(spec, h, seed)).collect();
    rows.sort_by_key(|r| (r.method, r.H, r.seed));
    Ok(rows)
}

fn run_cell(spec: &SweepSpec, h: usize, seed: u64) -> Vec<BenchRow> {
    let rc = ResetCliffSpec { S: spec.S, A: spec.A, H: h, N: spec.N };
    let (mdp, expert) = reset_cliff(&rc).expect("spec validated before the sweep");
    let expert_value = policy_return(&mdp, &expert);
    let demo_seed = cell_seed(seed, &[h as u64, spec.N as u64]);
    let demo = collect_demos(&mdp, &expert, spec.N.max(1), demo_seed);
    spec.methods
        .iter()
        .map(|&m| {
            let mut cfg = spec.config_for(m).clone();
            cfg.seed = cell_seed(demo_seed, &[m as u64]);
            let start = Instant::now();
            let outcome = demo
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|d| solve(m, &mdp, d, &cfg).map_err(|e| e.to_string()));
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            let (gap, converged, error) = match outcome {
                Ok(res) => (expert_value - policy_return(&mdp, &res.policy), res.converged, None),
                Err(e) => (f64::NAN, false, Some(e)),
            };
            BenchRow { method: m, H: h, S: spec.S, A: spec.A, N: spec.N, seed, gap, converged, wall_time_ms, error }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SummaryRow {
    pub method: Method,
    pub H: usize,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

/// Mean and standard error of the gap per (method, H), skipping failed rows.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, usize), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        groups.entry((r.method, r.H)).or_default().push(r.gap);
    }
    groups
        .into_iter()
        .map(|((method, h), xs)| {
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            SummaryRow { method, H: h, n, mean, se: (var / n as f64).sqrt() }
        })
        .collect()
}

pub fn rows_csv(rows: &[BenchRow], timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line(timing));
        out.push('\n');
    }
    out
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from("method,H,n,mean_gap,se_gap\n");
    for s in summary {
        out.push_str(&format!("{},{},{},{},{}\n", s.method, s.H, s.n, s.mean, s.se));
    }
    out
}

/// Runs `f` on a pool capped by `ILDM_THREADS` when set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match std::env::var("ILDM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .unwrap_or_else(|_| panic!("could not build a {n}-thread pool")),
        _ => f(),
    }
}
