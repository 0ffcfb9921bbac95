//! Executable checks of the structural results, each returning a [`CheckReport`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{run_sweep, summarize, BenchRow, SummaryRow, SweepSpec};
use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::instances::{is_td_mdp, ResetCliffSpec};
use crate::mdp::{
    dual_eval, dual_objective, entropy_term, induced_reward, occupancy, soft_value_iteration, softmax_policy,
    table_inner, LayeredMdp, QTable, Table, TabularPolicy,
};
use crate::solvers::iq::iq_objective;
use crate::solvers::{bc_fit, dual_qdm_exact, iq_learn_fit, Batch, IqVariant, Method, SolveResult, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, f64>,
    pub details: Option<String>,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        CheckReport {
            name: name.to_string(),
            passed: true,
            metrics: BTreeMap::new(),
            tolerance: BTreeMap::new(),
            details: None,
        }
    }

    /// A report that failed before any metric could be measured.
    pub fn failed(name: &str, details: impl Into<String>) -> Self {
        let mut rep = CheckReport::new(name);
        rep.fail(details);
        rep
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    fn tol(&mut self, key: &str, value: f64) {
        self.tolerance.insert(key.to_string(), value);
    }

    /// Records a failure, keeping the first message.
    fn fail(&mut self, msg: impl Into<String>) {
        self.passed = false;
        if self.details.is_none() {
            self.details = Some(msg.into());
        }
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(msg());
        }
    }
}

/// Solver settings used by the IQ-Learn equivalence check.
pub fn thm1_config() -> SolverConfig {
    SolverConfig { alpha: 1.0, learning_rate: Some(1.0), max_iters: 20_000, ..SolverConfig::default() }
}

/// IQ-Learn (TV) against closed-form BC: per-state TV on layers after the
/// first, and deviation from uniform at uncovered first-layer states.
pub fn check_thm1(
    mdp: &LayeredMdp,
    demo: &DemoDataset,
    cfg: &SolverConfig,
    tol_tv: f64,
    tol_uniform: f64,
) -> Result<CheckReport> {
    let mut rep = CheckReport::new("thm1");
    rep.tol("tv_after_first_layer", tol_tv);
    rep.tol("uniform_deviation", tol_uniform);
    let iq = iq_learn_fit(mdp, demo, IqVariant::Tv, cfg)?;
    let bc = bc_fit(demo, mdp);

    let mut worst = (0.0, 0, 0);
    for h in 1..mdp.horizon {
        for s in 0..mdp.layer_sizes[h] {
            let tv = crate::mdp::tv_distance(&iq.policy.probs[h][s], &bc.probs[h][s])?;
            if tv > worst.0 {
                worst = (tv, h, s);
            }
        }
    }
    let uniform = 1.0 / mdp.num_actions as f64;
    let mut dev: f64 = 0.0;
    for s in 0..mdp.layer_sizes[0] {
        if !demo.visited(0, s)? {
            for &p in &iq.policy.probs[0][s] {
                dev = dev.max((p - uniform).abs());
            }
        }
    }
    rep.metric("max_tv_after_first_layer", worst.0);
    rep.metric("max_uniform_deviation", dev);
    rep.metric("iters", iq.iters as f64);
    rep.require(worst.0 <= tol_tv, || format!("TV {} at h={}, s={}", worst.0, worst.1, worst.2));
    rep.require(dev <= tol_uniform, || format!("uniform deviation {dev} at an uncovered initial state"));
    Ok(rep)
}

/// Lower-bound formula for the expected BC gap on Reset Cliff:
/// `(1 - 1/A) * sum_{h=1}^{H} (1 - eps)^{h-1} (H - h + 1) eps`.
pub fn bc_gap_closed_form(spec: &ResetCliffSpec) -> f64 {
    let eps = spec.epsilon();
    let c = 1.0 - 1.0 / spec.A as f64;
    let h_n = spec.H;
    c * (1..=h_n).map(|h| (1.0 - eps).powi(h as i32 - 1) * (h_n - h + 1) as f64 * eps).sum::<f64>()
}

/// Exact expected BC gap on Reset Cliff: `H - sum_{h=1}^{H} (1 - (1 - 1/A) eps)^h`.
///
/// Each step's state is an independent draw from the initial distribution, so
/// survival factors across steps are independent with mean `1 - (1 - 1/A) eps`.
pub fn bc_gap_expected(spec: &ResetCliffSpec) -> f64 {
    let keep = 1.0 - (1.0 - 1.0 / spec.A as f64) * spec.epsilon();
    spec.H as f64 - (1..=spec.H).map(|h| keep.powi(h as i32)).sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct Cor1Options {
    /// Refuse ladders that leave the quadratic regime (`eps * H / 2 > 1`).
    pub enforce_regime: bool,
    /// Standard errors allowed between the measured mean and the formula.
    pub se_mult: f64,
    pub ratio_range: (f64, f64),
    pub overlap_rel: f64,
    pub online_ratio: f64,
}

impl Default for Cor1Options {
    fn default() -> Self {
        Cor1Options {
            enforce_regime: true,
            se_mult: 3.0,
            ratio_range: (3.0, 5.0),
            overlap_rel: 0.10,
            online_ratio: 0.1,
        }
    }
}

/// Outcome of the horizon sweep with each sub-claim evaluated separately.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cor1Outcome {
    pub report: CheckReport,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<SummaryRow>,
    pub closed_form_ok: bool,
    pub ratio_ok: bool,
    pub overlap_ok: bool,
    pub online_ok: bool,
}

/// Horizon sweep on Reset Cliff comparing measured gaps with the closed form,
/// the doubling ratio, offline-method overlap, and online-method gaps.
pub fn check_cor1(sweep: &SweepSpec, opts: &Cor1Options) -> Result<Cor1Outcome> {
    let mut horizons = sweep.horizons.clone();
    horizons.sort_unstable();
    if opts.enforce_regime {
        for &h in &horizons {
            let eps = ResetCliffSpec { S: sweep.S, A: sweep.A, H: h, N: sweep.N }.epsilon();
            if eps * h as f64 / 2.0 > 1.0 {
                return Err(Error::Regime(format!("eps * H / 2 = {} > 1 at H = {h}", eps * h as f64 / 2.0)));
            }
        }
    }
    let rows = run_sweep(sweep)?;
    let summary = summarize(&rows);
    let mean = |m: Method, h: usize| summary.iter().find(|r| r.method == m && r.H == h).cloned();

    let mut rep = CheckReport::new("cor1");
    rep.tol("se_mult", opts.se_mult);
    rep.tol("ratio_lo", opts.ratio_range.0);
    rep.tol("ratio_hi", opts.ratio_range.1);
    rep.tol("overlap_rel", opts.overlap_rel);
    rep.tol("online_ratio", opts.online_ratio);
    let failed_rows = rows.iter().filter(|r| r.error.is_some()).count();
    rep.metric("failed_rows", failed_rows as f64);
    rep.require(failed_rows == 0, || format!("{failed_rows} sweep cells failed"));

    let has = |m: Method| sweep.methods.contains(&m);
    let (mut closed_form_ok, mut ratio_ok, mut overlap_ok, mut online_ok) = (true, true, true, true);

    for &h in &horizons {
        let spec = ResetCliffSpec { S: sweep.S, A: sweep.A, H: h, N: sweep.N };
        let formula = bc_gap_closed_form(&spec);
        rep.metric(&format!("closed_form_H{h}"), formula);
        rep.metric(&format!("expected_H{h}"), bc_gap_expected(&spec));
        for m in [Method::Bc, Method::IqTv] {
            if let (true, Some(s)) = (has(m), mean(m, h)) {
                let z = (s.mean - formula).abs() / s.se.max(f64::MIN_POSITIVE);
                rep.metric(&format!("{m}_mean_H{h}"), s.mean);
                rep.metric(&format!("{m}_se_H{h}"), s.se);
                rep.metric(&format!("{m}_z_H{h}"), z);
                if z > opts.se_mult {
                    closed_form_ok = false;
                    rep.fail(format!("{m} mean gap {} at H={h} is {z:.1} SE from the closed form {formula}", s.mean));
                }
            }
        }
    }

    for pair in horizons.windows(2) {
        let (h1, h2) = (pair[0], pair[1]);
        if h2 != 2 * h1 {
            continue;
        }
        if let (Some(a), Some(b)) = (mean(Method::Bc, h1), mean(Method::Bc, h2)) {
            let ratio = b.mean / a.mean;
            rep.metric(&format!("bc_ratio_H{h2}_over_H{h1}"), ratio);
            if !(opts.ratio_range.0..=opts.ratio_range.1).contains(&ratio) {
                ratio_ok = false;
                rep.fail(format!("BC gap ratio {ratio} for H={h2} over H={h1}"));
            }
        }
    }

    for &h in &horizons {
        let Some(bc) = mean(Method::Bc, h) else { continue };
        for m in [Method::IqTv, Method::ValueDice] {
            if let Some(s) = mean(m, h) {
                let rel = (s.mean - bc.mean).abs() / bc.mean.abs().max(f64::MIN_POSITIVE);
                rep.metric(&format!("{m}_rel_to_bc_H{h}"), rel);
                if rel > opts.overlap_rel {
                    overlap_ok = false;
                    rep.fail(format!("{m} gap {} differs from BC {} by {rel:.3} at H={h}", s.mean, bc.mean));
                }
            }
        }
    }

    if let Some(&h_max) = horizons.last() {
        if let Some(bc) = mean(Method::Bc, h_max) {
            for m in [Method::DualQdmExact, Method::Ail] {
                if let Some(s) = mean(m, h_max) {
                    let ratio = s.mean / bc.mean;
                    rep.metric(&format!("{m}_over_bc_H{h_max}"), ratio);
                    if ratio > opts.online_ratio {
                        online_ok = false;
                        rep.fail(format!("{m} gap {} is {ratio:.3} of BC at H={h_max}", s.mean));
                    }
                }
            }
        }
    }

    Ok(Cor1Outcome { report: rep, rows, summary, closed_form_ok, ratio_ok, overlap_ok, online_ok })
}

/// Saddle-point certificate for a converged reward-space solution.
pub fn check_thm2_saddle(
    mdp: &LayeredMdp,
    demo: &DemoDataset,
    result: &SolveResult,
    alpha: f64,
    tol_argmax: f64,
) -> Result<CheckReport> {
    if !result.converged {
        return Err(Error::Precondition(format!("{} did not converge", result.method)));
    }
    let r = result.reward.as_ref().ok_or_else(|| Error::Precondition("result carries no reward table".into()))?;
    let mut rep = CheckReport::new("thm2");
    rep.tol("best_response_tv", 1e-9);
    rep.tol("box_argmax", tol_argmax);
    rep.tol("primal_dual", 1e-6);

    let (q, _) = soft_value_iteration(mdp, r, alpha);
    let br = softmax_policy(&q);
    let tv = br.max_tv(&result.policy);
    rep.metric("best_response_tv", tv);
    rep.require(tv <= 1e-9, || format!("policy is {tv} TV from the soft best response"));

    let d_hat = demo.occupancy();
    let occ = occupancy(mdp, &result.policy);
    let mut worst: f64 = 0.0;
    for h in 0..mdp.horizon {
        for s in 0..mdp.layer_sizes[h] {
            for a in 0..mdp.num_actions {
                let g = d_hat.d[h][s][a] - occ.d[h][s][a];
                let x = r[h][s][a];
                let viol = if g > tol_argmax {
                    (1.0 - x).abs()
                } else if g < -tol_argmax {
                    x.abs()
                } else {
                    0.0
                };
                if viol > tol_argmax {
                    rep.fail(format!("r[{h}][{s}][{a}] = {x} with gradient {g}"));
                }
                worst = worst.max(viol);
            }
        }
    }
    rep.metric("box_argmax_violation", worst);

    let dual = dual_objective(mdp, r, d_hat, alpha)?;
    let primal = table_inner(&d_hat.d, r) - (table_inner(&occ.d, r) + entropy_term(&occ, alpha));
    let gap = (dual - primal).abs();
    rep.metric("dual_objective", dual);
    rep.metric("primal_dual_gap", gap);
    rep.require(gap <= 1e-6, || format!("dual {dual} vs payoff {primal}"));
    Ok(rep)
}

/// Reward saturation per layer: some demo pair at 1, every other pair at 0.
pub fn check_lemma1(mdp: &LayeredMdp, demo: &DemoDataset, q: &QTable, tol: f64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("lemma1");
    rep.tol("saturation", tol);
    let r = induced_reward(mdp, q);
    let mut min_visited_max = f64::INFINITY;
    let mut max_unvisited = f64::NEG_INFINITY;
    for h in 0..mdp.horizon {
        let mut vis = f64::NEG_INFINITY;
        let mut unvis = f64::NEG_INFINITY;
        for s in 0..mdp.layer_sizes[h] {
            for a in 0..mdp.num_actions {
                if demo.visited_pair(h, s, a)? {
                    vis = vis.max(r[h][s][a]);
                } else {
                    unvis = unvis.max(r[h][s][a]);
                }
            }
        }
        rep.require(vis >= 1.0 - tol, || format!("layer {h}: largest demo-pair reward {vis}"));
        rep.require(unvis <= tol, || format!("layer {h}: an uncovered pair has reward {unvis}"));
        min_visited_max = min_visited_max.min(vis);
        max_unvisited = max_unvisited.max(unvis);
    }
    rep.metric("min_layer_max_visited_reward", min_visited_max);
    rep.metric("max_unvisited_reward", max_unvisited);
    Ok(rep)
}

/// Q-value contrast at uncovered states on TD MDPs: strict expert preference
/// for the dual solution, flat rows for IQ-Learn (TV).
pub fn check_prop1(
    mdp: &LayeredMdp,
    expert: &TabularPolicy,
    demo: &DemoDataset,
    cfg: &SolverConfig,
    margin_tol: f64,
    spread_tol: f64,
) -> Result<(CheckReport, Option<SolveResult>)> {
    let mut rep = CheckReport::new("prop1");
    rep.tol("margin", margin_tol);
    rep.tol("spread", spread_tol);
    let td = is_td_mdp(mdp, expert)?;
    rep.metric("is_td", if td.is_td { 1.0 } else { 0.0 });
    if !td.is_td {
        rep.fail(format!("precondition failed: not a TD MDP ({:?})", td.first_violation));
        return Ok((rep, None));
    }
    let dual = dual_qdm_exact(mdp, demo, cfg)?;
    let iq = iq_learn_fit(mdp, demo, IqVariant::Tv, cfg)?;
    let qd = &dual.q.as_ref().expect("dual result carries Q").q;
    let qi = &iq.q.as_ref().expect("iq result carries Q").q;

    let mut min_gap = f64::INFINITY;
    let mut max_spread: f64 = 0.0;
    let mut uncovered = 0usize;
    for h in 0..mdp.horizon.saturating_sub(1) {
        for s in 0..mdp.layer_sizes[h] {
            if demo.visited(h, s)? {
                continue;
            }
            uncovered += 1;
            let ae = expert.deterministic_action(h, s).ok_or(Error::NonDeterministicExpert { h, s })?;
            let best_other =
                (0..mdp.num_actions).filter(|&a| a != ae).map(|a| qd[h][s][a]).fold(f64::NEG_INFINITY, f64::max);
            let gap = qd[h][s][ae] - best_other;
            let row = &qi[h][s];
            let spread = row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - row.iter().copied().fold(f64::INFINITY, f64::min);
            rep.require(gap > margin_tol, || format!("dual gap {gap} at h={h}, s={s}"));
            rep.require(spread <= spread_tol, || format!("IQ spread {spread} at h={h}, s={s}"));
            min_gap = min_gap.min(gap);
            max_spread = max_spread.max(spread);
        }
    }
    rep.metric("uncovered_states", uncovered as f64);
    rep.metric("min_dual_gap", min_gap);
    rep.metric("max_iq_spread", max_spread);
    rep.metric("dual_converged", if dual.converged { 1.0 } else { 0.0 });
    Ok((rep, Some(dual)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradObjective {
    Dual,
    IqTv,
    IqChi2,
}

impl GradObjective {
    pub fn name(self) -> &'static str {
        match self {
            GradObjective::Dual => "dual",
            GradObjective::IqTv => "iq_tv",
            GradObjective::IqChi2 => "iq_chi2",
        }
    }
}

/// Value and analytic gradient of `objective` at `x`.
pub fn objective_and_grad(
    objective: GradObjective,
    mdp: &LayeredMdp,
    demo: &DemoDataset,
    alpha: f64,
    x: &Table,
) -> (f64, Table) {
    let d_hat = demo.occupancy();
    match objective {
        GradObjective::Dual => {
            let e = dual_eval(mdp, x, d_hat, alpha);
            (e.value, e.grad)
        }
        GradObjective::IqTv => iq_objective(mdp, d_hat, None, &QTable { q: x.clone(), alpha }),
        GradObjective::IqChi2 => {
            let batch = Batch::from_trajectories(&demo.trajectories);
            iq_objective(mdp, d_hat, Some(&batch), &QTable { q: x.clone(), alpha })
        }
    }
}

/// Central finite differences against the analytic gradient at `x`.
pub fn grad_check(
    objective: GradObjective,
    mdp: &LayeredMdp,
    demo: &DemoDataset,
    alpha: f64,
    x: &Table,
    tol: f64,
) -> CheckReport {
    const STEP: f64 = 1e-6;
    const FLOOR: f64 = 1e-8;
    let mut rep = CheckReport::new("gradcheck");
    rep.tol("relative_error", tol);
    let (_, grad) = objective_and_grad(objective, mdp, demo, alpha, x);
    let f = |p: &Table| objective_and_grad(objective, mdp, demo, alpha, p).0;
    let mut worst: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut probe = x.clone();
    for h in 0..x.len() {
        for s in 0..x[h].len() {
            for a in 0..x[h][s].len() {
                let x0 = probe[h][s][a];
                probe[h][s][a] = x0 + STEP;
                let up = f(&probe);
                probe[h][s][a] = x0 - STEP;
                let down = f(&probe);
                probe[h][s][a] = x0;
                let fd = (up - down) / (2.0 * STEP);
                let an = grad[h][s][a];
                let abs = (fd - an).abs();
                let rel = abs / an.abs().max(fd.abs()).max(FLOOR);
                if rel > worst {
                    worst = rel;
                    if rel > tol {
                        rep.fail(format!("({h},{s},{a}): analytic {an}, finite difference {fd}"));
                    }
                }
                worst_abs = worst_abs.max(abs);
            }
        }
    }
    rep.metric("max_relative_error", worst);
    rep.metric("max_absolute_error", worst_abs);
    rep.passed = worst <= tol;
    rep
}

/// A random evaluation point: interior rewards for the dual, Q entries in `[-1, 1]` otherwise.
pub fn random_point<R: Rng + ?Sized>(objective: GradObjective, mdp: &LayeredMdp, rng: &mut R) -> Table {
    let mut t = mdp.zeros();
    for v in t.iter_mut().flatten().flatten() {
        *v = match objective {
            GradObjective::Dual => rng.random_range(0.05..0.95),
            _ => rng.random_range(-1.0..1.0),
        };
    }
    t
}

/// Largest entry of `|induced_reward(Q^{soft, r}) - r|`.
pub fn round_trip_error(mdp: &LayeredMdp, r: &Table, alpha: f64) -> f64 {
    let (q, _) = soft_value_iteration(mdp, r, alpha);
    let back = induced_reward(mdp, &q);
    back.iter().flatten().flatten().zip(r.iter().flatten().flatten()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

pub fn check_round_trip(mdp: &LayeredMdp, r: &Table, alpha: f64, tol: f64) -> CheckReport {
    let mut rep = CheckReport::new("roundtrip");
    rep.tol("max_abs_error", tol);
    let err = round_trip_error(mdp, r, alpha);
    rep.metric("max_abs_error", err);
    rep.require(err <= tol, || format!("round-trip error {err}"));
    rep
}

/// Seeded generator shared by the verification suites.
pub fn suite_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
