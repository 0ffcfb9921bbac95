//! The learners: each maps `(mdp, demo, config)` to a policy plus diagnostics.

mod batch;
pub mod bc;
pub mod dual;
pub mod iq;
pub mod penalty;
pub mod value_dice;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::mdp::{LayeredMdp, QTable, Table, TabularPolicy};

pub use batch::Batch;
pub use bc::bc_fit;
pub use dual::{ail_fit, dual_qdm_exact};
pub use iq::{iq_learn_fit, IqVariant};
pub use penalty::dual_qdm_penalty;
pub use value_dice::value_dice_fit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bc,
    IqTv,
    IqChi2,
    IqReg,
    ValueDice,
    DualQdmExact,
    DualQdmPenalty,
    Ail,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Bc,
        Method::IqTv,
        Method::IqChi2,
        Method::IqReg,
        Method::ValueDice,
        Method::DualQdmExact,
        Method::DualQdmPenalty,
        Method::Ail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bc => "bc",
            Method::IqTv => "iq_tv",
            Method::IqChi2 => "iq_chi2",
            Method::IqReg => "iq_reg",
            Method::ValueDice => "value_dice",
            Method::DualQdmExact => "dual_qdm_exact",
            Method::DualQdmPenalty => "dual_qdm_penalty",
            Method::Ail => "ail",
        }
    }

    /// Whether the method ascends in reward space rather than Q space.
    pub fn reward_space(self) -> bool {
        matches!(self, Method::DualQdmExact | Method::Ail)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// How the greedy ValueDICE policy resolves ties among maximizing actions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Spread probability evenly over all maximizers.
    #[default]
    Uniform,
    /// Put all mass on the lowest maximizing index.
    LowestIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    /// Step size; `None` picks 0.5 for reward-space and 0.1 for Q-space ascent.
    pub learning_rate: Option<f64>,
    pub max_iters: usize,
    /// Stopping threshold on the (projected) gradient infinity norm; `None`
    /// picks 1e-8, or 1e-5 for the penalty solver.
    pub grad_tol: Option<f64>,
    pub beta: f64,
    pub polyak_tau: f64,
    pub online_rollouts_per_iter: usize,
    pub seed: u64,
    pub q_init: f64,
    #[serde(rename = "q_box_C")]
    pub q_box_c: Option<f64>,
    pub tie_break: TieBreak,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 1.0,
            learning_rate: None,
            max_iters: 10_000,
            grad_tol: None,
            beta: 100.0,
            polyak_tau: 0.1,
            online_rollouts_per_iter: 1,
            seed: 0,
            q_init: 0.0,
            q_box_c: None,
            tie_break: TieBreak::Uniform,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("learning_rate must be positive, got {lr}"));
            }
        }
        if let Some(t) = self.grad_tol {
            if t.is_nan() || t < 0.0 {
                return bad(format!("grad_tol must be non-negative, got {t}"));
            }
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return bad(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(self.polyak_tau > 0.0 && self.polyak_tau <= 1.0) {
            return bad(format!("polyak_tau must lie in (0, 1], got {}", self.polyak_tau));
        }
        if !self.q_init.is_finite() {
            return bad("q_init must be finite".into());
        }
        if let Some(c) = self.q_box_c {
            if !(c >= 0.0 && c.is_finite()) {
                return bad(format!("q_box_C must be non-negative, got {c}"));
            }
        }
        Ok(())
    }

    pub fn lr_for(&self, method: Method) -> f64 {
        self.learning_rate.unwrap_or(if method.reward_space() { 0.5 } else { 0.1 })
    }

    pub fn tol_for(&self, method: Method) -> f64 {
        self.grad_tol.unwrap_or(if method == Method::DualQdmPenalty { 1e-5 } else { 1e-8 })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub method: Method,
    pub config: SolverConfig,
    pub converged: bool,
    pub iters: usize,
    pub final_objective: f64,
    pub policy: TabularPolicy,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reward: Option<Table>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<QTable>,
    #[serde(skip)]
    pub loss_trace: Vec<TracePoint>,
}

impl SolveResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solve result serialization is infallible")
    }

    /// Loss trace as CSV with header `iter,objective,grad_norm`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective,grad_norm\n");
        for t in &self.loss_trace {
            out.push_str(&format!("{},{},{}\n", t.iter, t.objective, t.grad_norm));
        }
        out
    }
}

/// Runs `method` with `cfg`.
pub fn solve(method: Method, mdp: &LayeredMdp, demo: &DemoDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    match method {
        Method::Bc => Ok(SolveResult {
            method,
            config: cfg.clone(),
            converged: true,
            iters: 0,
            final_objective: bc::log_likelihood(demo, &bc_fit(demo, mdp)),
            policy: bc_fit(demo, mdp),
            reward: None,
            q: None,
            loss_trace: Vec::new(),
        }),
        Method::IqTv => iq_learn_fit(mdp, demo, IqVariant::Tv, cfg),
        Method::IqChi2 => iq_learn_fit(mdp, demo, IqVariant::Chi2, cfg),
        Method::IqReg => iq_learn_fit(mdp, demo, IqVariant::Reg, cfg),
        Method::ValueDice => value_dice_fit(mdp, demo, cfg),
        Method::DualQdmExact => dual_qdm_exact(mdp, demo, cfg),
        Method::DualQdmPenalty => dual_qdm_penalty(mdp, demo, cfg),
        Method::Ail => ail_fit(mdp, demo, cfg),
    }
}

pub(crate) fn inf_norm(t: &Table) -> f64 {
    t.iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn axpy(y: &mut Table, a: f64, x: &Table) {
    for (yl, xl) in y.iter_mut().zip(x) {
        for (yr, xr) in yl.iter_mut().zip(xl) {
            for (yv, xv) in yr.iter_mut().zip(xr) {
                *yv += a * xv;
            }
        }
    }
}

pub(crate) fn clamp_table(t: &mut Table, lo: f64, hi: f64) {
    for v in t.iter_mut().flatten().flatten() {
        *v = v.clamp(lo, hi);
    }
}
