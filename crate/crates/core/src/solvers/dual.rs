//! Reward-space projected gradient ascent on the dual, and AIL through the same loop.

use super::{clamp_table, Method, SolveResult, SolverConfig, TracePoint};
use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::mdp::{check_box, dual_eval, entropy_term, table_inner, DualEval, LayeredMdp, OccupancyMeasure, Table};

/// Smallest step tried before the line search gives up.
const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e12;
/// Sufficient-increase fraction of the line search.
const ARMIJO: f64 = 1e-4;

/// `<g, to - from>`.
fn directional(g: &Table, to: &Table, from: &Table) -> f64 {
    g.iter()
        .flatten()
        .flatten()
        .zip(to.iter().flatten().flatten().zip(from.iter().flatten().flatten()))
        .map(|(g, (a, b))| g * (a - b))
        .sum()
}

/// Infinity norm of `P(r + g) - r` with `P` the projection onto `[0, 1]`.
pub fn projected_gradient_norm(r: &Table, g: &Table) -> f64 {
    r.iter()
        .flatten()
        .flatten()
        .zip(g.iter().flatten().flatten())
        .fold(0.0, |m, (x, d)| m.max(((x + d).clamp(0.0, 1.0) - x).abs()))
}

/// `E_D[sum r] - (E_pi[sum r] + alpha * sum_h Hbar(d^pi_h))`.
pub fn ail_value(d_hat: &OccupancyMeasure, r: &Table, eval: &DualEval, alpha: f64) -> f64 {
    table_inner(&d_hat.d, r) - (table_inner(&eval.occupancy.d, r) + entropy_term(&eval.occupancy, alpha))
}

fn reward_ascent(method: Method, mdp: &LayeredMdp, demo: &DemoDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let mut lr = cfg.lr_for(method);
    let tol = cfg.tol_for(method);
    let alpha = cfg.alpha;
    let d_hat = demo.occupancy();

    let mut r = mdp.zeros();
    let mut eval = dual_eval(mdp, &r, d_hat, alpha);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    loop {
        if !eval.value.is_finite() {
            return Err(Error::Divergence { method: method.name().into(), iter: iters });
        }
        let grad_norm = projected_gradient_norm(&r, &eval.grad);
        let objective = match method {
            Method::Ail => ail_value(d_hat, &r, &eval, alpha),
            _ => eval.value,
        };
        trace.push(TracePoint { iter: iters, objective, grad_norm });
        if grad_norm <= tol {
            converged = true;
            break;
        }
        if iters == cfg.max_iters {
            break;
        }

        let mut step = lr;
        let accepted = loop {
            let mut cand = r.clone();
            super::axpy(&mut cand, step, &eval.grad);
            clamp_table(&mut cand, 0.0, 1.0);
            let next = dual_eval(mdp, &cand, d_hat, alpha);
            let rise = ARMIJO * directional(&eval.grad, &cand, &r);
            // By concavity a non-negative slope at the candidate also certifies
            // ascent, and stays informative once value differences drop below
            // rounding.
            if next.value >= eval.value + rise || (cand != r && directional(&next.grad, &cand, &r) >= 0.0) {
                break Some((cand, next));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((cand, next)) = accepted else { break };
        assert!(check_box(&cand).is_ok(), "projected iterate left the unit box");
        r = cand;
        eval = next;
        // Near a vertex of the box the objective flattens exponentially, so
        // the step may grow past its initial value while steps keep succeeding.
        lr = (2.0 * step).min(MAX_STEP);
        iters += 1;
    }

    let final_objective = trace.last().map_or(eval.value, |t| t.objective);
    Ok(SolveResult {
        method,
        config: cfg.clone(),
        converged,
        iters,
        final_objective,
        policy: eval.policy,
        reward: Some(r),
        q: Some(eval.q),
        loss_trace: trace,
    })
}

/// Projected gradient ascent on rewards in the unit box; the policy is the soft best response.
pub fn dual_qdm_exact(mdp: &LayeredMdp, demo: &DemoDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    reward_ascent(Method::DualQdmExact, mdp, demo, cfg)
}

/// AIL solved through its dual; the trace records the minimax payoff at each iterate.
pub fn ail_fit(mdp: &LayeredMdp, demo: &DemoDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    reward_ascent(Method::Ail, mdp, demo, cfg)
}
