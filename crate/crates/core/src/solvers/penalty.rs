//! Dual Q-DM with Bellman constraints enforced by a quadratic penalty on replayed transitions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::iq::{grow_buffer, iq_tv_objective};
use super::{axpy, inf_norm, Batch, Method, SolveResult, SolverConfig, TracePoint};
use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::mdp::{softmax_policy, state_lse, LayeredMdp, QTable, Table};

/// `sum_i w_i [ReLU(-y_i)^2 + ReLU(y_i - 1)^2]` with `y = Q(h,s,a) - LSE(Q_target)(s')`,
/// and its gradient in `q` (the target is held fixed).
pub fn bellman_penalty(mdp: &LayeredMdp, buffer: &Batch, q: &QTable, target: &QTable) -> (f64, Table) {
    let v = state_lse(target);
    let mut grad = mdp.zeros();
    let mut value = 0.0;
    for it in &buffer.items {
        let y = q.q[it.h][it.s][it.a] - it.next.map_or(0.0, |n| v[it.h + 1][n]);
        let lo = (-y).max(0.0);
        let hi = (y - 1.0).max(0.0);
        value += it.weight * (lo * lo + hi * hi);
        grad[it.h][it.s][it.a] += it.weight * 2.0 * (hi - lo);
    }
    (value, grad)
}

/// Total buffer weight on each `(h, s, a)`.
fn buffer_weights(mdp: &LayeredMdp, buffer: &Batch) -> Table {
    let mut w = mdp.zeros();
    for it in &buffer.items {
        w[it.h][it.s][it.a] += it.weight;
    }
    w
}

pub fn dual_qdm_penalty(mdp: &LayeredMdp, demo: &DemoDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let method = Method::DualQdmPenalty;
    let lr = cfg.lr_for(method);
    let tol = cfg.tol_for(method);
    let tau = cfg.polyak_tau;
    let d_hat = demo.occupancy();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut buffer = Batch::default();
    let mut q = QTable { q: mdp.filled(cfg.q_init), alpha: cfg.alpha };
    let mut target = q.clone();

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    let mut final_objective;
    loop {
        grow_buffer(mdp, &softmax_policy(&q), &mut buffer, cfg.online_rollouts_per_iter, &mut rng);
        let (tv, mut grad) = iq_tv_objective(mdp, d_hat, &q);
        let (pen, pen_grad) = bellman_penalty(mdp, &buffer, &q, &target);
        let value = tv - cfg.beta * pen;
        if !value.is_finite() {
            return Err(Error::Divergence { method: method.name().into(), iter: iters });
        }
        axpy(&mut grad, -cfg.beta, &pen_grad);
        let grad_norm = inf_norm(&grad);
        trace.push(TracePoint { iter: iters, objective: value, grad_norm });
        final_objective = value;
        if grad_norm <= tol {
            converged = true;
            break;
        }
        if iters == cfg.max_iters {
            break;
        }
        // The penalty has curvature 2 beta W per entry, W being the entry's
        // buffer weight; scaling the step by it keeps large beta stable.
        let curv = buffer_weights(mdp, &buffer);
        for ((x, g), w) in
            q.q.iter_mut().flatten().flatten().zip(grad.iter().flatten().flatten()).zip(curv.iter().flatten().flatten())
        {
            *x += lr * g / (1.0 + 2.0 * cfg.beta * lr * w);
        }
        for (t, x) in target.q.iter_mut().flatten().flatten().zip(q.q.iter().flatten().flatten()) {
            *t = tau * x + (1.0 - tau) * *t;
        }
        iters += 1;
    }

    Ok(SolveResult {
        method,
        config: cfg.clone(),
        converged,
        iters,
        final_objective,
        policy: softmax_policy(&q),
        reward: None,
        q: Some(q),
        loss_trace: trace,
    })
}
