//! IQ-Learn over a dense Q table: TV, chi-squared, and replay-regularized variants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, clamp_table, inf_norm, Batch, Method, SolveResult, SolverConfig, TracePoint};
use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::mdp::{rollout, softmax_policy, state_lse, LayeredMdp, OccupancyMeasure, QTable, Table, TabularPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IqVariant {
    Tv,
    Chi2,
    Reg,
}

impl IqVariant {
    fn method(self) -> Method {
        match self {
            IqVariant::Tv => Method::IqTv,
            IqVariant::Chi2 => Method::IqChi2,
            IqVariant::Reg => Method::IqReg,
        }
    }
}

/// Weight on `LSE(Q)(s)` in the TV objective: the initial distribution on the
/// first layer, the empirical state marginal after it.
fn lse_weights(mdp: &LayeredMdp, d_hat: &OccupancyMeasure) -> Vec<Vec<f64>> {
    d_hat
        .d
        .iter()
        .enumerate()
        .map(|(h, layer)| if h == 0 { mdp.initial.clone() } else { layer.iter().map(|row| row.iter().sum()).collect() })
        .collect()
}

/// Per-layer contributions `d_hat_h . Q_h - w_h . LSE(Q_h)` of the TV objective.
pub fn iq_tv_layer_values(mdp: &LayeredMdp, d_hat: &OccupancyMeasure, q: &QTable) -> Vec<f64> {
    let v = state_lse(q);
    let w = lse_weights(mdp, d_hat);
    (0..mdp.horizon)
        .map(|h| {
            let mut total = 0.0;
            for s in 0..mdp.layer_sizes[h] {
                for a in 0..mdp.num_actions {
                    total += d_hat.d[h][s][a] * q.q[h][s][a];
                }
                total -= w[h][s] * v[h][s];
            }
            total
        })
        .collect()
}

/// TV objective and its gradient.
pub fn iq_tv_objective(mdp: &LayeredMdp, d_hat: &OccupancyMeasure, q: &QTable) -> (f64, Table) {
    let pi = softmax_policy(q);
    let w = lse_weights(mdp, d_hat);
    let value = iq_tv_layer_values(mdp, d_hat, q).iter().sum();
    let mut grad = d_hat.d.clone();
    for h in 0..mdp.horizon {
        for s in 0..mdp.layer_sizes[h] {
            for a in 0..mdp.num_actions {
                grad[h][s][a] -= w[h][s] * pi.probs[h][s][a];
            }
        }
    }
    (value, grad)
}

/// `sum_i w_i (Q(h,s,a) - LSE(Q)(s'))^2` over a batch, and its gradient.
pub fn squared_bellman(mdp: &LayeredMdp, batch: &Batch, q: &QTable) -> (f64, Table) {
    let v = state_lse(q);
    let pi = softmax_policy(q);
    let mut grad = mdp.zeros();
    let mut value = 0.0;
    for it in &batch.items {
        let cont = it.next.map_or(0.0, |n| v[it.h + 1][n]);
        let delta = q.q[it.h][it.s][it.a] - cont;
        value += it.weight * delta * delta;
        let g = 2.0 * it.weight * delta;
        grad[it.h][it.s][it.a] += g;
        if let Some(n) = it.next {
            for (gr, p) in grad[it.h + 1][n].iter_mut().zip(&pi.probs[it.h + 1][n]) {
                *gr -= g * p;
            }
        }
    }
    (value, grad)
}

/// TV objective minus a quarter of the squared Bellman error on `batch` when given.
pub fn iq_objective(mdp: &LayeredMdp, d_hat: &OccupancyMeasure, batch: Option<&Batch>, q: &QTable) -> (f64, Table) {
    let (mut value, mut grad) = iq_tv_objective(mdp, d_hat, q);
    if let Some(b) = batch {
        let (sv, sg) = squared_bellman(mdp, b, q);
        value -= 0.25 * sv;
        axpy(&mut grad, -0.25, &sg);
    }
    (value, grad)
}

fn projected_step_norm(q: &Table, grad: &Table, lo: f64, hi: f64) -> f64 {
    q.iter()
        .flatten()
        .flatten()
        .zip(grad.iter().flatten().flatten())
        .fold(0.0, |m, (x, g)| m.max(((x + g).clamp(lo, hi) - x).abs()))
}

pub fn iq_learn_fit(
    mdp: &LayeredMdp,
    demo: &DemoDataset,
    variant: IqVariant,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    let method = variant.method();
    let lr = cfg.lr_for(method);
    let tol = cfg.tol_for(method);
    let d_hat = demo.occupancy();
    let demo_batch = Batch::from_trajectories(&demo.trajectories);
    let mut buffer = Batch::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q = QTable { q: mdp.filled(cfg.q_init), alpha: cfg.alpha };

    let eval = |q: &QTable, buffer: &Batch| match variant {
        IqVariant::Tv => iq_objective(mdp, d_hat, None, q),
        IqVariant::Chi2 => iq_objective(mdp, d_hat, Some(&demo_batch), q),
        IqVariant::Reg => iq_objective(mdp, d_hat, Some(buffer), q),
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    let mut final_objective;
    loop {
        if variant == IqVariant::Reg {
            grow_buffer(mdp, &softmax_policy(&q), &mut buffer, cfg.online_rollouts_per_iter, &mut rng);
        }
        let (value, grad) = eval(&q, &buffer);
        if !value.is_finite() {
            return Err(Error::Divergence { method: method.name().into(), iter: iters });
        }
        let grad_norm = match cfg.q_box_c {
            Some(c) => projected_step_norm(&q.q, &grad, 0.0, c),
            None => inf_norm(&grad),
        };
        trace.push(TracePoint { iter: iters, objective: value, grad_norm });
        final_objective = value;
        if grad_norm <= tol {
            converged = true;
            break;
        }
        if iters == cfg.max_iters {
            break;
        }
        axpy(&mut q.q, lr, &grad);
        if let Some(c) = cfg.q_box_c {
            clamp_table(&mut q.q, 0.0, c);
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

pub(crate) fn grow_buffer(mdp: &LayeredMdp, pi: &TabularPolicy, buffer: &mut Batch, n: usize, rng: &mut ChaCha8Rng) {
    let trajs: Vec<_> = (0..n).map(|_| rollout(mdp, pi, rng)).collect();
    buffer.extend(&trajs);
}
