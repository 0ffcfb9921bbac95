//! ValueDICE with a hard max in place of the log-partition function.

use super::{axpy, clamp_table, inf_norm, Batch, Method, SolveResult, SolverConfig, TieBreak, TracePoint};
use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::mdp::{LayeredMdp, QTable, Table, TabularPolicy};

/// Maximizers of a row, found by exact comparison.
fn argmax_set(row: &[f64]) -> (f64, Vec<usize>) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (m, row.iter().enumerate().filter(|(_, &x)| x == m).map(|(i, _)| i).collect())
}

/// Objective `-log(sum_i w_i exp(-Q_i + MAX Q(s'_i))) - E_rho MAX Q(s_1)` and a
/// subgradient that splits evenly over tied maximizers.
pub fn value_dice_objective(mdp: &LayeredMdp, batch: &Batch, q: &Table) -> (f64, Table) {
    let maxes: Vec<Vec<(f64, Vec<usize>)>> =
        q.iter().map(|layer| layer.iter().map(|row| argmax_set(row)).collect()).collect();
    let mut grad = mdp.zeros();

    let exps: Vec<f64> =
        batch.items.iter().map(|it| -q[it.h][it.s][it.a] + it.next.map_or(0.0, |n| maxes[it.h + 1][n].0)).collect();
    let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = batch.items.iter().zip(&exps).map(|(it, &x)| it.weight * (x - m).exp()).collect();
    let z: f64 = scaled.iter().sum();
    let log_z = m + z.ln();

    for (it, &c) in batch.items.iter().zip(&scaled) {
        let share = c / z;
        grad[it.h][it.s][it.a] += share;
        if let Some(n) = it.next {
            let ties = &maxes[it.h + 1][n].1;
            let split = share / ties.len() as f64;
            for &a in ties {
                grad[it.h + 1][n][a] -= split;
            }
        }
    }

    let mut init_term = 0.0;
    for (s, &p) in mdp.initial.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (mx, ties) = &maxes[0][s];
        init_term += p * mx;
        let split = p / ties.len() as f64;
        for &a in ties {
            grad[0][s][a] -= split;
        }
    }
    (-log_z - init_term, grad)
}

/// Greedy policy over `q`.
pub fn greedy_policy(q: &Table, tie_break: TieBreak) -> TabularPolicy {
    let probs = q
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|row| {
                    let (_, ties) = argmax_set(row);
                    let mut p = vec![0.0; row.len()];
                    match tie_break {
                        TieBreak::LowestIndex => p[ties[0]] = 1.0,
                        TieBreak::Uniform => {
                            for &a in &ties {
                                p[a] = 1.0 / ties.len() as f64;
                            }
                        }
                    }
                    p
                })
                .collect()
        })
        .collect();
    TabularPolicy { probs }
}

pub fn value_dice_fit(mdp: &LayeredMdp, demo: &DemoDataset, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let method = Method::ValueDice;
    let lr = cfg.lr_for(method);
    let tol = cfg.tol_for(method);
    let batch = Batch::from_trajectories(&demo.trajectories);
    let mut q = mdp.filled(cfg.q_init);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    let mut final_objective;
    loop {
        let (value, grad) = value_dice_objective(mdp, &batch, &q);
        if !value.is_finite() {
            return Err(Error::Divergence { method: method.name().into(), iter: iters });
        }
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
        axpy(&mut q, lr, &grad);
        if let Some(c) = cfg.q_box_c {
            clamp_table(&mut q, 0.0, c);
        }
        iters += 1;
    }

    Ok(SolveResult {
        method,
        config: cfg.clone(),
        converged,
        iters,
        final_objective,
        policy: greedy_policy(&q, cfg.tie_break),
        reward: None,
        q: Some(QTable { q, alpha: cfg.alpha }),
        loss_trace: trace,
    })
}
