//! Behavioral cloning in closed form.

use crate::demos::DemoDataset;
use crate::mdp::{LayeredMdp, TabularPolicy};

/// `pi(a|s) = n(s, a) / n(s)` on visited states, uniform elsewhere.
pub fn bc_fit(demo: &DemoDataset, mdp: &LayeredMdp) -> TabularPolicy {
    let uniform = 1.0 / mdp.num_actions as f64;
    let probs =
        demo.counts
            .iter()
            .zip(&demo.state_counts)
            .map(|(layer, totals)| {
                layer
                    .iter()
                    .zip(totals)
                    .map(|(row, &n)| {
                        if n == 0 {
                            vec![uniform; row.len()]
                        } else {
                            row.iter().map(|&c| c as f64 / n as f64).collect()
                        }
                    })
                    .collect()
            })
            .collect();
    TabularPolicy { probs }
}

/// Per-trajectory average log-likelihood of the demos, restricted to layers `from..`.
pub fn log_likelihood_from(demo: &DemoDataset, pi: &TabularPolicy, from: usize) -> f64 {
    let n = demo.len() as f64;
    let mut total = 0.0;
    for (h, layer) in demo.counts.iter().enumerate().skip(from) {
        for (s, row) in layer.iter().enumerate() {
            for (a, &c) in row.iter().enumerate() {
                if c > 0 {
                    total += c as f64 * pi.probs[h][s][a].ln();
                }
            }
        }
    }
    total / n
}

pub fn log_likelihood(demo: &DemoDataset, pi: &TabularPolicy) -> f64 {
    log_likelihood_from(demo, pi, 0)
}
