//! Constructed and randomized MDP instances, plus the transition-discrimination check.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::demos::DemoDataset;
use crate::error::{Error, Result};
use crate::mdp::{LayeredMdp, TabularPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ResetCliffSpec {
    pub S: usize,
    pub A: usize,
    pub H: usize,
    pub N: usize,
}

impl ResetCliffSpec {
    pub fn validate(&self) -> Result<()> {
        if self.S < 3 {
            return Err(Error::Spec(format!("S = {} but at least 3 states are needed", self.S)));
        }
        if self.A < 2 {
            return Err(Error::Spec(format!("A = {} but at least 2 actions are needed", self.A)));
        }
        if self.H == 0 {
            return Err(Error::Spec("H must be positive".into()));
        }
        if self.S - 2 > self.N + 1 {
            return Err(Error::Spec(format!("S - 2 = {} exceeds N + 1 = {}", self.S - 2, self.N + 1)));
        }
        Ok(())
    }

    /// Initial distribution; the bad state (last index) has zero mass.
    pub fn initial(&self) -> Vec<f64> {
        let m = 1.0 / (self.N + 1) as f64;
        let mut rho = vec![m; self.S - 2];
        rho.push(1.0 - (self.S - 2) as f64 / (self.N + 1) as f64);
        rho.push(0.0);
        rho
    }

    /// Probability that a step's state is missing from all N demonstrations.
    pub fn epsilon(&self) -> f64 {
        self.initial().iter().map(|&p| p * (1.0 - p).powi(self.N as i32)).sum()
    }

    pub fn bad_state(&self) -> usize {
        self.S - 1
    }
}

/// Action taken by the expert at every state of generated instances.
pub const EXPERT_ACTION: usize = 0;

pub fn reset_cliff(spec: &ResetCliffSpec) -> Result<(LayeredMdp, TabularPolicy)> {
    spec.validate()?;
    let (s_n, a_n, h_n) = (spec.S, spec.A, spec.H);
    let bad = spec.bad_state();
    let rho = spec.initial();
    let mut to_bad = vec![0.0; s_n];
    to_bad[bad] = 1.0;

    let layer: Vec<Vec<Vec<f64>>> = (0..s_n)
        .map(|s| (0..a_n).map(|a| if s != bad && a == EXPERT_ACTION { rho.clone() } else { to_bad.clone() }).collect())
        .collect();
    let reward_layer: Vec<Vec<f64>> =
        (0..s_n).map(|s| (0..a_n).map(|a| if s != bad && a == EXPERT_ACTION { 1.0 } else { 0.0 }).collect()).collect();

    let mdp = LayeredMdp {
        horizon: h_n,
        layer_sizes: vec![s_n; h_n],
        num_actions: a_n,
        initial: rho,
        transitions: vec![layer; h_n - 1],
        reward: vec![reward_layer; h_n],
    };
    mdp.validate()?;
    let expert = TabularPolicy::deterministic(&mdp, &vec![vec![EXPERT_ACTION; s_n]; h_n]);
    Ok((mdp, expert))
}

/// The two-step worked example: `s1, s2` in the first layer, `s3, s4` in the second.
///
/// Action 0 leads to `s3` and action 1 to `s4` from either first-layer state.
/// The expert always takes action 0 and the demo is the single trajectory
/// `(s1, a1), (s3, a1)`, which leaves `s2` uncovered.
pub fn example_d5() -> (LayeredMdp, TabularPolicy, DemoDataset) {
    let mdp = LayeredMdp {
        horizon: 2,
        layer_sizes: vec![2, 2],
        num_actions: 2,
        initial: vec![0.5, 0.5],
        transitions: vec![vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]]],
        reward: vec![vec![vec![1.0, 0.0]; 2]; 2],
    };
    let expert = TabularPolicy::deterministic(&mdp, &[vec![0, 0], vec![0, 0]]);
    let demo = DemoDataset::new(&mdp, vec![vec![(0, 0), (0, 0)]], 0).expect("the worked example demo is well formed");
    (mdp, expert, demo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertKind {
    /// Action 0 everywhere.
    FirstAction,
    /// An independent uniformly drawn action per state.
    Random,
}

fn dirichlet_on<R: Rng + ?Sized>(len: usize, support: &[usize], rng: &mut R) -> Vec<f64> {
    let mut row = vec![0.0; len];
    let mut total = 0.0;
    for &i in support {
        let w: f64 = rng.sample(Exp1);
        row[i] = w;
        total += w;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
    fix_sum(&mut row);
    row
}

/// Folds rounding residue into the largest entry so the row sums to 1 within 1e-12.
fn fix_sum(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    let (i, _) =
        row.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    row[i] += 1.0 - s;
}

fn random_expert<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    num_actions: usize,
    kind: ExpertKind,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    layer_sizes
        .iter()
        .map(|&n| {
            (0..n)
                .map(|_| match kind {
                    ExpertKind::FirstAction => EXPERT_ACTION,
                    ExpertKind::Random => rng.random_range(0..num_actions),
                })
                .collect()
        })
        .collect()
}

fn random_rewards<R: Rng + ?Sized>(layer_sizes: &[usize], num_actions: usize, rng: &mut R) -> Vec<Vec<Vec<f64>>> {
    layer_sizes
        .iter()
        .map(|&n| (0..n).map(|_| (0..num_actions).map(|_| rng.random::<f64>()).collect()).collect())
        .collect()
}

/// Dense Dirichlet(1) transition rows and initial distribution, uniform random rewards.
pub fn random_layered_mdp<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    num_actions: usize,
    rng: &mut R,
    expert_kind: ExpertKind,
) -> Result<(LayeredMdp, TabularPolicy)> {
    if layer_sizes.is_empty() || layer_sizes.contains(&0) || num_actions == 0 {
        return Err(Error::Spec("layer sizes and action count must be positive".into()));
    }
    let h_n = layer_sizes.len();
    let all = |n: usize| (0..n).collect::<Vec<_>>();
    let initial = dirichlet_on(layer_sizes[0], &all(layer_sizes[0]), rng);
    let transitions = (0..h_n - 1)
        .map(|h| {
            (0..layer_sizes[h])
                .map(|_| {
                    (0..num_actions).map(|_| dirichlet_on(layer_sizes[h + 1], &all(layer_sizes[h + 1]), rng)).collect()
                })
                .collect()
        })
        .collect();
    let reward = random_rewards(layer_sizes, num_actions, rng);
    let mdp = LayeredMdp { horizon: h_n, layer_sizes: layer_sizes.to_vec(), num_actions, initial, transitions, reward };
    mdp.validate()?;
    let actions = random_expert(layer_sizes, num_actions, expert_kind, rng);
    let expert = TabularPolicy::deterministic(&mdp, &actions);
    Ok((mdp, expert))
}

/// One draw from a proposal biased towards transition-discriminative instances.
///
/// Each layer picks a random target set `T` for expert transitions. Expert rows
/// of expert-reachable states are supported exactly on `T`; their other rows
/// mix a random fraction of the expert row with mass off `T`. Rows of
/// unreachable states take on `T` at most the pointwise minimum over reachable
/// states, scaled down for non-expert actions. Some draws still fail the
/// strict conditions (for instance when a mixing fraction is 0), so callers
/// filter with [`is_td_mdp`]. The true reward is 1 on expert actions and 0 elsewhere.
pub fn random_sparse_candidate<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    num_actions: usize,
    rng: &mut R,
) -> Result<(LayeredMdp, TabularPolicy)> {
    if layer_sizes.is_empty() || layer_sizes.contains(&0) || num_actions < 2 {
        return Err(Error::Spec("need positive layer sizes and at least 2 actions".into()));
    }
    if layer_sizes[1..].contains(&1) {
        return Err(Error::Spec("layers after the first need at least 2 states".into()));
    }
    let h_n = layer_sizes.len();
    let actions = random_expert(layer_sizes, num_actions, ExpertKind::Random, rng);
    let k0 = rng.random_range(1..=layer_sizes[0]);
    let init_support = sample(rng, layer_sizes[0], k0).into_vec();
    let initial = dirichlet_on(layer_sizes[0], &init_support, rng);
    let mut reach: Vec<bool> = initial.iter().map(|&p| p > 0.0).collect();

    let mut transitions = Vec::with_capacity(h_n - 1);
    for h in 0..h_n - 1 {
        let next = layer_sizes[h + 1];
        let k = rng.random_range(1..=next.div_ceil(2));
        let target = sample(rng, next, k).into_vec();
        let off: Vec<usize> = (0..next).filter(|x| !target.contains(x)).collect();
        let mut layer = vec![vec![Vec::new(); num_actions]; layer_sizes[h]];

        for s in (0..layer_sizes[h]).filter(|&s| reach[s]) {
            let expert_row = dirichlet_on(next, &target, rng);
            for a in 0..num_actions {
                layer[s][a] = if a == actions[h][s] {
                    expert_row.clone()
                } else {
                    let lambda = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.9) };
                    mix_off_target(&expert_row, lambda, &off, rng)
                };
            }
        }
        let floor: Vec<Vec<f64>> = (0..num_actions)
            .map(|a| {
                (0..next)
                    .map(|x| {
                        (0..layer_sizes[h]).filter(|&s| reach[s]).map(|s| layer[s][a][x]).fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            })
            .collect();
        for s in (0..layer_sizes[h]).filter(|&s| !reach[s]) {
            let ae = actions[h][s];
            let c = rng.random_range(0.1..=1.0);
            let top: Vec<f64> = (0..next).map(|x| if target.contains(&x) { c * floor[ae][x] } else { 0.0 }).collect();
            for a in 0..num_actions {
                let on_target: Vec<f64> = if a == ae {
                    top.clone()
                } else {
                    let theta = rng.random_range(0.0..0.9);
                    (0..next).map(|x| theta * top[x].min(floor[a][x])).collect()
                };
                layer[s][a] = fill_off_target(on_target, &off, rng);
            }
        }
        transitions.push(layer);
        reach = (0..next).map(|x| target.contains(&x)).collect();
    }
    let reward = layer_sizes
        .iter()
        .enumerate()
        .map(|(h, &n)| {
            (0..n).map(|s| (0..num_actions).map(|a| if a == actions[h][s] { 1.0 } else { 0.0 }).collect()).collect()
        })
        .collect();
    let mdp = LayeredMdp { horizon: h_n, layer_sizes: layer_sizes.to_vec(), num_actions, initial, transitions, reward };
    mdp.validate()?;
    let expert = TabularPolicy::deterministic(&mdp, &actions);
    Ok((mdp, expert))
}

/// `lambda * row` plus `1 - lambda` spread over a random nonempty subset of `off`.
fn mix_off_target<R: Rng + ?Sized>(row: &[f64], lambda: f64, off: &[usize], rng: &mut R) -> Vec<f64> {
    fill_off_target(row.iter().map(|p| lambda * p).collect(), off, rng)
}

/// Tops `row` up to a distribution with Dirichlet mass on a random nonempty subset of `off`.
fn fill_off_target<R: Rng + ?Sized>(mut row: Vec<f64>, off: &[usize], rng: &mut R) -> Vec<f64> {
    let rest = 1.0 - row.iter().sum::<f64>();
    let k = rng.random_range(1..=off.len());
    let support: Vec<usize> = sample(rng, off.len(), k).into_iter().map(|i| off[i]).collect();
    let spread = dirichlet_on(row.len(), &support, rng);
    for (x, p) in row.iter_mut().zip(spread) {
        *x += rest * p;
    }
    row
}

/// Rejection-samples [`random_sparse_candidate`] until [`is_td_mdp`] accepts.
pub fn random_td_mdp<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    num_actions: usize,
    rng: &mut R,
    max_tries: usize,
) -> Result<(LayeredMdp, TabularPolicy)> {
    for _ in 0..max_tries {
        let (mdp, expert) = random_sparse_candidate(layer_sizes, num_actions, rng)?;
        if is_td_mdp(&mdp, &expert)?.is_td {
            return Ok((mdp, expert));
        }
    }
    Err(Error::Spec(format!("no TD instance found in {max_tries} draws")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdViolation {
    /// 1 for expert-action dominance, 2 for expert-state dominance.
    pub property: u8,
    pub h: usize,
    pub state: usize,
    /// Competing state (property 2) or action (property 1).
    pub other: usize,
    pub next_state: usize,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdMdpReport {
    pub is_td: bool,
    pub first_violation: Option<TdViolation>,
}

fn expert_actions(mdp: &LayeredMdp, expert: &TabularPolicy) -> Result<Vec<Vec<usize>>> {
    (0..mdp.horizon)
        .map(|h| {
            (0..mdp.layer_sizes[h])
                .map(|s| expert.deterministic_action(h, s).ok_or(Error::NonDeterministicExpert { h, s }))
                .collect()
        })
        .collect()
}

/// Expert-reachable states per layer; the first layer is the support of the initial distribution.
pub fn expert_reachable(mdp: &LayeredMdp, expert: &TabularPolicy) -> Result<Vec<Vec<bool>>> {
    let acts = expert_actions(mdp, expert)?;
    let mut sets = vec![mdp.initial.iter().map(|&p| p > 0.0).collect::<Vec<_>>()];
    for h in 0..mdp.horizon - 1 {
        let mut next = vec![false; mdp.layer_sizes[h + 1]];
        for s in (0..mdp.layer_sizes[h]).filter(|&s| sets[h][s]) {
            for (n, &p) in next.iter_mut().zip(&mdp.transitions[h][s][acts[h][s]]) {
                *n |= p > 0.0;
            }
        }
        sets.push(next);
    }
    Ok(sets)
}

pub fn is_td_mdp(mdp: &LayeredMdp, expert: &TabularPolicy) -> Result<TdMdpReport> {
    let acts = expert_actions(mdp, expert)?;
    let reach = expert_reachable(mdp, expert)?;
    let report = |v: TdViolation| Ok(TdMdpReport { is_td: false, first_violation: Some(v) });
    for h in 0..mdp.horizon - 1 {
        let p = &mdp.transitions[h];
        let targets: Vec<usize> = (0..mdp.layer_sizes[h + 1]).filter(|&x| reach[h + 1][x]).collect();
        for s in 0..mdp.layer_sizes[h] {
            let ae = acts[h][s];
            for a in (0..mdp.num_actions).filter(|&a| a != ae) {
                for &x in &targets {
                    if p[s][ae][x] <= p[s][a][x] {
                        return report(TdViolation { property: 1, h, state: s, other: a, next_state: x, action: ae });
                    }
                }
            }
        }
        for se in (0..mdp.layer_sizes[h]).filter(|&s| reach[h][s]) {
            for s in (0..mdp.layer_sizes[h]).filter(|&s| !reach[h][s]) {
                for a in 0..mdp.num_actions {
                    for &x in &targets {
                        if p[se][a][x] < p[s][a][x] {
                            return report(TdViolation {
                                property: 2,
                                h,
                                state: se,
                                other: s,
                                next_state: x,
                                action: a,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(TdMdpReport { is_td: true, first_violation: None })
}
