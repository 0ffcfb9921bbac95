//! Layered finite-horizon MDPs and exact dynamic programming over them.
//!
//! States are addressed as `(h, index)` with `h` zero-based, so a table
//! indexed `[h][s][a]` covers every state-action pair exactly once. The
//! continuation value after the last layer is zero.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense `[h][s][a]` table.
pub type Table = Vec<Vec<Vec<f64>>>;

/// A trajectory as a length-H list of `(state, action)` pairs.
pub type Trajectory = Vec<(usize, usize)>;

const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredMdp {
    pub horizon: usize,
    pub layer_sizes: Vec<usize>,
    pub num_actions: usize,
    /// Initial distribution over the first layer.
    pub initial: Vec<f64>,
    /// `transitions[h][s][a][s']` for `h < horizon - 1`.
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    /// True reward `r*[h][s][a]` in `[0, 1]`.
    pub reward: Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub probs: Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub q: Table,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    pub d: Table,
}

impl LayeredMdp {
    pub fn num_states(&self, h: usize) -> usize {
        self.layer_sizes[h]
    }

    /// A zero table shaped like this MDP.
    pub fn zeros(&self) -> Table {
        self.filled(0.0)
    }

    pub fn filled(&self, value: f64) -> Table {
        self.layer_sizes.iter().map(|&n| vec![vec![value; self.num_actions]; n]).collect()
    }

    /// Checks every structural and stochastic invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        validate_mdp(self)
    }

    /// `E_{s'~P(.|s,a)}[next[s']]` for every `(s, a)` in layer `h`; zero at the last layer.
    pub fn expect_next(&self, h: usize, next: &[f64]) -> Vec<Vec<f64>> {
        if h + 1 >= self.horizon {
            return vec![vec![0.0; self.num_actions]; self.layer_sizes[h]];
        }
        self.transitions[h].iter().map(|row| row.iter().map(|p| dot(p, next)).collect()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mdp serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mdp: LayeredMdp = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mdp: LayeredMdp = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        mdp.validate().map_err(|e| Error::parse(path, e))?;
        Ok(mdp)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the canonical JSON encoding; ties demo files to their MDP.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn check_distribution(row: &[f64], what: impl Fn() -> String) -> Result<()> {
    for (i, &p) in row.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Validation(format!("{} has entry {} = {}", what(), i, p)));
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::Validation(format!("{} sums to {}", what(), sum)));
    }
    Ok(())
}

pub fn validate_mdp(mdp: &LayeredMdp) -> Result<()> {
    let h_len = mdp.horizon;
    if h_len == 0 {
        return Err(Error::Validation("horizon must be positive".into()));
    }
    if mdp.num_actions == 0 {
        return Err(Error::Validation("num_actions must be positive".into()));
    }
    if mdp.layer_sizes.len() != h_len {
        return Err(Error::Validation(format!(
            "layer_sizes has {} entries for horizon {}",
            mdp.layer_sizes.len(),
            h_len
        )));
    }
    if let Some(h) = mdp.layer_sizes.iter().position(|&n| n == 0) {
        return Err(Error::Validation(format!("layer {h} is empty")));
    }
    if mdp.initial.len() != mdp.layer_sizes[0] {
        return Err(Error::Validation(format!(
            "initial distribution has {} entries, layer 0 has {} states",
            mdp.initial.len(),
            mdp.layer_sizes[0]
        )));
    }
    check_distribution(&mdp.initial, || "initial distribution".into())?;

    if mdp.transitions.len() != h_len - 1 {
        return Err(Error::Validation(format!(
            "transitions has {} layers, expected {}",
            mdp.transitions.len(),
            h_len - 1
        )));
    }
    for (h, layer) in mdp.transitions.iter().enumerate() {
        if layer.len() != mdp.layer_sizes[h] {
            return Err(Error::Validation(format!(
                "transitions[{h}] has {} states, expected {}",
                layer.len(),
                mdp.layer_sizes[h]
            )));
        }
        for (s, rows) in layer.iter().enumerate() {
            if rows.len() != mdp.num_actions {
                return Err(Error::Validation(format!(
                    "transitions[{h}][{s}] has {} actions, expected {}",
                    rows.len(),
                    mdp.num_actions
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != mdp.layer_sizes[h + 1] {
                    return Err(Error::Validation(format!(
                        "transitions[{h}][{s}][{a}] has {} entries, layer {} has {} states",
                        row.len(),
                        h + 1,
                        mdp.layer_sizes[h + 1]
                    )));
                }
                check_distribution(row, || format!("transition row (h={h}, s={s}, a={a})"))?;
            }
        }
    }

    if mdp.reward.len() != h_len {
        return Err(Error::Validation(format!("reward has {} layers, expected {}", mdp.reward.len(), h_len)));
    }
    for (h, layer) in mdp.reward.iter().enumerate() {
        if layer.len() != mdp.layer_sizes[h] {
            return Err(Error::Validation(format!("reward[{h}] has {} states", layer.len())));
        }
        for (s, row) in layer.iter().enumerate() {
            if row.len() != mdp.num_actions {
                return Err(Error::Validation(format!("reward[{h}][{s}] has {} actions", row.len())));
            }
            for (a, &r) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::Validation(format!("reward (h={h}, s={s}, a={a}) = {r} outside [0, 1]")));
                }
            }
        }
    }
    Ok(())
}

/// `alpha * log(sum(exp(x / alpha)))`, evaluated with max-subtraction.
pub fn lse(values: &[f64], alpha: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|&x| ((x - m) / alpha).exp()).sum();
    m + alpha * s.ln()
}

/// `softmax(x / alpha)`.
pub fn softmax(values: &[f64], alpha: f64) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = values.iter().map(|&x| ((x - m) / alpha).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Per-state `LSE_alpha` of a Q table.
pub fn state_lse(q: &QTable) -> Vec<Vec<f64>> {
    q.q.iter().map(|layer| layer.iter().map(|row| lse(row, q.alpha)).collect()).collect()
}

/// Soft-optimal Q and V for reward `r` by backward recursion.
pub fn soft_value_iteration(mdp: &LayeredMdp, r: &Table, alpha: f64) -> (QTable, ValueTable) {
    let h_len = mdp.horizon;
    let mut q = vec![Vec::new(); h_len];
    let mut v = vec![Vec::new(); h_len];
    let mut next = Vec::new();
    for h in (0..h_len).rev() {
        let cont = mdp.expect_next(h, &next);
        let qh: Vec<Vec<f64>> =
            r[h].iter().zip(&cont).map(|(rs, cs)| rs.iter().zip(cs).map(|(a, b)| a + b).collect()).collect();
        let vh: Vec<f64> = qh.iter().map(|row| lse(row, alpha)).collect();
        next = vh.clone();
        q[h] = qh;
        v[h] = vh;
    }
    (QTable { q, alpha }, ValueTable { v })
}

pub fn softmax_policy(q: &QTable) -> TabularPolicy {
    TabularPolicy { probs: q.q.iter().map(|layer| layer.iter().map(|row| softmax(row, q.alpha)).collect()).collect() }
}

/// State marginals of `d^pi`, layer by layer.
pub fn state_occupancy(mdp: &LayeredMdp, pi: &TabularPolicy) -> Vec<Vec<f64>> {
    let mut mu = Vec::with_capacity(mdp.horizon);
    mu.push(mdp.initial.clone());
    for h in 0..mdp.horizon - 1 {
        let mut next = vec![0.0; mdp.layer_sizes[h + 1]];
        for (s, &m) in mu[h].iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (a, &p) in pi.probs[h][s].iter().enumerate() {
                let w = m * p;
                if w == 0.0 {
                    continue;
                }
                for (n, &t) in next.iter_mut().zip(&mdp.transitions[h][s][a]) {
                    *n += w * t;
                }
            }
        }
        mu.push(next);
    }
    mu
}

pub fn occupancy(mdp: &LayeredMdp, pi: &TabularPolicy) -> OccupancyMeasure {
    let mu = state_occupancy(mdp, pi);
    let d = mu
        .iter()
        .zip(&pi.probs)
        .map(|(m, layer)| m.iter().zip(layer).map(|(&ms, row)| row.iter().map(|p| ms * p).collect()).collect())
        .collect();
    OccupancyMeasure { d }
}

/// `sum_h <d_h, r_h>`.
pub fn table_inner(d: &Table, r: &Table) -> f64 {
    d.iter().zip(r).flat_map(|(dl, rl)| dl.iter().zip(rl)).map(|(dr, rr)| dot(dr, rr)).sum()
}

/// Exact expected return of `pi` under `r`.
pub fn expected_return(mdp: &LayeredMdp, pi: &TabularPolicy, r: &Table) -> f64 {
    table_inner(&occupancy(mdp, pi).d, r)
}

/// Exact expected return under the true reward.
pub fn policy_return(mdp: &LayeredMdp, pi: &TabularPolicy) -> f64 {
    expected_return(mdp, pi, &mdp.reward)
}

/// Half the L1 distance between two equally shaped vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("lengths {} and {}", p.len(), q.len())));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// TV distance between two `[s][a]` layer tables.
pub fn tv_layer(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("{} states vs {}", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (pr, qr) in p.iter().zip(q) {
        total += tv_distance(pr, qr)?;
    }
    Ok(total)
}

/// Conditional action entropy of a layer occupancy, with `0 log 0 = 0`.
pub fn occupancy_entropy(d_h: &[Vec<f64>]) -> f64 {
    let mut ent = 0.0;
    for row in d_h {
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        for &x in row {
            if x > 0.0 {
                ent -= x * (x / mass).ln();
            }
        }
    }
    ent
}

/// `sum_h alpha * Hbar(d^pi_h)`.
pub fn entropy_term(occ: &OccupancyMeasure, alpha: f64) -> f64 {
    alpha * occ.d.iter().map(|l| occupancy_entropy(l)).sum::<f64>()
}

/// `sum_h TV(d_hat_h, d^pi_h) - alpha * Hbar(d^pi_h)`.
pub fn primal_objective(mdp: &LayeredMdp, pi: &TabularPolicy, d_hat: &OccupancyMeasure, alpha: f64) -> Result<f64> {
    let occ = occupancy(mdp, pi);
    let mut total = 0.0;
    for (dh, dp) in d_hat.d.iter().zip(&occ.d) {
        total += tv_layer(dh, dp)? - alpha * occupancy_entropy(dp);
    }
    Ok(total)
}

pub fn check_box(r: &Table) -> Result<()> {
    for (h, layer) in r.iter().enumerate() {
        for (s, row) in layer.iter().enumerate() {
            for (a, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::BoxViolation { h, s, a, value });
                }
            }
        }
    }
    Ok(())
}

/// `sum d_hat . r - E_rho V^{soft, r}(s_1)`; the reward must lie in the unit box.
pub fn dual_objective(mdp: &LayeredMdp, r: &Table, d_hat: &OccupancyMeasure, alpha: f64) -> Result<f64> {
    check_box(r)?;
    Ok(dual_value(mdp, r, d_hat, alpha))
}

/// Dual objective without the box check.
pub fn dual_value(mdp: &LayeredMdp, r: &Table, d_hat: &OccupancyMeasure, alpha: f64) -> f64 {
    let (_, v) = soft_value_iteration(mdp, r, alpha);
    table_inner(&d_hat.d, r) - dot(&mdp.initial, &v.v[0])
}

/// Dual objective together with its gradient `d_hat - d^{pi_r}`.
pub struct DualEval {
    pub value: f64,
    pub grad: Table,
    pub q: QTable,
    pub policy: TabularPolicy,
    pub occupancy: OccupancyMeasure,
}

pub fn dual_eval(mdp: &LayeredMdp, r: &Table, d_hat: &OccupancyMeasure, alpha: f64) -> DualEval {
    let (q, v) = soft_value_iteration(mdp, r, alpha);
    let policy = softmax_policy(&q);
    let occ = occupancy(mdp, &policy);
    let value = table_inner(&d_hat.d, r) - dot(&mdp.initial, &v.v[0]);
    let grad = sub_tables(&d_hat.d, &occ.d);
    DualEval { value, grad, q, policy, occupancy: occ }
}

pub fn sub_tables(a: &Table, b: &Table) -> Table {
    a.iter()
        .zip(b)
        .map(|(la, lb)| la.iter().zip(lb).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect()).collect())
        .collect()
}

/// `r_Q = Q - E_{s'} LSE_alpha(Q)(s')`, with `r_Q = Q` on the last layer.
pub fn induced_reward(mdp: &LayeredMdp, q: &QTable) -> Table {
    let v = state_lse(q);
    (0..mdp.horizon)
        .map(|h| {
            let cont = if h + 1 < mdp.horizon { mdp.expect_next(h, &v[h + 1]) } else { mdp.expect_next(h, &[]) };
            q.q[h].iter().zip(&cont).map(|(qs, cs)| qs.iter().zip(cs).map(|(a, b)| a - b).collect()).collect()
        })
        .collect()
}

/// Draws an index from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn rollout<R: Rng + ?Sized>(mdp: &LayeredMdp, pi: &TabularPolicy, rng: &mut R) -> Trajectory {
    let mut traj = Vec::with_capacity(mdp.horizon);
    let mut s = sample_index(&mdp.initial, rng);
    for h in 0..mdp.horizon {
        let a = sample_index(&pi.probs[h][s], rng);
        traj.push((s, a));
        if h + 1 < mdp.horizon {
            s = sample_index(&mdp.transitions[h][s][a], rng);
        }
    }
    traj
}

impl TabularPolicy {
    /// Loads a policy and checks it against the shape of `mdp`.
    pub fn load(path: impl AsRef<Path>, mdp: &LayeredMdp) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let pi: TabularPolicy = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        pi.validate(mdp).map_err(|e| Error::parse(path, e))?;
        Ok(pi)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("policy serialization is infallible");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Shape agrees with `mdp` and every row is a distribution.
    pub fn validate(&self, mdp: &LayeredMdp) -> Result<()> {
        if self.probs.len() != mdp.horizon {
            return Err(Error::Shape(format!("policy has {} layers, mdp has {}", self.probs.len(), mdp.horizon)));
        }
        for (h, layer) in self.probs.iter().enumerate() {
            if layer.len() != mdp.layer_sizes[h] {
                return Err(Error::Shape(format!("policy layer {h} has {} states", layer.len())));
            }
            for (s, row) in layer.iter().enumerate() {
                if row.len() != mdp.num_actions {
                    return Err(Error::Shape(format!("policy row (h={h}, s={s}) has {} actions", row.len())));
                }
                check_distribution(row, || format!("policy row (h={h}, s={s})"))?;
            }
        }
        Ok(())
    }

    pub fn uniform(mdp: &LayeredMdp) -> Self {
        TabularPolicy { probs: mdp.filled(1.0 / mdp.num_actions as f64) }
    }

    /// A deterministic policy from one action per `(h, s)`.
    pub fn deterministic(mdp: &LayeredMdp, actions: &[Vec<usize>]) -> Self {
        let mut probs = mdp.zeros();
        for (h, layer) in actions.iter().enumerate() {
            for (s, &a) in layer.iter().enumerate() {
                probs[h][s][a] = 1.0;
            }
        }
        TabularPolicy { probs }
    }

    /// The action at `(h, s)` if the row is one-hot.
    pub fn deterministic_action(&self, h: usize, s: usize) -> Option<usize> {
        let row = &self.probs[h][s];
        let a = row.iter().position(|&p| p == 1.0)?;
        row.iter().enumerate().all(|(b, &p)| b == a || p == 0.0).then_some(a)
    }

    /// Largest per-state TV distance in layer `h`.
    pub fn max_tv_in_layer(&self, other: &TabularPolicy, h: usize) -> f64 {
        self.probs[h]
            .iter()
            .zip(&other.probs[h])
            .map(|(p, q)| tv_distance(p, q).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Largest per-state TV distance over all layers.
    pub fn max_tv(&self, other: &TabularPolicy) -> f64 {
        (0..self.probs.len()).map(|h| self.max_tv_in_layer(other, h)).fold(0.0, f64::max)
    }
}
