#![allow(dead_code)]

use ildm::demos::{collect_demos, DemoDataset};
use ildm::instances::{random_layered_mdp, ExpertKind};
use ildm::mdp::{LayeredMdp, Table, TabularPolicy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small random instance with `n` expert demonstrations.
pub fn instance(seed: u64, n: usize) -> (LayeredMdp, TabularPolicy, DemoDataset) {
    let mut r = rng(seed);
    let h = r.random_range(1..=4);
    let sizes: Vec<usize> = (0..h).map(|_| r.random_range(1..=4)).collect();
    let a = r.random_range(1..=3);
    let (mdp, expert) = random_layered_mdp(&sizes, a, &mut r, ExpertKind::Random).unwrap();
    let demo = collect_demos(&mdp, &expert, n, seed ^ 0xdead).unwrap();
    (mdp, expert, demo)
}

pub fn random_table(mdp: &LayeredMdp, seed: u64, lo: f64, hi: f64) -> Table {
    let mut r = rng(seed);
    let mut t = mdp.zeros();
    for x in t.iter_mut().flatten().flatten() {
        *x = r.random_range(lo..hi);
    }
    t
}

pub fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}

pub fn max_abs_diff(a: &Table, b: &Table) -> f64 {
    a.iter().flatten().flatten().zip(b.iter().flatten().flatten()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
