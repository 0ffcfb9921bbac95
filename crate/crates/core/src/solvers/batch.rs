use std::collections::BTreeMap;

use crate::mdp::Trajectory;

/// Transition tuples `(h, s, a, s')` aggregated over trajectories.
///
/// Weights are counts divided by the number of trajectories, so a sum over the
/// batch is a per-trajectory average of a sum over steps. `next` is `None` on
/// the last step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
    counts: BTreeMap<(usize, usize, usize, Option<usize>), usize>,
    trajectories: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchItem {
    pub h: usize,
    pub s: usize,
    pub a: usize,
    pub next: Option<usize>,
    pub weight: f64,
}

impl Batch {
    pub fn from_trajectories<'a>(trajs: impl IntoIterator<Item = &'a Trajectory>) -> Self {
        let mut b = Batch::default();
        b.extend(trajs);
        b
    }

    pub fn push(&mut self, traj: &Trajectory) {
        self.extend(std::iter::once(traj));
    }

    pub fn extend<'a>(&mut self, trajs: impl IntoIterator<Item = &'a Trajectory>) {
        for traj in trajs {
            for (h, &(s, a)) in traj.iter().enumerate() {
                let next = traj.get(h + 1).map(|&(s2, _)| s2);
                *self.counts.entry((h, s, a, next)).or_insert(0) += 1;
            }
            self.trajectories += 1;
        }
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let n = self.trajectories.max(1) as f64;
        self.items = self
            .counts
            .iter()
            .map(|(&(h, s, a, next), &c)| BatchItem { h, s, a, next, weight: c as f64 / n })
            .collect();
    }

    pub fn num_trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories == 0
    }
}
