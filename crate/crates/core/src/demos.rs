//! Expert demonstrations and their empirical statistics.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{rollout, LayeredMdp, OccupancyMeasure, Table, TabularPolicy, Trajectory};

/// Serialized form of a dataset; derived statistics are rebuilt on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoFile {
    pub mdp_hash: String,
    pub seed: u64,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoDataset {
    pub mdp_hash: String,
    pub seed: u64,
    pub trajectories: Vec<Trajectory>,
    /// `n(h, s, a)`.
    pub counts: Vec<Vec<Vec<usize>>>,
    /// `n(h, s)`.
    pub state_counts: Vec<Vec<usize>>,
    occupancy: OccupancyMeasure,
}

impl DemoDataset {
    pub fn new(mdp: &LayeredMdp, trajectories: Vec<Trajectory>, seed: u64) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut counts: Vec<Vec<Vec<usize>>> =
            mdp.layer_sizes.iter().map(|&n| vec![vec![0; mdp.num_actions]; n]).collect();
        for (i, traj) in trajectories.iter().enumerate() {
            if traj.len() != mdp.horizon {
                return Err(Error::Shape(format!(
                    "trajectory {i} has length {}, horizon is {}",
                    traj.len(),
                    mdp.horizon
                )));
            }
            for (h, &(s, a)) in traj.iter().enumerate() {
                if s >= mdp.layer_sizes[h] || a >= mdp.num_actions {
                    return Err(Error::OutOfRange(format!("trajectory {i} step {h} has pair ({s}, {a})")));
                }
                counts[h][s][a] += 1;
            }
        }
        let state_counts: Vec<Vec<usize>> =
            counts.iter().map(|layer| layer.iter().map(|row| row.iter().sum()).collect()).collect();
        let n = trajectories.len() as f64;
        let d: Table = counts
            .iter()
            .map(|layer| layer.iter().map(|row| row.iter().map(|&c| c as f64 / n).collect()).collect())
            .collect();
        Ok(DemoDataset {
            mdp_hash: mdp.hash(),
            seed,
            trajectories,
            counts,
            state_counts,
            occupancy: OccupancyMeasure { d },
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.counts.len()
    }

    /// Empirical occupancy `d_hat_h(s, a) = n(h, s, a) / N`.
    pub fn occupancy(&self) -> &OccupancyMeasure {
        &self.occupancy
    }

    pub fn visited(&self, h: usize, s: usize) -> Result<bool> {
        self.state_counts
            .get(h)
            .and_then(|l| l.get(s))
            .map(|&c| c > 0)
            .ok_or_else(|| Error::OutOfRange(format!("state ({h}, {s})")))
    }

    pub fn visited_pair(&self, h: usize, s: usize, a: usize) -> Result<bool> {
        self.counts
            .get(h)
            .and_then(|l| l.get(s))
            .and_then(|r| r.get(a))
            .map(|&c| c > 0)
            .ok_or_else(|| Error::OutOfRange(format!("pair ({h}, {s}, {a})")))
    }

    pub fn to_file(&self) -> DemoFile {
        DemoFile { mdp_hash: self.mdp_hash.clone(), seed: self.seed, trajectories: self.trajectories.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("demo serialization is infallible")
    }

    /// Loads a demo file and rebuilds its statistics against `mdp`.
    pub fn load(path: impl AsRef<Path>, mdp: &LayeredMdp) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: DemoFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        if file.mdp_hash != mdp.hash() {
            return Err(Error::parse(path, "mdp_hash does not match the supplied mdp"));
        }
        DemoDataset::new(mdp, file.trajectories, file.seed).map_err(|e| Error::parse(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// `n` seeded expert rollouts.
pub fn collect_demos(mdp: &LayeredMdp, expert: &TabularPolicy, n: usize, seed: u64) -> Result<DemoDataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories = (0..n).map(|_| rollout(mdp, expert, &mut rng)).collect();
    DemoDataset::new(mdp, trajectories, seed)
}

pub fn empirical_occupancy(demo: &DemoDataset) -> Result<OccupancyMeasure> {
    if demo.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(demo.occupancy().clone())
}
