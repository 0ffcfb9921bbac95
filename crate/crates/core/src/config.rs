//! TOML configuration shared by the `bench` and `verify` commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::cell_seed;
use crate::bench::SweepSpec;
use crate::demos::{collect_demos, DemoDataset};
use crate::error::{Error, Result};
use crate::instances::{example_d5, random_layered_mdp, random_td_mdp, ExpertKind};
use crate::mdp::{LayeredMdp, TabularPolicy};
use crate::solvers::{Method, SolverConfig};
use crate::suites::{default_cor1_sweep, Instance, SuiteOptions};
use crate::verify::suite_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(non_snake_case)]
pub enum InstanceConfig {
    ResetCliff {
        S: usize,
        A: usize,
        N: usize,
    },
    D5,
    Random {
        layer_sizes: Vec<usize>,
        num_actions: usize,
        #[serde(default)]
        td: bool,
        #[serde(default = "default_demos")]
        N: usize,
    },
    File {
        mdp: PathBuf,
        demo: PathBuf,
        #[serde(default)]
        expert: Option<PathBuf>,
    },
}

impl InstanceConfig {
    /// Builds the instance, or `None` for Reset Cliff, whose horizon comes from the sweep.
    pub fn materialize(&self, seed: u64) -> Result<Option<Instance>> {
        match self {
            InstanceConfig::ResetCliff { .. } => Ok(None),
            InstanceConfig::D5 => {
                let (mdp, expert, demo) = example_d5();
                Ok(Some(Instance { label: "d5".into(), mdp, expert: Some(expert), demo }))
            }
            InstanceConfig::Random { layer_sizes, num_actions, td, N } => {
                let mut rng = suite_rng(seed);
                let (mdp, expert) = if *td {
                    random_td_mdp(layer_sizes, *num_actions, &mut rng, 100_000)?
                } else {
                    random_layered_mdp(layer_sizes, *num_actions, &mut rng, ExpertKind::Random)?
                };
                let demo = collect_demos(&mdp, &expert, *N, cell_seed(seed, &[1]))?;
                Ok(Some(Instance { label: "random".into(), mdp, expert: Some(expert), demo }))
            }
            InstanceConfig::File { mdp, demo, expert } => {
                let m = LayeredMdp::load(mdp)?;
                let d = DemoDataset::load(demo, &m)?;
                let e = expert.as_ref().map(|p| TabularPolicy::load(p, &m)).transpose()?;
                let label = mdp.file_stem().map_or("file".into(), |x| x.to_string_lossy().into_owned());
                Ok(Some(Instance { label, mdp: m, expert: e, demo: d }))
            }
        }
    }
}

fn default_demos() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Record wall time per row; off makes bench output byte-reproducible.
    pub timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { csv: None, summary: None, report: None, timing: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random instances per battery.
    pub instances: usize,
    pub tol: Option<f64>,
    /// Refuse horizon ladders outside the quadratic regime instead of running them.
    pub enforce_regime: bool,
    /// Solver settings for the reward-space checks.
    pub dual: Option<SolverConfig>,
    pub thm1: Option<SolverConfig>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { instances: 10, tol: None, enforce_regime: false, dual: None, thm1: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub horizons: Vec<usize>,
    /// Explicit demo seeds; when absent `num_seeds` seeds starting at `seed` are used.
    pub demo_seeds: Option<Vec<u64>>,
    pub num_seeds: usize,
    pub seed: u64,
    pub instance: InstanceConfig,
    pub solver: SolverConfig,
    /// Per-method solver settings replacing `solver`, keyed by method name.
    pub overrides: BTreeMap<Method, SolverConfig>,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let sweep = default_cor1_sweep();
        BenchConfig {
            methods: sweep.methods,
            horizons: sweep.horizons,
            demo_seeds: None,
            num_seeds: sweep.seeds.len(),
            seed: 0,
            instance: InstanceConfig::ResetCliff { S: sweep.S, A: sweep.A, N: sweep.N },
            solver: sweep.solver,
            overrides: BTreeMap::new(),
            output: OutputConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BenchConfig::from_toml(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        if self.seeds().is_empty() {
            return Err(Error::Config("at least one demo seed is required".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be a nonempty list of positive integers".into()));
        }
        self.solver.validate()?;
        for c in self.overrides.values() {
            c.validate()?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.demo_seeds {
            Some(s) => s.clone(),
            None => (0..self.num_seeds as u64).map(|i| self.seed + i).collect(),
        }
    }

    /// The Reset Cliff sweep described by this config.
    #[allow(non_snake_case)]
    pub fn sweep(&self) -> Result<SweepSpec> {
        let InstanceConfig::ResetCliff { S, A, N } = self.instance else {
            return Err(Error::Config("sweeps run on reset_cliff instances only".into()));
        };
        Ok(SweepSpec {
            S,
            A,
            N,
            horizons: self.horizons.clone(),
            seeds: self.seeds(),
            methods: self.methods.clone(),
            solver: self.solver.clone(),
            overrides: self.overrides.clone(),
        })
    }

    /// Verification options; the horizon sweep comes from this config's sweep fields.
    pub fn suite_options(&self) -> Result<SuiteOptions> {
        let mut opts = SuiteOptions {
            seed: self.seed,
            instances: self.verify.instances,
            tol: self.verify.tol,
            ..SuiteOptions::default()
        };
        if let InstanceConfig::ResetCliff { .. } = self.instance {
            opts.cor1 = self.sweep()?;
        }
        opts.cor1_opts.enforce_regime = self.verify.enforce_regime;
        if let Some(d) = &self.verify.dual {
            opts.dual = d.clone();
        }
        if let Some(t) = &self.verify.thm1 {
            opts.thm1 = t.clone();
        }
        opts.instance = self.instance.materialize(self.seed)?;
        Ok(opts)
    }
}
