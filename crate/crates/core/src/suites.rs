//! Seeded batteries of instances that drive the checkers in [`crate::verify`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{cell_seed, SweepSpec};
use crate::demos::{collect_demos, DemoDataset};
use crate::error::{Error, Result};
use crate::instances::{example_d5, random_layered_mdp, random_td_mdp, reset_cliff, ExpertKind, ResetCliffSpec};
use crate::mdp::{LayeredMdp, TabularPolicy};
use crate::solvers::{dual_qdm_exact, Method, SolverConfig};
use crate::verify::{
    check_cor1, check_lemma1, check_prop1, check_round_trip, check_thm1, check_thm2_saddle, grad_check, random_point,
    suite_rng, thm1_config, CheckReport, Cor1Options, GradObjective,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Thm1,
    Cor1,
    Thm2,
    Lemma1,
    Prop1,
    Gradcheck,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Thm1, Suite::Cor1, Suite::Thm2, Suite::Lemma1, Suite::Prop1, Suite::Gradcheck];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Thm1 => "thm1",
            Suite::Cor1 => "cor1",
            Suite::Thm2 => "thm2",
            Suite::Lemma1 => "lemma1",
            Suite::Prop1 => "prop1",
            Suite::Gradcheck => "gradcheck",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// Temperature of the worked two-step example.
pub const D5_ALPHA: f64 = 0.1;

/// Temperature used for Reset Cliff horizon sweeps.
pub const CLIFF_ALPHA: f64 = 0.05;

/// An explicit instance to check instead of the seeded battery.
#[derive(Clone, Debug)]
pub struct Instance {
    pub label: String,
    pub mdp: LayeredMdp,
    pub expert: Option<TabularPolicy>,
    pub demo: DemoDataset,
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random instances per battery.
    pub instances: usize,
    /// Overrides the headline tolerance of each checker when set.
    pub tol: Option<f64>,
    pub cor1: SweepSpec,
    pub cor1_opts: Cor1Options,
    /// Solver settings for the reward-space checks (thm2, lemma1, prop1).
    pub dual: SolverConfig,
    pub thm1: SolverConfig,
    pub instance: Option<Instance>,
}

/// The default Reset Cliff horizon sweep: S=4, A=5, N=2, H up to 80.
pub fn default_cor1_sweep() -> SweepSpec {
    let solver = SolverConfig { alpha: CLIFF_ALPHA, max_iters: 2000, ..SolverConfig::default() };
    SweepSpec {
        S: 4,
        A: 5,
        N: 2,
        horizons: vec![10, 20, 40, 80],
        seeds: (0..100).collect(),
        methods: vec![Method::Bc, Method::IqTv, Method::ValueDice, Method::DualQdmExact, Method::Ail],
        solver,
        overrides: Default::default(),
    }
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            instances: 10,
            tol: None,
            cor1: default_cor1_sweep(),
            // The default ladder leaves the quadratic regime; run it anyway and report.
            cor1_opts: Cor1Options { enforce_regime: false, ..Cor1Options::default() },
            dual: SolverConfig { alpha: D5_ALPHA, max_iters: 50_000, grad_tol: Some(1e-12), ..SolverConfig::default() },
            thm1: thm1_config(),
            instance: None,
        }
    }
}

fn labeled(mut rep: CheckReport, label: &str) -> CheckReport {
    rep.name = format!("{}/{label}", rep.name);
    rep
}

fn random_shape<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_actions: usize,
    max_h: usize,
) -> (Vec<usize>, usize) {
    let h = rng.random_range(2..=max_h);
    let sizes = (0..h).map(|_| rng.random_range(1..=max_states)).collect();
    (sizes, rng.random_range(2..=max_actions))
}

fn random_instance(
    seed: u64,
    tag: u64,
    i: usize,
    n: usize,
    max_states: usize,
    max_actions: usize,
    max_h: usize,
) -> Result<Instance> {
    let mut rng = suite_rng(cell_seed(seed, &[tag, i as u64]));
    let (sizes, a) = random_shape(&mut rng, max_states, max_actions, max_h);
    let (mdp, expert) = random_layered_mdp(&sizes, a, &mut rng, ExpertKind::Random)?;
    let demo = collect_demos(&mdp, &expert, n, rng.random())?;
    Ok(Instance { label: format!("random-{i}"), mdp, expert: Some(expert), demo })
}

fn random_td_instance(seed: u64, tag: u64, i: usize, n: usize) -> Result<Instance> {
    let mut rng = suite_rng(cell_seed(seed, &[tag, i as u64]));
    let (mut sizes, a) = random_shape(&mut rng, 4, 3, 4);
    for n in sizes.iter_mut().skip(1) {
        *n = (*n).max(2);
    }
    let (mdp, expert) = random_td_mdp(&sizes, a, &mut rng, 10_000)?;
    let demo = collect_demos(&mdp, &expert, n, rng.random())?;
    Ok(Instance { label: format!("td-{i}"), mdp, expert: Some(expert), demo })
}

fn d5_instance() -> Instance {
    let (mdp, expert, demo) = example_d5();
    Instance { label: "d5".into(), mdp, expert: Some(expert), demo }
}

fn battery(
    opts: &SuiteOptions,
    extra: Vec<Instance>,
    make: impl Fn(usize) -> Result<Instance>,
) -> Result<Vec<Instance>> {
    if let Some(inst) = &opts.instance {
        return Ok(vec![inst.clone()]);
    }
    let mut out = extra;
    for i in 0..opts.instances {
        out.push(make(i)?);
    }
    Ok(out)
}

/// Runs one suite; each report is named `suite/instance`.
pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let seed = opts.seed;
    match suite {
        Suite::Thm1 => {
            let cliff = {
                let spec = ResetCliffSpec { S: 5, A: 5, H: 10, N: 2 };
                let (mdp, expert) = reset_cliff(&spec)?;
                let demo = collect_demos(&mdp, &expert, spec.N, cell_seed(seed, &[1, 999]))?;
                Instance { label: "reset_cliff".into(), mdp, expert: Some(expert), demo }
            };
            let insts = battery(opts, vec![], |i| random_instance(seed, 1, i, 3, 6, 4, 5))?;
            let insts = if opts.instance.is_some() { insts } else { insts.into_iter().chain([cliff]).collect() };
            insts
                .iter()
                .map(|x| {
                    check_thm1(&x.mdp, &x.demo, &opts.thm1, opts.tol.unwrap_or(1e-3), 1e-6)
                        .map(|r| labeled(r, &x.label))
                })
                .collect()
        }
        Suite::Cor1 => Ok(vec![check_cor1(&opts.cor1, &opts.cor1_opts)?.report]),
        Suite::Thm2 => {
            let insts = battery(opts, vec![d5_instance()], |i| random_instance(seed, 3, i, 3, 4, 3, 4))?;
            insts
                .iter()
                .map(|x| {
                    let res = dual_qdm_exact(&x.mdp, &x.demo, &opts.dual)?;
                    if !res.converged {
                        let mut rep =
                            CheckReport::failed("thm2", format!("solver stopped after {} iterations", res.iters));
                        rep.metrics.insert("iters".into(), res.iters as f64);
                        return Ok(labeled(rep, &x.label));
                    }
                    check_thm2_saddle(&x.mdp, &x.demo, &res, opts.dual.alpha, opts.tol.unwrap_or(1e-3))
                        .map(|r| labeled(r, &x.label))
                })
                .collect()
        }
        Suite::Lemma1 => {
            let insts = battery(opts, vec![d5_instance()], |i| random_td_instance(seed, 4, i, 1))?;
            insts
                .iter()
                .map(|x| {
                    let res = dual_qdm_exact(&x.mdp, &x.demo, &opts.dual)?;
                    let q = res.q.as_ref().expect("dual result carries Q");
                    check_lemma1(&x.mdp, &x.demo, q, opts.tol.unwrap_or(1e-3)).map(|r| labeled(r, &x.label))
                })
                .collect()
        }
        Suite::Prop1 => {
            let insts = battery(opts, vec![d5_instance()], |i| random_td_instance(seed, 5, i, 2))?;
            insts
                .iter()
                .map(|x| {
                    let expert =
                        x.expert.as_ref().ok_or_else(|| Error::Precondition("prop1 needs an expert policy".into()))?;
                    let (rep, _) = check_prop1(&x.mdp, expert, &x.demo, &opts.dual, opts.tol.unwrap_or(1e-4), 1e-9)?;
                    Ok(labeled(rep, &x.label))
                })
                .collect()
        }
        Suite::Gradcheck => {
            let tol = opts.tol.unwrap_or(1e-5);
            let mut reports = Vec::new();
            for (k, obj) in [GradObjective::Dual, GradObjective::IqTv, GradObjective::IqChi2].into_iter().enumerate() {
                for i in 0..2 * opts.instances {
                    let x = match &opts.instance {
                        Some(inst) => inst.clone(),
                        None => random_instance(seed, 60 + k as u64, i, 3, 4, 3, 4)?,
                    };
                    let mut rng = suite_rng(cell_seed(seed, &[70 + k as u64, i as u64]));
                    let point = random_point(obj, &x.mdp, &mut rng);
                    let rep = grad_check(obj, &x.mdp, &x.demo, 1.0, &point, tol);
                    reports.push(labeled(rep, &format!("{}-{i}", obj.name())));
                }
            }
            for i in 0..2 * opts.instances {
                let x = match &opts.instance {
                    Some(inst) => inst.clone(),
                    None => random_instance(seed, 80, i, 1, 4, 3, 4)?,
                };
                let mut rng = suite_rng(cell_seed(seed, &[81, i as u64]));
                let r = random_point(GradObjective::Dual, &x.mdp, &mut rng);
                let alpha = rng.random_range(0.05..2.0);
                reports.push(labeled(check_round_trip(&x.mdp, &r, alpha, 1e-10), &format!("{i}")));
            }
            Ok(reports)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("thm3".parse::<Suite>().is_err());
    }
}
