use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ildm::bench::{rows_csv, run_sweep, summarize, summary_csv, with_thread_cap};
use ildm::config::{BenchConfig, InstanceConfig};
use ildm::demos::{collect_demos, DemoDataset};
use ildm::instances::{
    example_d5, is_td_mdp, random_layered_mdp, random_td_mdp, reset_cliff, ExpertKind, ResetCliffSpec,
};
use ildm::mdp::{policy_return, LayeredMdp, TabularPolicy};
use ildm::solvers::{solve, Method, SolverConfig};
use ildm::suites::{run_suite, Suite};
use ildm::verify::{suite_rng, CheckReport};
use ildm::{Error, Result};

/// Tabular imitation learning: instance generation, solvers, sweeps and checks.
#[derive(Parser)]
#[command(name = "ildm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an MDP, its expert policy, and demonstrations as JSON.
    Gen(GenArgs),
    /// Run one learner on an MDP and demo file.
    Solve(SolveArgs),
    /// Sweep methods over horizons and seeds on Reset Cliff.
    Bench(BenchArgs),
    /// Run theorem-check suites; exits 0 iff every check passes.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
#[allow(non_snake_case)]
enum GenKind {
    /// Reset Cliff with S states per layer (last is the bad state) and A actions.
    ResetCliff {
        #[arg(long = "S")]
        S: usize,
        #[arg(long = "A")]
        A: usize,
        #[arg(long = "H")]
        H: usize,
        #[arg(long = "N")]
        N: usize,
    },
    /// The two-step worked example.
    D5,
    /// Random layered MDP with a random deterministic expert.
    Random {
        /// Comma-separated states per layer.
        #[arg(long, value_delimiter = ',', default_values_t = [3, 3, 3])]
        layers: Vec<usize>,
        #[arg(long = "A", default_value_t = 3)]
        A: usize,
        /// Demonstrations to draw; none when absent.
        #[arg(long = "N")]
        N: Option<usize>,
        /// Resample until the instance is transition-discriminative.
        #[arg(long)]
        reject_until_td: bool,
        #[arg(long, default_value_t = 100_000)]
        max_tries: usize,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// One of bc, iq_tv, iq_chi2, iq_reg, value_dice, dual_qdm_exact, dual_qdm_penalty, ail.
    method: Method,
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    demo: PathBuf,
    /// Expert policy; enables the gap in the summary line.
    #[arg(long)]
    expert: Option<PathBuf>,
    /// TOML file holding a solver config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result JSON path.
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
    /// Loss trace CSV path.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct SweepFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; demo seeds run from here unless the config lists them.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    sweep: SweepFlags,
    /// Per-row CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-(method, H) summary CSV path.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Write 0 in the wall-time column.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// thm1, cor1, thm2, lemma1, prop1, gradcheck, or all.
    suite: String,
    #[command(flatten)]
    sweep: SweepFlags,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check this instance instead of the seeded battery.
    #[arg(long, requires = "demo")]
    mdp: Option<PathBuf>,
    #[arg(long, requires = "mdp")]
    demo: Option<PathBuf>,
    #[arg(long, requires = "mdp")]
    expert: Option<PathBuf>,
    /// Random instances per battery.
    #[arg(long)]
    instances: Option<usize>,
}

/// Process exit status for checks that ran but did not all pass.
const EXIT_FAILED: u8 = 1;
/// Process exit status for bad input.
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Solve(a) => solve_cmd(a).map(|_| true),
        Command::Bench(a) => with_thread_cap(|| bench(a)).map(|_| true),
        Command::Verify(a) => with_thread_cap(|| verify(a)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_USAGE } else { EXIT_FAILED })
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialization is infallible")
}

#[derive(Serialize)]
struct InstanceMeta<'a> {
    kind: &'a str,
    seed: u64,
    mdp_hash: String,
    spec: serde_json::Value,
}

fn gen(a: GenArgs) -> Result<()> {
    let (kind, spec, mdp, expert, demo): (&str, serde_json::Value, LayeredMdp, TabularPolicy, Option<DemoDataset>) =
        match a.kind {
            GenKind::ResetCliff { S, A, H, N } => {
                let spec = ResetCliffSpec { S, A, H, N };
                let (mdp, expert) = reset_cliff(&spec)?;
                let demo = collect_demos(&mdp, &expert, N, a.seed)?;
                let meta = serde_json::json!({ "S": S, "A": A, "H": H, "N": N, "epsilon": spec.epsilon() });
                ("reset_cliff", meta, mdp, expert, Some(demo))
            }
            GenKind::D5 => {
                let (mdp, expert, demo) = example_d5();
                ("d5", serde_json::json!({}), mdp, expert, Some(demo))
            }
            GenKind::Random { layers, A, N, reject_until_td, max_tries } => {
                let mut rng = suite_rng(a.seed);
                let (mdp, expert) = if reject_until_td {
                    random_td_mdp(&layers, A, &mut rng, max_tries)?
                } else {
                    random_layered_mdp(&layers, A, &mut rng, ExpertKind::Random)?
                };
                let demo = N.map(|n| collect_demos(&mdp, &expert, n, a.seed)).transpose()?;
                let td = is_td_mdp(&mdp, &expert)?.is_td;
                let meta = serde_json::json!({ "layer_sizes": layers, "A": A, "N": N, "td": td });
                ("random", meta, mdp, expert, demo)
            }
        };
    let out = &a.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    mdp.save(out.join("mdp.json"))?;
    expert.save(out.join("expert.json"))?;
    if let Some(d) = &demo {
        d.save(out.join("demo.json"))?;
    }
    let meta = InstanceMeta { kind, seed: a.seed, mdp_hash: mdp.hash(), spec };
    write(&out.join("instance.json"), &to_json(&meta))?;
    println!("wrote {kind} instance to {}", out.display());
    Ok(())
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let mdp = LayeredMdp::load(&a.mdp)?;
    let demo = DemoDataset::load(&a.demo, &mdp)?;
    let expert = a.expert.as_ref().map(|p| TabularPolicy::load(p, &mdp)).transpose()?;
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<SolverConfig>(&text).map_err(|e| Error::parse(path, e))?
        }
        None => SolverConfig::default(),
    };
    if let Some(x) = a.seed {
        cfg.seed = x;
    }
    if let Some(x) = a.tol {
        cfg.grad_tol = Some(x);
    }
    if let Some(x) = a.alpha {
        cfg.alpha = x;
    }
    if let Some(x) = a.learning_rate {
        cfg.learning_rate = Some(x);
    }
    if let Some(x) = a.max_iters {
        cfg.max_iters = x;
    }
    if let Some(x) = a.beta {
        cfg.beta = x;
    }
    cfg.validate()?;
    let res = solve(a.method, &mdp, &demo, &cfg)?;
    write(&a.out, &res.to_json())?;
    if let Some(t) = &a.trace {
        write(t, &res.trace_csv())?;
    }
    let value = policy_return(&mdp, &res.policy);
    let tail = match &expert {
        Some(e) => format!("gap={}", policy_return(&mdp, e) - value),
        None => format!("return={value}"),
    };
    println!(
        "method={} iters={} converged={} objective={} {tail}",
        res.method, res.iters, res.converged, res.final_objective
    );
    Ok(())
}

/// Config file (or defaults) with command-line flags applied on top.
fn load_config(f: &SweepFlags) -> Result<BenchConfig> {
    let mut cfg = match &f.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = f.seed {
        cfg.seed = s;
    }
    if let Some(m) = &f.methods {
        cfg.methods = m.clone();
    }
    if let Some(h) = &f.horizons {
        cfg.horizons = h.clone();
    }
    if let Some(n) = f.seeds {
        cfg.num_seeds = n;
        cfg.demo_seeds = None;
    }
    if let Some(t) = f.tol {
        cfg.verify.tol = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg = load_config(&a.sweep)?;
    if let Some(t) = a.sweep.tol {
        cfg.solver.grad_tol = Some(t);
    }
    let timing = cfg.output.timing && !a.no_timing;
    let rows = run_sweep(&cfg.sweep()?)?;
    let csv = rows_csv(&rows, timing);
    match a.out.or(cfg.output.csv.clone()) {
        Some(p) => write(&p, &csv)?,
        None => print!("{csv}"),
    }
    let summary = summarize(&rows);
    if let Some(p) = a.summary.or(cfg.output.summary.clone()) {
        write(&p, &summary_csv(&summary))?;
    }
    for s in &summary {
        eprintln!("{:>16} H={:<4} n={:<4} gap={:.4} se={:.4}", s.method, s.H, s.n, s.mean, s.se);
    }
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("row {} H={} seed={} failed: {}", r.method, r.H, r.seed, r.error.as_deref().unwrap_or(""));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    suites: Vec<SuiteReport>,
}

#[derive(Serialize)]
struct SuiteReport {
    suite: Suite,
    passed: bool,
    error: Option<String>,
    checks: Vec<CheckReport>,
}

fn verify(a: VerifyArgs) -> Result<bool> {
    let suites: Vec<Suite> = match a.suite.as_str() {
        "all" => Suite::ALL.to_vec(),
        s => vec![s.parse()?],
    };
    let mut cfg = load_config(&a.sweep)?;
    if let Some(m) = &a.mdp {
        cfg.instance = InstanceConfig::File {
            mdp: m.clone(),
            demo: a.demo.clone().expect("clap requires --demo with --mdp"),
            expert: a.expert.clone(),
        };
    }
    if let Some(n) = a.instances {
        cfg.verify.instances = n;
    }
    let opts = cfg.suite_options()?;

    let mut report = VerifyReport { passed: true, suites: Vec::new() };
    for suite in suites {
        let sr = match run_suite(suite, &opts) {
            Ok(checks) => SuiteReport { suite, passed: checks.iter().all(|c| c.passed), error: None, checks },
            Err(e) if e.is_input_error() => return Err(e),
            Err(e) => SuiteReport { suite, passed: false, error: Some(e.to_string()), checks: Vec::new() },
        };
        let n_pass = sr.checks.iter().filter(|c| c.passed).count();
        println!(
            "{:<10} {} ({n_pass}/{} checks)",
            suite.name(),
            if sr.passed { "PASS" } else { "FAIL" },
            sr.checks.len()
        );
        if let Some(e) = &sr.error {
            println!("    error: {e}");
        }
        for c in sr.checks.iter().filter(|c| !c.passed) {
            println!("    {}: {}", c.name, c.details.as_deref().unwrap_or("failed"));
        }
        report.passed &= sr.passed;
        report.suites.push(sr);
    }
    if let Some(p) = a.out.or(cfg.output.report.clone()) {
        write(&p, &to_json(&report))?;
    }
    Ok(report.passed)
}
