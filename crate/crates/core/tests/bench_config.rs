use ildm::bench::*;
use ildm::config::{BenchConfig, InstanceConfig};
use ildm::instances::ResetCliffSpec;
use ildm::solvers::{Method, SolverConfig};
use ildm::verify::bc_gap_expected;

fn small_sweep() -> SweepSpec {
    SweepSpec {
        S: 4,
        A: 3,
        N: 2,
        horizons: vec![3, 6],
        seeds: (0..40).collect(),
        methods: vec![Method::Bc, Method::Ail],
        solver: SolverConfig { alpha: 0.05, max_iters: 300, ..SolverConfig::default() },
        overrides: Default::default(),
    }
}

#[test]
fn splitmix_reference_values() {
    // First outputs of the reference generator seeded with 0 and 1.
    assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    assert_eq!(splitmix64(0x9e37_79b9_7f4a_7c15), 0x6e78_9e6a_a1b9_65f4);
    assert_ne!(cell_seed(1, &[2, 3]), cell_seed(1, &[3, 2]));
}

#[test]
fn sweep_rows_are_sorted_and_deterministic() {
    let spec = small_sweep();
    let a = run_sweep(&spec).unwrap();
    let b = run_sweep(&spec).unwrap();
    assert_eq!(a.len(), 2 * 2 * 40);
    assert_eq!(rows_csv(&a, false), rows_csv(&b, false));
    let keys: Vec<_> = a.iter().map(|r| (r.method, r.H, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(rows_csv(&a, false).starts_with(CSV_HEADER));
}

#[test]
fn bc_rows_track_the_exact_expectation() {
    let spec = SweepSpec { methods: vec![Method::Bc], seeds: (0..300).collect(), ..small_sweep() };
    let summary = summarize(&run_sweep(&spec).unwrap());
    for s in summary {
        let e = bc_gap_expected(&ResetCliffSpec { S: 4, A: 3, H: s.H, N: 2 });
        assert!((s.mean - e).abs() < 3.0 * s.se, "H={}: {} vs {e} (se {})", s.H, s.mean, s.se);
    }
}

#[test]
fn summary_statistics_by_hand() {
    let row = |gap, seed| BenchRow {
        method: Method::Bc,
        H: 2,
        S: 4,
        A: 2,
        N: 1,
        seed,
        gap,
        converged: true,
        wall_time_ms: 1.0,
        error: None,
    };
    let mut failed = row(100.0, 3);
    failed.error = Some("boom".into());
    let s = summarize(&[row(1.0, 0), row(2.0, 1), row(3.0, 2), failed.clone()]);
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].n, 3);
    assert_eq!(s[0].mean, 2.0);
    assert!((s[0].se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!(failed.csv_line(true).contains(",NaN,"));
    assert!(row(1.0, 0).csv_line(false).ends_with(",0"));
}

#[test]
fn overrides_apply_per_method() {
    let mut spec = small_sweep();
    let slow = SolverConfig { max_iters: 0, ..spec.solver.clone() };
    spec.overrides.insert(Method::Ail, slow);
    let rows = run_sweep(&spec).unwrap();
    assert!(rows.iter().filter(|r| r.method == Method::Ail).all(|r| !r.converged));
    assert!(rows.iter().filter(|r| r.method == Method::Bc).all(|r| r.converged));
}

#[test]
fn toml_config_round_trip() {
    let text = r#"
methods = ["bc", "iq_tv"]
horizons = [5, 10]
num_seeds = 7
seed = 3

[instance]
kind = "reset_cliff"
S = 4
A = 5
N = 2

[solver]
alpha = 0.05
max_iters = 100

[overrides.iq_tv]
alpha = 0.05
learning_rate = 0.5

[output]
timing = false
"#;
    let cfg = BenchConfig::from_toml(text).unwrap();
    assert_eq!(cfg.seeds(), (3..10).collect::<Vec<_>>());
    let sweep = cfg.sweep().unwrap();
    assert_eq!(sweep.config_for(Method::IqTv).learning_rate, Some(0.5));
    assert_eq!(sweep.config_for(Method::Bc).learning_rate, None);
    let back = BenchConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn config_errors() {
    assert!(BenchConfig::from_toml("methods = []").is_err());
    assert!(BenchConfig::from_toml("methods = [\"nope\"]").is_err());
    assert!(BenchConfig::from_toml("horizons = [0]").is_err());
    assert!(BenchConfig::from_toml("bogus = 1").is_err());
    assert!(BenchConfig::from_toml("[solver]\nalpha = -1.0").is_err());
    let d5 = BenchConfig { instance: InstanceConfig::D5, ..BenchConfig::default() };
    assert!(d5.sweep().is_err());
    assert!(d5.suite_options().unwrap().instance.is_some());
}

#[test]
fn default_config_is_the_horizon_sweep() {
    let cfg = BenchConfig::default();
    assert_eq!(cfg.horizons, vec![10, 20, 40, 80]);
    assert_eq!(cfg.seeds().len(), 100);
    assert_eq!(cfg.instance, InstanceConfig::ResetCliff { S: 4, A: 5, N: 2 });
}
