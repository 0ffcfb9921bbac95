use std::path::Path;
use std::process::{Command, Output};

fn ildm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ildm")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = ildm(&["gen", "reset-cliff", "--S", "4", "--A", "3", "--H", "5", "--N", "2", "--out", "inst"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["mdp.json", "expert.json", "demo.json", "instance.json"] {
        assert!(d.join("inst").join(f).exists(), "missing {f}");
    }
    let o = ildm(
        &[
            "solve",
            "dual_qdm_exact",
            "--mdp",
            "inst/mdp.json",
            "--demo",
            "inst/demo.json",
            "--expert",
            "inst/expert.json",
            "--alpha",
            "0.05",
            "--out",
            "res.json",
            "--trace",
            "trace.csv",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("method=dual_qdm_exact"));
    assert!(stdout(&o).contains("gap="));
    let res: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("res.json")).unwrap()).unwrap();
    assert_eq!(res["method"], "dual_qdm_exact");
    assert!(std::fs::read_to_string(d.join("trace.csv")).unwrap().starts_with("iter,objective,grad_norm"));
}

#[test]
fn gen_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        let o = ildm(&["gen", "random", "--layers", "3,2,3", "--A", "2", "--N", "2", "--seed", "9", "--out", out], d);
        assert!(o.status.success());
    }
    for f in ["mdp.json", "expert.json", "demo.json"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap());
    }
}

#[test]
fn bench_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["bench", "--methods", "bc,ail", "--horizons", "3,6", "--seeds", "5", "--no-timing", "--out", out]
    };
    assert!(ildm(&args("a.csv"), d).status.success());
    assert!(ildm(&args("b.csv"), d).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_ildm"))
        .args(args("c.csv"))
        .current_dir(d)
        .env("ILDM_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let a = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.csv")).unwrap());
    assert_eq!(a, std::fs::read(d.join("c.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 2 * 5);
}

#[test]
fn verify_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = ildm(&["verify", "gradcheck", "--instances", "2", "--out", "rep.json"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("gradcheck  PASS"));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);

    assert!(ildm(&["gen", "d5", "--out", "d5"], d).status.success());
    let o =
        ildm(&["verify", "prop1", "--mdp", "d5/mdp.json", "--demo", "d5/demo.json", "--expert", "d5/expert.json"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    // Uniform first-layer transitions break the TD property, so the check refuses.
    let path = d.join("d5/mdp.json");
    let mut mdp: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    mdp["transitions"] = serde_json::json!([[[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]]);
    std::fs::create_dir(d.join("flat")).unwrap();
    std::fs::write(d.join("flat/mdp.json"), mdp.to_string()).unwrap();
    let demo = std::fs::read_to_string(d.join("d5/demo.json")).unwrap();
    let hash = ildm::mdp::LayeredMdp::load(d.join("flat/mdp.json")).unwrap().hash();
    let mut demo: serde_json::Value = serde_json::from_str(&demo).unwrap();
    demo["mdp_hash"] = hash.into();
    std::fs::write(d.join("flat/demo.json"), demo.to_string()).unwrap();
    let o = ildm(
        &["verify", "prop1", "--mdp", "flat/mdp.json", "--demo", "flat/demo.json", "--expert", "d5/expert.json"],
        d,
    );
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("precondition"));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(ildm(&["solve", "bc", "--mdp", "missing.json", "--demo", "x.json"], d).status.code(), Some(2));
    assert_eq!(ildm(&["solve", "nope", "--mdp", "a", "--demo", "b"], d).status.code(), Some(2));
    assert_eq!(ildm(&["verify", "thm9"], d).status.code(), Some(2));
    assert_eq!(ildm(&["bogus"], d).status.code(), Some(2));
    std::fs::write(d.join("bad.toml"), "methods = [\"nope\"]").unwrap();
    assert_eq!(ildm(&["bench", "--config", "bad.toml"], d).status.code(), Some(2));
    std::fs::write(d.join("mdp.json"), "{\"horizon\": 1}").unwrap();
    assert_eq!(ildm(&["solve", "bc", "--mdp", "mdp.json", "--demo", "x.json"], d).status.code(), Some(2));
    assert_eq!(ildm(&["gen", "reset-cliff", "--S", "2", "--A", "2", "--H", "2", "--N", "1"], d).status.code(), Some(2));
}
