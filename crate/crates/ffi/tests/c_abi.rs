use std::ffi::{CStr, CString};
use std::ptr;

use ildm::instances::example_d5;
use ildm_ffi::*;

fn last_error() -> String {
    let p = ildm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn d5_handles() -> (*mut IldmMdp, *mut IldmDemo) {
    let (mdp, _, demo) = example_d5();
    let mdp_json = CString::new(mdp.to_json()).unwrap();
    let demo_json = CString::new(demo.to_json()).unwrap();
    let mut m = ptr::null_mut();
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(ildm_mdp_from_json(mdp_json.as_ptr(), &mut m), IldmStatus::Ok);
        assert_eq!(ildm_demo_from_json(m, demo_json.as_ptr(), &mut d), IldmStatus::Ok);
    }
    (m, d)
}

#[test]
fn solve_through_handles_matches_the_library() {
    let (m, d) = d5_handles();
    let method = CString::new("dual_qdm_exact").unwrap();
    let cfg = CString::new(r#"{"alpha": 0.1}"#).unwrap();
    let mut res = ptr::null_mut();
    unsafe {
        assert_eq!(ildm_mdp_horizon(m), 2);
        assert_eq!(ildm_demo_len(d), 1);
        assert_eq!(ildm_solve(m, d, method.as_ptr(), cfg.as_ptr(), &mut res), IldmStatus::Ok);
        assert!(ildm_result_converged(res));

        let (mdp, _, demo) = example_d5();
        let direct = ildm::solvers::dual_qdm_exact(
            &mdp,
            &demo,
            &ildm::solvers::SolverConfig { alpha: 0.1, ..Default::default() },
        )
        .unwrap();
        let mut p = 0.0;
        assert_eq!(ildm_result_policy_prob(res, 1, 1, 0, &mut p), IldmStatus::Ok);
        assert_eq!(p, direct.policy.probs[1][1][0]);
        assert_eq!(ildm_result_iters(res), direct.iters);
        assert_eq!(ildm_result_objective(res), direct.final_objective);

        let mut ret = 0.0;
        assert_eq!(ildm_result_return(m, res, &mut ret), IldmStatus::Ok);
        assert_eq!(ret, ildm::mdp::policy_return(&mdp, &direct.policy));

        let mut json = ptr::null_mut();
        assert_eq!(ildm_result_to_json(res, &mut json), IldmStatus::Ok);
        assert_eq!(CStr::from_ptr(json).to_str().unwrap(), direct.to_json());
        ildm_string_free(json);

        ildm_result_free(res);
        ildm_demo_free(d);
        ildm_mdp_free(m);
    }
}

#[test]
fn error_codes_and_messages() {
    let (m, d) = d5_handles();
    let mut res = ptr::null_mut();
    unsafe {
        let bogus = CString::new("nope").unwrap();
        assert_eq!(ildm_solve(m, d, bogus.as_ptr(), ptr::null(), &mut res), IldmStatus::Config);
        assert!(last_error().contains("nope"));
        assert!(res.is_null());

        assert_eq!(ildm_solve(ptr::null(), d, bogus.as_ptr(), ptr::null(), &mut res), IldmStatus::NullPointer);
        assert!(last_error().contains("mdp"));

        let bad_cfg = CString::new(r#"{"alpha": -1}"#).unwrap();
        let bc = CString::new("bc").unwrap();
        assert_eq!(ildm_solve(m, d, bc.as_ptr(), bad_cfg.as_ptr(), &mut res), IldmStatus::Config);
        assert!(last_error().contains("alpha"));

        let unknown_field = CString::new(r#"{"alhpa": 1}"#).unwrap();
        assert_eq!(ildm_solve(m, d, bc.as_ptr(), unknown_field.as_ptr(), &mut res), IldmStatus::Config);

        assert_eq!(ildm_solve(m, d, bc.as_ptr(), ptr::null(), &mut res), IldmStatus::Ok);
        let mut p = 0.0;
        assert_eq!(ildm_result_policy_prob(res, 5, 0, 0, &mut p), IldmStatus::OutOfRange);
        assert_eq!(ildm_result_policy_prob(res, 0, 0, 0, ptr::null_mut()), IldmStatus::NullPointer);
        ildm_result_free(res);

        let bad_mdp = CString::new(r#"{"horizon": 1}"#).unwrap();
        let mut m2 = ptr::null_mut();
        assert_eq!(ildm_mdp_from_json(bad_mdp.as_ptr(), &mut m2), IldmStatus::Validation);
        assert!(m2.is_null());

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(ildm_mdp_from_json(invalid.as_ptr().cast(), &mut m2), IldmStatus::InvalidUtf8);

        let missing = CString::new("/nonexistent/mdp.json").unwrap();
        assert_eq!(ildm_mdp_load(missing.as_ptr(), &mut m2), IldmStatus::Io);
        assert!(last_error().contains("/nonexistent/mdp.json"));

        ildm_demo_free(d);
        ildm_mdp_free(m);
        ildm_mdp_free(ptr::null_mut());
        ildm_string_free(ptr::null_mut());
    }
}

#[test]
fn demo_for_another_mdp_is_rejected() {
    let (m, d) = d5_handles();
    let mut m2 = ptr::null_mut();
    let mut d2 = ptr::null_mut();
    unsafe {
        assert_eq!(ildm_reset_cliff(4, 5, 3, 2, 7, &mut m2, &mut d2), IldmStatus::Ok);
        assert_eq!(ildm_demo_len(d2), 2);
        let method = CString::new("bc").unwrap();
        let mut res = ptr::null_mut();
        assert_eq!(ildm_solve(m, d2, method.as_ptr(), ptr::null(), &mut res), IldmStatus::Validation);
        assert_eq!(ildm_reset_cliff(2, 5, 3, 2, 7, &mut m2, &mut d2), IldmStatus::Config);

        let mut h1 = ptr::null_mut();
        assert_eq!(ildm_mdp_hash(m, &mut h1), IldmStatus::Ok);
        assert_eq!(CStr::from_ptr(h1).to_str().unwrap(), example_d5().0.hash());
        ildm_string_free(h1);
        ildm_demo_free(d);
        ildm_mdp_free(m);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ildm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/ildm.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
