//! C ABI over `ildm`.
//!
//! Objects cross the boundary as opaque heap handles released by the matching
//! `*_free` function. Fallible calls return an [`IldmStatus`] and write their
//! result through an out-pointer; after a failure,
//! [`ildm_last_error_message`] describes it until the next failing call on the
//! same thread. Strings returned by the library are freed with
//! [`ildm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ildm::demos::{collect_demos, DemoDataset, DemoFile};
use ildm::instances::{reset_cliff, ResetCliffSpec};
use ildm::mdp::{policy_return, LayeredMdp};
use ildm::solvers::{solve, Method, SolveResult, SolverConfig};
use ildm::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IldmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Config = 5,
    Solver = 6,
    OutOfRange = 7,
    Io = 8,
    Panic = 9,
}

/// An MDP.
pub struct IldmMdp(LayeredMdp);

/// A demonstration dataset bound to the MDP it was created against.
pub struct IldmDemo(DemoDataset);

/// The output of one learner run.
pub struct IldmSolveResult(SolveResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> IldmStatus {
    match e {
        Error::Validation(_) | Error::Shape(_) | Error::EmptyDataset | Error::NonDeterministicExpert { .. } => {
            IldmStatus::Validation
        }
        Error::Config(_) | Error::Spec(_) => IldmStatus::Config,
        Error::Parse { .. } => IldmStatus::Parse,
        Error::Io { .. } => IldmStatus::Io,
        Error::OutOfRange(_) => IldmStatus::OutOfRange,
        Error::BoxViolation { .. } | Error::Divergence { .. } | Error::Regime(_) | Error::Precondition(_) => {
            IldmStatus::Solver
        }
    }
}

struct Fail(IldmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IldmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IldmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            IldmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(IldmStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(IldmStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(IldmStatus::NullPointer, format!("{name} is null")))
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(IldmStatus::NullPointer, "output pointer is null".into()));
    }
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ildm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ildm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates an MDP from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ildm_mdp_from_json(json: *const c_char, out: *mut *mut IldmMdp) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        let text = str_arg(json, "json")?;
        let mdp = LayeredMdp::from_json(text)?;
        *out = Box::into_raw(Box::new(IldmMdp(mdp)));
        Ok(())
    })
}

/// Loads and validates an MDP from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ildm_mdp_load(path: *const c_char, out: *mut *mut IldmMdp) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        let p = str_arg(path, "path")?;
        *out = Box::into_raw(Box::new(IldmMdp(LayeredMdp::load(p)?)));
        Ok(())
    })
}

/// Builds Reset Cliff and draws `N` expert demonstrations with `seed`.
///
/// # Safety
/// `mdp_out` and `demo_out` must be writable pointers.
#[no_mangle]
#[allow(non_snake_case)]
pub unsafe extern "C" fn ildm_reset_cliff(
    S: usize,
    A: usize,
    H: usize,
    N: usize,
    seed: u64,
    mdp_out: *mut *mut IldmMdp,
    demo_out: *mut *mut IldmDemo,
) -> IldmStatus {
    guard(|| {
        check_out(mdp_out)?;
        check_out(demo_out)?;
        let (mdp, expert) = reset_cliff(&ResetCliffSpec { S, A, H, N })?;
        let demo = collect_demos(&mdp, &expert, N, seed)?;
        *mdp_out = Box::into_raw(Box::new(IldmMdp(mdp)));
        *demo_out = Box::into_raw(Box::new(IldmDemo(demo)));
        Ok(())
    })
}

/// Horizon of `mdp`, or 0 if it is null.
///
/// # Safety
/// `mdp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ildm_mdp_horizon(mdp: *const IldmMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.0.horizon)
}

/// Hex SHA-256 of the MDP's canonical JSON; free with [`ildm_string_free`].
///
/// # Safety
/// `mdp` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ildm_mdp_hash(mdp: *const IldmMdp, out: *mut *mut c_char) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        *out = owned_string(ref_arg(mdp, "mdp")?.0.hash());
        Ok(())
    })
}

/// Releases an MDP handle; null is ignored.
///
/// # Safety
/// `mdp` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ildm_mdp_free(mdp: *mut IldmMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Parses a demo file's JSON and checks it against `mdp`.
///
/// # Safety
/// `mdp` must be a live handle, `json` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ildm_demo_from_json(
    mdp: *const IldmMdp,
    json: *const c_char,
    out: *mut *mut IldmDemo,
) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        let mdp = &ref_arg(mdp, "mdp")?.0;
        let text = str_arg(json, "json")?;
        let file: DemoFile = serde_json::from_str(text).map_err(|e| Fail(IldmStatus::Parse, e.to_string()))?;
        if file.mdp_hash != mdp.hash() {
            return Err(Fail(IldmStatus::Validation, "mdp_hash does not match the supplied mdp".into()));
        }
        let demo = DemoDataset::new(mdp, file.trajectories, file.seed)?;
        *out = Box::into_raw(Box::new(IldmDemo(demo)));
        Ok(())
    })
}

/// Number of trajectories in `demo`, or 0 if it is null.
///
/// # Safety
/// `demo` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ildm_demo_len(demo: *const IldmDemo) -> usize {
    demo.as_ref().map_or(0, |d| d.0.len())
}

/// Releases a demo handle; null is ignored.
///
/// # Safety
/// `demo` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ildm_demo_free(demo: *mut IldmDemo) {
    if !demo.is_null() {
        drop(Box::from_raw(demo));
    }
}

/// Runs `method` (for example `"dual_qdm_exact"`). `config_json` is a solver
/// config object in JSON, or null for defaults.
///
/// # Safety
/// Handles must be live, strings NUL-terminated or null where allowed, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ildm_solve(
    mdp: *const IldmMdp,
    demo: *const IldmDemo,
    method: *const c_char,
    config_json: *const c_char,
    out: *mut *mut IldmSolveResult,
) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        let mdp = &ref_arg(mdp, "mdp")?.0;
        let demo = &ref_arg(demo, "demo")?.0;
        let method: Method = str_arg(method, "method")?.parse()?;
        let cfg = if config_json.is_null() {
            SolverConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?)
                .map_err(|e| Fail(IldmStatus::Config, e.to_string()))?
        };
        if demo.mdp_hash != mdp.hash() {
            return Err(Fail(IldmStatus::Validation, "demo was built for a different mdp".into()));
        }
        let res = solve(method, mdp, demo, &cfg)?;
        *out = Box::into_raw(Box::new(IldmSolveResult(res)));
        Ok(())
    })
}

/// Whether the solver met its stopping criterion; false for null.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ildm_result_converged(res: *const IldmSolveResult) -> bool {
    res.as_ref().is_some_and(|r| r.0.converged)
}

/// Iterations taken; 0 for null.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ildm_result_iters(res: *const IldmSolveResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.iters)
}

/// Final objective value; NaN for null.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ildm_result_objective(res: *const IldmSolveResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.final_objective)
}

/// Probability the learned policy assigns to action `a` at state `s` of layer `h`.
///
/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ildm_result_policy_prob(
    res: *const IldmSolveResult,
    h: usize,
    s: usize,
    a: usize,
    out: *mut f64,
) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        let probs = &ref_arg(res, "result")?.0.policy.probs;
        *out = *probs
            .get(h)
            .and_then(|l| l.get(s))
            .and_then(|r| r.get(a))
            .ok_or_else(|| Fail(IldmStatus::OutOfRange, format!("no entry ({h}, {s}, {a})")))?;
        Ok(())
    })
}

/// Expected true return of the learned policy on `mdp`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ildm_result_return(
    mdp: *const IldmMdp,
    res: *const IldmSolveResult,
    out: *mut f64,
) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        let mdp = &ref_arg(mdp, "mdp")?.0;
        let pi = &ref_arg(res, "result")?.0.policy;
        pi.validate(mdp)?;
        *out = policy_return(mdp, pi);
        Ok(())
    })
}

/// The result as JSON; free with [`ildm_string_free`].
///
/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ildm_result_to_json(res: *const IldmSolveResult, out: *mut *mut c_char) -> IldmStatus {
    guard(|| {
        check_out(out)?;
        *out = owned_string(ref_arg(res, "result")?.0.to_json());
        Ok(())
    })
}

/// Releases a result handle; null is ignored.
///
/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ildm_result_free(res: *mut IldmSolveResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ildm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
