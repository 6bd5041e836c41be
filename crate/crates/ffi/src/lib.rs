//! C ABI for the tentwave solver.
//!
//! All handles are opaque and owned by the caller, who releases them with the
//! matching `tw_*_free`. Every fallible call returns a [`TwStatus`]; on failure
//! a message is stored per thread and can be read with [`tw_last_error`].
//! Panics never cross the boundary and are reported as [`TwStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use tentwave::config::RunConfig;
use tentwave::marcher::{march, InitialData, Solution, SpaceTimeField};
use tentwave::stability::{spectral_sweep, Verdict};
use tentwave::tent_pitcher::TentMesh;
use tentwave::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwVerdict {
    Stable = 0,
    Marginal = 1,
    Unstable = 2,
}

/// Parsed and validated run configuration.
pub struct TwConfig {
    config: RunConfig,
}

/// Space-time tent mesh.
pub struct TwMesh {
    mesh: TentMesh,
}

/// Marched solution.
pub struct TwSolution {
    solution: Solution,
    exact: Option<SpaceTimeField>,
}

/// Initial data callback: writes `(u1, u2)` at `x`. Called synchronously
/// from the thread running [`tw_solve`], never after it returns.
pub type TwInitialFn = Option<unsafe extern "C" fn(x: f64, u1: *mut f64, u2: *mut f64, user_data: *mut c_void)>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> TwStatus {
    if e.is_config_error() {
        TwStatus::Config
    } else {
        TwStatus::Numerical
    }
}

fn guard(f: impl FnOnce() -> Result<(), TwStatus>) -> TwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TwStatus::Panic
        }
    }
}

fn fail(e: Error) -> TwStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> TwStatus {
    set_error(format!("{what} is null"));
    TwStatus::NullPointer
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, TwStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next `tw_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a JSON run configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_config_parse(json: *const c_char, out: *mut *mut TwConfig) -> TwStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(format!("config is not UTF-8: {e}"));
            TwStatus::InvalidArgument
        })?;
        let config = RunConfig::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(TwConfig { config }));
        Ok(())
    })
}

/// # Safety
/// `config` must come from [`tw_config_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn tw_config_free(config: *mut TwConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Pitch the space-time mesh described by `config`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_mesh_build(config: *const TwConfig, out: *mut *mut TwMesh) -> TwStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let mesh = cfg.config.tent_mesh().map_err(fail)?;
        *out = Box::into_raw(Box::new(TwMesh { mesh }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from [`tw_mesh_build`] or be null.
#[no_mangle]
pub unsafe extern "C" fn tw_mesh_free(mesh: *mut TwMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle and `n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_mesh_tent_count(mesh: *const TwMesh, n: *mut usize) -> TwStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        *out_ptr(n, "n")? = m.mesh.n_tents();
        Ok(())
    })
}

/// # Safety
/// `mesh` must be a live handle and `t` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_mesh_covered_time(mesh: *const TwMesh, t: *mut f64) -> TwStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        *out_ptr(t, "t")? = m.mesh.covered_time();
        Ok(())
    })
}

struct Callback {
    f: unsafe extern "C" fn(f64, *mut f64, *mut f64, *mut c_void),
    user: *mut c_void,
}

// The callback only ever runs on the thread that called `tw_solve`.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

/// March `mesh` with the problem of `config`. When `initial` is non-null it
/// replaces the configured initial data; the exact solution, if any, is then
/// dropped.
///
/// # Safety
/// Handles must be live, `out` valid, and `initial` (if set) safe to call with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn tw_solve(
    config: *const TwConfig,
    mesh: *const TwMesh,
    initial: TwInitialFn,
    user_data: *mut c_void,
    out: *mut *mut TwSolution,
) -> TwStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let mut problem = cfg.config.problem().map_err(fail)?;
        if let Some(f) = initial {
            let cb = Arc::new(Callback { f, user: user_data });
            let data: InitialData = Arc::new(move |x| {
                let (mut a, mut b) = (0.0, 0.0);
                unsafe { (cb.f)(x, &mut a, &mut b, cb.user) };
                [a, b]
            });
            problem.initial = data;
            problem.exact = None;
        }
        let solution = march(&m.mesh, &problem, &cfg.config.march_options()).map_err(fail)?;
        *out = Box::into_raw(Box::new(TwSolution { solution, exact: problem.exact.clone() }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from [`tw_solve`] or be null.
#[no_mangle]
pub unsafe extern "C" fn tw_solution_free(solution: *mut TwSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be live; `u1`, `u2` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tw_solution_evaluate(
    solution: *const TwSolution,
    x: f64,
    t: f64,
    u1: *mut f64,
    u2: *mut f64,
) -> TwStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let (u1, u2) = (out_ptr(u1, "u1")?, out_ptr(u2, "u2")?);
        let v = s.solution.evaluate(x, t).map_err(fail)?;
        *u1 = v[0];
        *u2 = v[1];
        Ok(())
    })
}

/// Copy the trace on level `t` into caller buffers of length `capacity`.
/// `len` receives the number of breakpoints; if it exceeds `capacity` the
/// call returns [`TwStatus::BufferTooSmall`] without writing, so passing
/// `capacity = 0` queries the size.
///
/// # Safety
/// `solution` must be live, `len` valid, and each buffer hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_solution_snapshot(
    solution: *const TwSolution,
    t: f64,
    x: *mut f64,
    u1: *mut f64,
    u2: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> TwStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let len = out_ptr(len, "len")?;
        let tr = s.solution.snapshot(t).map_err(fail)?;
        *len = tr.x.len();
        if tr.x.len() > capacity {
            set_error(format!("snapshot has {} points, buffer holds {capacity}", tr.x.len()));
            return Err(TwStatus::BufferTooSmall);
        }
        if x.is_null() || u1.is_null() || u2.is_null() {
            return Err(null("snapshot buffer"));
        }
        for (i, (xi, u)) in tr.x.iter().zip(&tr.u).enumerate() {
            *x.add(i) = *xi;
            *u1.add(i) = u[0];
            *u2.add(i) = u[1];
        }
        Ok(())
    })
}

/// `½ ∫ (k1 u1² + k2 u2²) dx` at time `t`.
///
/// # Safety
/// `solution` must be live and `energy` valid.
#[no_mangle]
pub unsafe extern "C" fn tw_solution_energy(solution: *const TwSolution, t: f64, energy: *mut f64) -> TwStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        *out_ptr(energy, "energy")? = s.solution.energy(t).map_err(fail)?;
        Ok(())
    })
}

/// `L²` error against the configured exact solution; [`TwStatus::Config`]
/// when the problem has none.
///
/// # Safety
/// `solution` must be live and `error` valid.
#[no_mangle]
pub unsafe extern "C" fn tw_solution_l2_error(solution: *const TwSolution, t: f64, error: *mut f64) -> TwStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let out = out_ptr(error, "error")?;
        let exact = s.exact.as_deref().ok_or_else(|| {
            set_error("the configured problem has no exact solution");
            TwStatus::Config
        })?;
        *out = s.solution.l2_error(t, exact).map_err(fail)?;
        Ok(())
    })
}

/// Von Neumann sweep of the uniform stencil at Courant number `ac`.
///
/// # Safety
/// `max_radius` and `verdict` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tw_stability_sweep(
    ac: f64,
    n_theta: usize,
    max_radius: *mut f64,
    verdict: *mut TwVerdict,
) -> TwStatus {
    guard(|| {
        let (r, v) = (out_ptr(max_radius, "max_radius")?, out_ptr(verdict, "verdict")?);
        if !ac.is_finite() {
            set_error("ac must be finite");
            return Err(TwStatus::InvalidArgument);
        }
        let rep = spectral_sweep(ac, 1.0, n_theta);
        *r = rep.max_spectral_radius;
        *v = match rep.verdict {
            Verdict::Stable => TwVerdict::Stable,
            Verdict::Marginal => TwVerdict::Marginal,
            Verdict::Unstable => TwVerdict::Unstable,
        };
        Ok(())
    })
}
