use std::ffi::{c_void, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use tentwave_ffi::*;

const MATCHED: &str = r#"{
  "problem": {
    "regions": [{"kappa1": 2.0, "kappa2": 2.0}, {"kappa1": 1.0, "kappa2": 1.0}],
    "z_left": 1.0,
    "z_right": 1.0,
    "initial": {"kind": "gaussian", "center": 0.3, "alpha": 300.0, "amplitude": [0.5, -0.5]},
    "t_final": 0.2
  },
  "mesh": {
    "kind": "pitched",
    "cells": [{"end": 0.5, "h": 0.01, "region": 0}, {"end": 1.0, "h": 0.02, "region": 1}],
    "slab_height": 0.02,
    "seed": 1
  }
}"#;

const PULSE: &str = r#"{
  "problem": {
    "regions": [{"kappa1": 1.0, "kappa2": 1.0}],
    "z_left": 1.0,
    "z_right": 1.0,
    "initial": {"kind": "left_pulse", "center": 0.5, "alpha": 1000.0},
    "t_final": 0.25
  },
  "mesh": {"kind": "uniform_stencil", "length": 1.0, "h": 0.0125, "k": 0.01125}
}"#;

fn last_error() -> String {
    let p = tw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Run {
    cfg: *mut TwConfig,
    mesh: *mut TwMesh,
    sol: *mut TwSolution,
}

impl Drop for Run {
    fn drop(&mut self) {
        unsafe {
            tw_solution_free(self.sol);
            tw_mesh_free(self.mesh);
            tw_config_free(self.cfg);
        }
    }
}

fn run(json: &str, initial: TwInitialFn, user: *mut c_void) -> Run {
    let text = CString::new(json).unwrap();
    let mut r = Run { cfg: ptr::null_mut(), mesh: ptr::null_mut(), sol: ptr::null_mut() };
    unsafe {
        assert_eq!(tw_config_parse(text.as_ptr(), &mut r.cfg), TwStatus::Ok);
        assert_eq!(tw_mesh_build(r.cfg, &mut r.mesh), TwStatus::Ok);
        assert_eq!(tw_solve(r.cfg, r.mesh, initial, user, &mut r.sol), TwStatus::Ok, "{}", last_error());
    }
    r
}

#[test]
fn full_round_trip() {
    let r = run(PULSE, None, ptr::null_mut());
    unsafe {
        let mut n = 0usize;
        assert_eq!(tw_mesh_tent_count(r.mesh, &mut n), TwStatus::Ok);
        assert!(n > 1000);
        let mut t = 0.0;
        assert_eq!(tw_mesh_covered_time(r.mesh, &mut t), TwStatus::Ok);
        assert!(t >= 0.25);

        let mut err = f64::NAN;
        assert_eq!(tw_solution_l2_error(r.sol, 0.25, &mut err), TwStatus::Ok);
        assert!(err > 0.0 && err < 0.05, "{err}");

        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(tw_solution_evaluate(r.sol, 0.25, 0.25, &mut a, &mut b), TwStatus::Ok);
        assert!((a - 1.0).abs() < 0.1 && (a - b).abs() < 1e-9, "{a} {b}");

        let mut e0 = 0.0;
        let mut e1 = 0.0;
        assert_eq!(tw_solution_energy(r.sol, 0.0, &mut e0), TwStatus::Ok);
        assert_eq!(tw_solution_energy(r.sol, 0.25, &mut e1), TwStatus::Ok);
        assert!((e1 / e0 - 1.0).abs() < 0.05);
    }
}

#[test]
fn snapshot_size_query() {
    let r = run(PULSE, None, ptr::null_mut());
    unsafe {
        let mut len = 0usize;
        let st = tw_solution_snapshot(r.sol, 0.25, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), 0, &mut len);
        assert_eq!(st, TwStatus::BufferTooSmall);
        assert!(len > 10);
        let (mut x, mut u1, mut u2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let st = tw_solution_snapshot(r.sol, 0.25, x.as_mut_ptr(), u1.as_mut_ptr(), u2.as_mut_ptr(), len, &mut len);
        assert_eq!(st, TwStatus::Ok);
        assert_eq!(x.len(), len);
        assert!(x.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(x[0], 0.0);
        assert!((x[len - 1] - 1.0).abs() < 1e-12);
        assert!(u1.iter().chain(&u2).all(|v| v.is_finite()));
    }
}

unsafe extern "C" fn bump(x: f64, u1: *mut f64, u2: *mut f64, user: *mut c_void) {
    *user.cast::<usize>() += 1;
    let g = (-300.0 * (x - 0.3).powi(2)).exp();
    *u1 = 0.5 * g;
    *u2 = -0.5 * g;
}

#[test]
fn callback_replaces_initial_data() {
    let mut calls = 0usize;
    let custom = run(MATCHED, Some(bump), (&mut calls as *mut usize).cast());
    assert!(calls > 0);
    let builtin = run(MATCHED, None, ptr::null_mut());
    unsafe {
        for x in [0.1, 0.35, 0.5, 0.8] {
            let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
            assert_eq!(tw_solution_evaluate(custom.sol, x, 0.2, &mut a, &mut b), TwStatus::Ok);
            assert_eq!(tw_solution_evaluate(builtin.sol, x, 0.2, &mut c, &mut d), TwStatus::Ok);
            assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
        }
        let mut err = 0.0;
        assert_eq!(tw_solution_l2_error(custom.sol, 0.2, &mut err), TwStatus::Config);
        assert!(last_error().contains("exact"));
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(tw_config_parse(ptr::null(), &mut cfg), TwStatus::NullPointer);
        assert!(cfg.is_null());
        assert_eq!(tw_config_parse(c"{}".as_ptr(), ptr::null_mut()), TwStatus::NullPointer);

        assert_eq!(tw_config_parse(c"{ not json".as_ptr(), &mut cfg), TwStatus::Config);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());

        let bad = CString::new(MATCHED.replace("\"slab_height\": 0.02", "\"slab_height\": -1")).unwrap();
        assert_eq!(tw_config_parse(bad.as_ptr(), &mut cfg), TwStatus::Config);
        assert!(last_error().contains("mesh.slab_height"));

        let bytes = [b'{', 0xff, b'}', 0];
        assert_eq!(tw_config_parse(bytes.as_ptr().cast(), &mut cfg), TwStatus::InvalidArgument);

        let mut mesh = ptr::null_mut();
        assert_eq!(tw_mesh_build(ptr::null(), &mut mesh), TwStatus::NullPointer);
        let mut sol = ptr::null_mut();
        assert_eq!(tw_solve(ptr::null(), ptr::null(), None, ptr::null_mut(), &mut sol), TwStatus::NullPointer);
        let mut n = 0usize;
        assert_eq!(tw_mesh_tent_count(ptr::null(), &mut n), TwStatus::NullPointer);

        let (mut r, mut v) = (0.0, TwVerdict::Stable);
        assert_eq!(tw_stability_sweep(f64::NAN, 8, &mut r, &mut v), TwStatus::InvalidArgument);

        tw_config_free(ptr::null_mut());
        tw_mesh_free(ptr::null_mut());
        tw_solution_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(tw_config_parse(ptr::null(), &mut cfg), TwStatus::NullPointer);
        assert!(!tw_last_error().is_null());
        let (mut r, mut v) = (0.0, TwVerdict::Unstable);
        assert_eq!(tw_stability_sweep(0.9, 64, &mut r, &mut v), TwStatus::Ok);
        assert!(tw_last_error().is_null());
    }
}

#[test]
fn out_of_range_queries_are_numerical_errors() {
    let r = run(PULSE, None, ptr::null_mut());
    unsafe {
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(tw_solution_evaluate(r.sol, 0.5, 10.0, &mut a, &mut b), TwStatus::Numerical);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn stability_verdicts() {
    unsafe {
        let (mut r, mut v) = (0.0, TwVerdict::Unstable);
        assert_eq!(tw_stability_sweep(0.9, 128, &mut r, &mut v), TwStatus::Ok);
        assert_eq!(v, TwVerdict::Stable);
        assert!((r - 1.0).abs() < 1e-9);
        assert_eq!(tw_stability_sweep(1.2, 128, &mut r, &mut v), TwStatus::Ok);
        assert_eq!(v, TwVerdict::Unstable);
        assert!(r > 1.0);
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(tw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/tentwave.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["tw_config_parse", "tw_solve", "tw_solution_snapshot", "tw_last_error", "TW_STATUS_BUFFER_TOO_SMALL"] {
        assert!(text.contains(sym), "{sym}");
    }
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("cc not found, skipping compile check");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"tentwave.h\"\n\
         static void init(double x, double *a, double *b, void *u) { (void)u; *a = x; *b = -x; }\n\
         int demo(const char *json) {\n\
           TwConfig *c = NULL; TwMesh *m = NULL; TwSolution *s = NULL; size_t n = 0;\n\
           if (tw_config_parse(json, &c) != TW_STATUS_OK) return 1;\n\
           if (tw_mesh_build(c, &m) != TW_STATUS_OK) return 2;\n\
           TwStatus st = tw_solve(c, m, init, NULL, &s);\n\
           if (st == TW_STATUS_OK) st = tw_solution_snapshot(s, 0.0, NULL, NULL, NULL, 0, &n);\n\
           tw_solution_free(s); tw_mesh_free(m); tw_config_free(c);\n\
           return st == TW_STATUS_BUFFER_TOO_SMALL ? 0 : 3;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
