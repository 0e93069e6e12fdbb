use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use dual_align_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(da_last_error_message()) }.to_string_lossy().into_owned()
}

fn set(coords: &[f64], dim: usize) -> *mut DaPointSet {
    let mut out = ptr::null_mut();
    let st = unsafe { da_pointset_new(coords.as_ptr(), coords.len() / dim, dim, &mut out) };
    assert_eq!(st, DaStatus::Ok, "{}", last_error());
    out
}

fn blob(mean: [f64; 2], seed: u64) -> *mut DaPointSet {
    let cov = [1.0, 0.0, 0.0, 1.0];
    let mut out = ptr::null_mut();
    let st = unsafe { da_pointset_gaussian(mean.as_ptr(), cov.as_ptr(), 2, 40, seed, &mut out) };
    assert_eq!(st, DaStatus::Ok, "{}", last_error());
    out
}

const LINEAR: DaKernel = DaKernel { kind: DaKernelKind::Linear, bandwidth: 0.0 };

#[test]
fn pointset_round_trip() {
    let coords = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let p = set(&coords, 3);
    unsafe {
        assert_eq!(da_pointset_len(p), 2);
        assert_eq!(da_pointset_dim(p), 3);
        let mut back = [0.0; 6];
        assert_eq!(da_pointset_coords(p, back.as_mut_ptr(), 6), DaStatus::Ok);
        assert_eq!(back, coords);
        assert_eq!(da_pointset_coords(p, back.as_mut_ptr(), 5), DaStatus::Dimension);
        da_pointset_free(p);
        da_pointset_free(ptr::null_mut());
        assert_eq!(da_pointset_len(ptr::null()), 0);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(da_pointset_new(ptr::null(), 2, 2, &mut out), DaStatus::NullPointer);
        assert!(last_error().contains("coords"));
        assert!(out.is_null());

        let mut v = 0.0;
        let x = [0.0, 0.0];
        let bad = DaKernel { kind: DaKernelKind::Gaussian, bandwidth: -1.0 };
        assert_eq!(da_kernel_eval(bad, x.as_ptr(), x.as_ptr(), 2, &mut v), DaStatus::InvalidSpec);
        assert!(!last_error().is_empty());

        let a = set(&[0.0, 0.0, 1.0, 1.0], 2);
        let b = set(&[0.0, 0.0, 1.0], 3);
        assert_eq!(da_mmd_distance(LINEAR, a, b, &mut v), DaStatus::Dimension);
        assert_eq!(da_mmd_distance(LINEAR, a, a, &mut v), DaStatus::Ok);
        assert_eq!(last_error(), "");
        assert_eq!(v, 0.0);

        let alpha = [0.5; 3];
        assert_eq!(da_dual_distance(LINEAR, a, a, alpha.as_ptr(), 3, 1.0, 0.0, &mut v), DaStatus::Dimension);
        da_pointset_free(a);
        da_pointset_free(b);
    }
}

#[test]
fn distances_match_hand_computation() {
    unsafe {
        let x = [1.0, 2.0];
        let y = [0.0, 4.0];
        let mut v = 0.0;
        let g = DaKernel { kind: DaKernelKind::Gaussian, bandwidth: 2.0 };
        assert_eq!(da_kernel_eval(g, x.as_ptr(), y.as_ptr(), 2, &mut v), DaStatus::Ok);
        assert!((v - (-5.0f64 / 8.0).exp()).abs() < 1e-15);

        // One point per side: with a linear kernel the MMD is |a - b|^2.
        let a = set(&[1.0, 2.0], 2);
        let b = set(&[0.0, 4.0], 2);
        assert_eq!(da_mmd_distance(LINEAR, a, b, &mut v), DaStatus::Ok);
        assert!((v - 5.0).abs() < 1e-12);

        // alpha = (1/2, 1/2), lambda = 1: |0.5 a - 0.5 b|^2 / 2 + 2 H(1/2).
        let alpha = [0.5, 0.5];
        assert_eq!(da_dual_distance(LINEAR, a, b, alpha.as_ptr(), 2, 1.0, 3.0, &mut v), DaStatus::Ok);
        let expected = 0.25 * 5.0 / 2.0 - 2.0 * std::f64::consts::LN_2;
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");

        // w = 0: every point scores 0, log(1/2) each.
        let w = [0.0, 0.0];
        assert_eq!(da_primal_distance(a, b, w.as_ptr(), 2, 0.0, 1.0, &mut v), DaStatus::Ok);
        assert!((v + 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        da_pointset_free(a);
        da_pointset_free(b);
    }
}

#[test]
fn saddle_radius_grows() {
    let mut s = DaSaddleState { x: 1.0, y: 0.0, step: 0.1 };
    for t in 1..=50 {
        assert_eq!(unsafe { da_saddle_step(&mut s) }, DaStatus::Ok);
        let r2 = s.x * s.x + s.y * s.y;
        assert!((r2 / 1.01f64.powi(t) - 1.0).abs() < 1e-12);
    }
    assert_eq!(unsafe { da_saddle_step(ptr::null_mut()) }, DaStatus::NullPointer);
}

#[test]
fn alignment_run_exposes_trace_and_matcher() {
    let a = blob([-2.0, 0.0], 1);
    let b = blob([2.0, 0.0], 2);
    let mut opts = da_run_options_default();
    opts.iterations = 300;
    opts.lr_theta = 0.0005;
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let path = CString::new(csv.to_str().unwrap()).unwrap();
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(da_run_alignment(a, b, &opts, &mut run), DaStatus::Ok, "{}", last_error());
        let n = da_run_trace_len(run);
        assert_eq!(n, 31);
        let mut first = DaTraceRow::default();
        let mut last = DaTraceRow::default();
        assert_eq!(da_run_trace_row(run, 0, &mut first), DaStatus::Ok);
        assert_eq!(da_run_trace_row(run, n - 1, &mut last), DaStatus::Ok);
        assert_eq!(da_run_trace_row(run, n, &mut last), DaStatus::Dimension);
        assert_eq!(last.iteration, 300);
        assert!(last.mean_gap < first.mean_gap);

        assert_eq!(da_run_matcher_len(run), 6);
        let mut theta = [0.0; 6];
        assert_eq!(da_run_matcher(run, theta.as_mut_ptr(), 6), DaStatus::Ok);
        assert!(theta[4] < 0.0, "translation moves B toward A: {theta:?}");

        assert_eq!(da_run_write_trace_csv(run, path.as_ptr()), DaStatus::Ok);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("iter,objective,disc_acc,mean_gap,cov_gap\n"));
        assert_eq!(text.lines().count(), 32);
        da_run_free(run);

        opts.objective = DaObjective::Wgan;
        opts.lr_theta = 1e6;
        opts.lr_adversary = 1e6;
        let mut run = ptr::null_mut();
        assert_eq!(da_run_alignment(a, b, &opts, &mut run), DaStatus::Ok);
        assert_eq!(da_run_status(run), DaRunStatus::Diverged);
        da_run_free(run);

        opts.iterations = 0;
        let mut run = ptr::null_mut();
        assert_eq!(da_run_alignment(a, b, &opts, &mut run), DaStatus::Config);
        assert!(last_error().contains("iterations"));
        da_pointset_free(a);
        da_pointset_free(b);
    }
}

#[test]
fn header_declares_every_export() {
    let header_path = concat!(env!("CARGO_MANIFEST_DIR"), "/include/dual_align.h");
    let header = std::fs::read_to_string(header_path).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    // The header must be valid C when a compiler is available.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header_path]).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
