//! C interface to `dual-align`.
//!
//! Point sets and run results are opaque handles owned by the caller and
//! released with their `*_free` function. Every fallible call returns a
//! [`DaStatus`]; on failure [`da_last_error_message`] describes the problem.
//! Coordinates are row-major `count x dim` arrays of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dual_align::diagnostics::RunStatus;
use dual_align::kernels::{build_gram, kernel_eval, KernelSpec};
use dual_align::matchers::MatcherParams;
use dual_align::objectives::{
    dual_distance, mmd_distance, primal_distance, BoundaryMode, DualState, MmdNormalization, PrimalDiscriminator,
};
use dual_align::optimizers::{
    run_dual_alignment, run_mmd_alignment, run_primal_alignment, saddle_step, DualSettings, OptimizerConfig,
    PrimalObjective, PrimalSettings, RunOutcome, SaddleState,
};
use dual_align::pointset::{generate, make_labeled_union, Domain, GeneratorSpec, PointSet};
use dual_align::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    InvalidSpec = 3,
    InvalidParams = 4,
    InsufficientData = 5,
    UnsupportedKernel = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaKernelKind {
    Linear = 0,
    Gaussian = 1,
}

/// Kernel description; `bandwidth` is read only for the Gaussian kernel.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DaKernel {
    pub kind: DaKernelKind,
    pub bandwidth: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaObjective {
    Primal = 0,
    Wgan = 1,
    /// Dual objective; uses the kernel given in [`DaRunOptions`].
    Dual = 2,
    /// MMD descent; uses the kernel given in [`DaRunOptions`].
    Mmd = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaMatcher {
    Affine = 0,
    FreePoints = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaRunStatus {
    Converged = 0,
    Oscillating = 1,
    Diverged = 2,
    MaxIters = 3,
}

/// Settings for [`da_run_alignment`]. Start from [`da_run_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DaRunOptions {
    pub objective: DaObjective,
    pub kernel: DaKernel,
    pub matcher: DaMatcher,
    pub lr_theta: f64,
    /// Step size of the adversary: `α` for the dual, the discriminator otherwise.
    pub lr_adversary: f64,
    /// Regularization of the discriminator (dual and primal objectives).
    pub lambda: f64,
    /// Balance penalty of the dual objective.
    pub lambda1: f64,
    pub iterations: usize,
    pub trace_every: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DaTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub disc_accuracy: f64,
    pub mean_gap: f64,
    pub cov_gap: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DaSaddleState {
    pub x: f64,
    pub y: f64,
    pub step: f64,
}

/// Opaque point set.
pub struct DaPointSet(PointSet);

/// Opaque result of an alignment run.
pub struct DaRun(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DaStatus {
    match e {
        Error::Dimension { .. } => DaStatus::Dimension,
        Error::InvalidSpec(_) => DaStatus::InvalidSpec,
        Error::InvalidParams(_) => DaStatus::InvalidParams,
        Error::InsufficientData(_) => DaStatus::InsufficientData,
        Error::UnsupportedKernel => DaStatus::UnsupportedKernel,
        Error::Config(_) => DaStatus::Config,
        Error::Io(_) | Error::Csv(_) => DaStatus::Io,
    }
}

struct Fail(DaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DaStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            DaStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn kernel_spec(k: &DaKernel) -> Result<KernelSpec, Fail> {
    match k.kind {
        DaKernelKind::Linear => Ok(KernelSpec::Linear),
        DaKernelKind::Gaussian => Ok(KernelSpec::gaussian(k.bandwidth)?),
    }
}

fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn boxed<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    put(out, Box::into_raw(Box::new(value)), "output handle pointer")
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn da_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `count * dim` coordinates into a new point set.
///
/// # Safety
/// `coords` must point to `count * dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_pointset_new(
    coords: *const f64,
    count: usize,
    dim: usize,
    out: *mut *mut DaPointSet,
) -> DaStatus {
    guard(|| {
        let n = count.checked_mul(dim).ok_or_else(|| Fail(DaStatus::Dimension, "count * dim overflows".into()))?;
        let c = slice(coords, n, "coords")?;
        boxed(out, DaPointSet(PointSet::from_flat(c.to_vec(), dim, Domain::SourceA)?))
    })
}

/// Draws `count` points from a Gaussian with the given mean (`dim` values) and
/// covariance (`dim * dim`, row-major).
///
/// # Safety
/// `mean` and `covariance` must hold `dim` and `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_pointset_gaussian(
    mean: *const f64,
    covariance: *const f64,
    dim: usize,
    count: usize,
    seed: u64,
    out: *mut *mut DaPointSet,
) -> DaStatus {
    guard(|| {
        let m = slice(mean, dim, "mean")?.to_vec();
        let c = slice(covariance, dim * dim, "covariance")?;
        let cov = c.chunks(dim.max(1)).map(|r| r.to_vec()).collect();
        boxed(out, DaPointSet(generate(&GeneratorSpec::gaussian_blob(m, cov, count, seed))?))
    })
}

/// # Safety
/// `set` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn da_pointset_free(set: *mut DaPointSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn da_pointset_len(set: *const DaPointSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Dimension; 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn da_pointset_dim(set: *const DaPointSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the coordinates into `out`, which must hold `capacity >= len * dim` doubles.
///
/// # Safety
/// `set` must be a live handle; `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn da_pointset_coords(set: *const DaPointSet, out: *mut f64, capacity: usize) -> DaStatus {
    guard(|| {
        let s = handle(set, "set")?;
        let flat = s.0.as_flat();
        if capacity < flat.len() {
            return Err(Fail(DaStatus::Dimension, format!("buffer holds {capacity} values, need {}", flat.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), out, flat.len());
        Ok(())
    })
}

/// `k(x, y)` for two `dim`-vectors.
///
/// # Safety
/// `x` and `y` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_kernel_eval(
    kernel: DaKernel,
    x: *const f64,
    y: *const f64,
    dim: usize,
    out: *mut f64,
) -> DaStatus {
    guard(|| {
        let v = kernel_eval(&kernel_spec(&kernel)?, slice(x, dim, "x")?, slice(y, dim, "y")?)?;
        put(out, v, "out")
    })
}

/// Standard (biased) MMD estimate between two point sets.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_mmd_distance(
    kernel: DaKernel,
    a: *const DaPointSet,
    b: *const DaPointSet,
    out: *mut f64,
) -> DaStatus {
    guard(|| {
        let v = mmd_distance(&kernel_spec(&kernel)?, &handle(a, "a")?.0, &handle(b, "b")?.0, MmdNormalization::Standard)?;
        put(out, v, "out")
    })
}

/// Dual objective at the weights `alpha` (`len(a) + len(b)` values, source
/// first), with balance penalty `lambda1` and projected box handling.
///
/// # Safety
/// `a` and `b` must be live handles; `alpha` must hold `alpha_len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_dual_distance(
    kernel: DaKernel,
    a: *const DaPointSet,
    b: *const DaPointSet,
    alpha: *const f64,
    alpha_len: usize,
    lambda: f64,
    lambda1: f64,
    out: *mut f64,
) -> DaStatus {
    guard(|| {
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(Fail(DaStatus::Config, format!("lambda must be positive, got {lambda}")));
        }
        let c = make_labeled_union(&handle(a, "a")?.0, &handle(b, "b")?.0)?;
        let al = slice(alpha, alpha_len, "alpha")?;
        if al.len() != c.len() {
            return Err(Error::Dimension { expected: c.len(), actual: al.len() }.into());
        }
        let state = DualState::uniform(c.len(), lambda).with_alpha(al.to_vec()).with_penalties(lambda1, 0.0);
        debug_assert_eq!(state.boundary, BoundaryMode::Project);
        let v = dual_distance(&state, &build_gram(&kernel_spec(&kernel)?, &c))?;
        put(out, v, "out")
    })
}

/// Regularized logistic log-likelihood of `wᵀx + bias` on the labelled union
/// (source `+1`, target `-1`).
///
/// # Safety
/// `a` and `b` must be live handles; `w` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_primal_distance(
    a: *const DaPointSet,
    b: *const DaPointSet,
    w: *const f64,
    dim: usize,
    bias: f64,
    lambda: f64,
    out: *mut f64,
) -> DaStatus {
    guard(|| {
        let c = make_labeled_union(&handle(a, "a")?.0, &handle(b, "b")?.0)?;
        let disc = PrimalDiscriminator { w: slice(w, dim, "w")?.to_vec(), b: bias, lambda };
        put(out, primal_distance(&disc, &c)?, "out")
    })
}

/// One simultaneous gradient step on `min_x max_y xy`, in place.
///
/// # Safety
/// `state` must point to a writable [`DaSaddleState`].
#[no_mangle]
pub unsafe extern "C" fn da_saddle_step(state: *mut DaSaddleState) -> DaStatus {
    guard(|| {
        let s = state.as_mut().ok_or_else(|| null("state"))?;
        let next = saddle_step(SaddleState { x: s.x, y: s.y, step: s.step });
        *s = DaSaddleState { x: next.x, y: next.y, step: next.step };
        Ok(())
    })
}

/// Default run settings: dual objective, linear kernel, affine matcher,
/// rates 0.002, `lambda = 10`, `lambda1 = 1`, 5000 iterations, a row every 10.
#[no_mangle]
pub extern "C" fn da_run_options_default() -> DaRunOptions {
    let opt = OptimizerConfig::default();
    let dual = DualSettings::default();
    DaRunOptions {
        objective: DaObjective::Dual,
        kernel: DaKernel { kind: DaKernelKind::Linear, bandwidth: 1.0 },
        matcher: DaMatcher::Affine,
        lr_theta: opt.lr_theta,
        lr_adversary: opt.lr_alpha,
        lambda: dual.lambda,
        lambda1: dual.lambda1,
        iterations: opt.iterations,
        trace_every: opt.trace_every,
        seed: opt.seed,
    }
}

fn run(a: &PointSet, b: &PointSet, o: &DaRunOptions) -> Result<RunOutcome, Fail> {
    let b = b.clone().with_tag(Domain::TargetB);
    let matcher = match o.matcher {
        DaMatcher::Affine => MatcherParams::affine_identity(b.dim()),
        DaMatcher::FreePoints => MatcherParams::free_points(b.len(), b.dim()),
    };
    let cfg = OptimizerConfig {
        lr_theta: o.lr_theta,
        lr_alpha: o.lr_adversary,
        lr_disc: o.lr_adversary,
        iterations: o.iterations,
        trace_every: o.trace_every,
        seed: o.seed,
        ..Default::default()
    };
    let kernel = kernel_spec(&o.kernel)?;
    let primal = |objective| PrimalSettings { objective, lambda: o.lambda, ..Default::default() };
    Ok(match o.objective {
        DaObjective::Primal => run_primal_alignment(a, &b, &matcher, &cfg, &primal(PrimalObjective::Logistic))?,
        DaObjective::Wgan => run_primal_alignment(a, &b, &matcher, &cfg, &primal(PrimalObjective::WganGp))?,
        DaObjective::Dual => {
            let settings = DualSettings { lambda: o.lambda, lambda1: o.lambda1, ..Default::default() };
            run_dual_alignment(a, &b, &matcher, &kernel, &cfg, &settings)?
        }
        DaObjective::Mmd => run_mmd_alignment(a, &b, &matcher, &kernel, &cfg)?,
    })
}

/// Aligns `b` to `a`. A diverged run is still a successful call; check
/// [`da_run_status`].
///
/// # Safety
/// `a` and `b` must be live handles; `options` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_run_alignment(
    a: *const DaPointSet,
    b: *const DaPointSet,
    options: *const DaRunOptions,
    out: *mut *mut DaRun,
) -> DaStatus {
    guard(|| {
        let r = run(&handle(a, "a")?.0, &handle(b, "b")?.0, handle(options, "options")?)?;
        boxed(out, DaRun(r))
    })
}

/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn da_run_free(run: *mut DaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Final status; `DA_RUN_STATUS_DIVERGED` for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn da_run_status(run: *const DaRun) -> DaRunStatus {
    match run.as_ref().map(|r| r.0.status()) {
        Some(RunStatus::Converged) => DaRunStatus::Converged,
        Some(RunStatus::Oscillating) => DaRunStatus::Oscillating,
        Some(RunStatus::MaxIters) => DaRunStatus::MaxIters,
        Some(RunStatus::Diverged) | None => DaRunStatus::Diverged,
    }
}

/// Number of trace rows; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn da_run_trace_len(run: *const DaRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.trace.len())
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn da_run_trace_row(run: *const DaRun, index: usize, out: *mut DaTraceRow) -> DaStatus {
    guard(|| {
        let t = &handle(run, "run")?.0.trace;
        if index >= t.len() {
            return Err(Fail(DaStatus::Dimension, format!("row {index} out of range for {} rows", t.len())));
        }
        let r = t.row(index);
        put(
            out,
            DaTraceRow {
                iteration: r.iteration,
                objective: r.objective,
                disc_accuracy: r.disc_accuracy,
                mean_gap: r.mean_gap,
                cov_gap: r.cov_gap,
            },
            "out",
        )
    })
}

/// Number of matcher parameters; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn da_run_matcher_len(run: *const DaRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.matcher.num_params())
}

/// Copies the final matcher parameters (affine: matrix row-major then
/// translation; free points: offsets row-major).
///
/// # Safety
/// `run` must be a live handle; `out` must hold `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn da_run_matcher(run: *const DaRun, out: *mut f64, capacity: usize) -> DaStatus {
    guard(|| {
        let flat = handle(run, "run")?.0.matcher.to_flat();
        if capacity < flat.len() {
            return Err(Fail(DaStatus::Dimension, format!("buffer holds {capacity} values, need {}", flat.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), out, flat.len());
        Ok(())
    })
}

/// Writes the trace as CSV (`iter,objective,disc_acc,mean_gap,cov_gap`).
///
/// # Safety
/// `run` must be a live handle; `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn da_run_write_trace_csv(run: *const DaRun, path: *const c_char) -> DaStatus {
    guard(|| {
        let r = handle(run, "run")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path).to_str().map_err(|_| Fail(DaStatus::Io, "path is not UTF-8".into()))?;
        let f = File::create(p).map_err(Error::from)?;
        r.0.trace.write_csv(BufWriter::new(f))?;
        Ok(())
    })
}
