//! Joint projected descent on the dual weights and the matcher.

use serde::{Deserialize, Serialize};

use super::{check_inputs, Batcher, OptimizerConfig, Recorder, RunOutcome, ThetaStepper, UpdateMode};
use crate::diagnostics::dual_accuracy;
use crate::error::{Error, Result};
use crate::kernels::{build_gram, GramBlocks, KernelSpec};
use crate::matchers::{apply, backprop_indexed, MatcherParams};
use crate::objectives::dual::{dual_point_grads, project_balanced};
use crate::objectives::{dual_distance, dual_grad_alpha, BoundaryMode, DualState};
use crate::pointset::{make_labeled_union, LabeledUnion, PointSet};

/// How `Σα_A = Σα_B` is maintained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// `λ₁ |Σα_A - Σα_B|` in the objective; holds only approximately.
    #[default]
    Penalty,
    /// Exact Euclidean projection onto the balanced box after every α step.
    ExactProjection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualSettings {
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub clamp_eps: f64,
    pub boundary: BoundaryMode,
    pub balance: BalanceMode,
    /// Every weight starts here.
    pub alpha_init: f64,
}

impl Default for DualSettings {
    fn default() -> Self {
        DualSettings {
            lambda: 10.0,
            lambda1: 1.0,
            lambda2: 1.0,
            clamp_eps: DualState::DEFAULT_EPS,
            boundary: BoundaryMode::Project,
            balance: BalanceMode::Penalty,
            alpha_init: 0.5,
        }
    }
}

impl DualSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Config("lambda1 and lambda2 must be nonnegative".into()));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::Config(format!("clamp_eps must lie in (0, 0.5), got {}", self.clamp_eps)));
        }
        if !(self.alpha_init >= 0.0 && self.alpha_init <= 1.0) {
            return Err(Error::Config(format!("alpha_init must lie in [0, 1], got {}", self.alpha_init)));
        }
        Ok(())
    }

    fn initial_state(&self, n: usize, a_count: usize) -> DualState {
        let mut s = DualState {
            alpha: vec![self.alpha_init; n],
            lambda: self.lambda,
            penalty_balance: match self.balance {
                BalanceMode::Penalty => self.lambda1,
                BalanceMode::ExactProjection => 0.0,
            },
            penalty_positivity: self.lambda2,
            clamp_eps: self.clamp_eps,
            boundary: self.boundary,
        };
        self.project(&mut s, a_count);
        s
    }

    fn project(&self, s: &mut DualState, a_count: usize) {
        match (self.balance, self.boundary) {
            (BalanceMode::ExactProjection, _) => project_balanced(s, a_count),
            (BalanceMode::Penalty, BoundaryMode::Project) => s.project_box(),
            (BalanceMode::Penalty, BoundaryMode::Penalty) => {}
        }
    }
}

/// Objective, union and Gram blocks at the current matcher.
struct Snapshot {
    b_prime: PointSet,
    union: LabeledUnion,
    gram: GramBlocks,
}

impl Snapshot {
    fn at(a: &PointSet, b: &PointSet, theta: &MatcherParams, kernel: &KernelSpec) -> Result<Self> {
        let b_prime = apply(theta, b)?;
        let union = make_labeled_union(a, &b_prime)?;
        let gram = build_gram(kernel, &union);
        Ok(Snapshot { b_prime, union, gram })
    }
}

fn sub_state(state: &DualState, ia: &[usize], ib: &[usize], na: usize) -> DualState {
    let alpha = ia.iter().map(|&i| state.alpha[i]).chain(ib.iter().map(|&j| state.alpha[na + j])).collect();
    DualState { alpha, ..state.clone() }
}

fn write_back(state: &mut DualState, sub: &DualState, ia: &[usize], ib: &[usize], na: usize) {
    for (k, &i) in ia.iter().enumerate() {
        state.alpha[i] = sub.alpha[k];
    }
    for (k, &j) in ib.iter().enumerate() {
        state.alpha[na + j] = sub.alpha[ia.len() + k];
    }
}

/// One outer iteration: `k` α steps (k = 1 when simultaneous) and one matcher
/// step, on the batch `(ia, ib)`. In simultaneous mode both gradients are taken
/// at the same point.
#[allow(clippy::too_many_arguments)]
fn outer_step(
    a: &PointSet,
    b: &PointSet,
    kernel: &KernelSpec,
    cfg: &OptimizerConfig,
    settings: &DualSettings,
    state: &mut DualState,
    theta: &mut MatcherParams,
    stepper: &mut ThetaStepper,
    ia: &[usize],
    ib: &[usize],
    full: Option<&Snapshot>,
    update_theta: bool,
) -> Result<()> {
    let na = a.len();
    let owned;
    let (union, gram) = match full {
        Some(s) => (&s.union, &s.gram),
        None => {
            let b_prime = apply(theta, b)?.subset(ib);
            let u = make_labeled_union(&a.subset(ia), &b_prime)?;
            let g = build_gram(kernel, &u);
            owned = (u, g);
            (&owned.0, &owned.1)
        }
    };
    let mut sub = if full.is_some() { state.clone() } else { sub_state(state, ia, ib, na) };
    let sub_na = union.a_count();
    let steps = if update_theta { cfg.disc_steps() } else { 1 };
    let simultaneous = cfg.mode == UpdateMode::Simultaneous;
    let point_grads_before = if update_theta && simultaneous {
        Some(dual_point_grads(&sub.alpha, sub.lambda, gram, kernel, union))
    } else {
        None
    };
    for _ in 0..steps {
        let g = dual_grad_alpha(&sub, gram)?;
        for (a_i, g_i) in sub.alpha.iter_mut().zip(&g) {
            *a_i -= cfg.lr_alpha * g_i;
        }
        settings.project(&mut sub, sub_na);
    }
    if update_theta {
        let pg = match point_grads_before {
            Some(pg) => pg,
            None => dual_point_grads(&sub.alpha, sub.lambda, gram, kernel, union),
        };
        let grad = backprop_indexed(theta, b, ib, &pg)?;
        stepper.step(theta, &grad, cfg.lr_theta)?;
    }
    if full.is_some() {
        *state = sub;
    } else {
        write_back(state, &sub, ia, ib, na);
    }
    Ok(())
}

/// Descent on the dual objective over `α` and the matcher parameters.
///
/// With `batch_size` smaller than the sets, each step draws a batch from each
/// domain, computes the objective on that sub-union and updates only the
/// matching slice of `α`. Trace rows always report the full objective.
/// Runs with [`BalanceMode::ExactProjection`] also report a step size below
/// which joint descent is stable, see [`stability_threshold`].
pub fn run_dual_alignment(
    a: &PointSet,
    b: &PointSet,
    matcher: &MatcherParams,
    kernel: &KernelSpec,
    cfg: &OptimizerConfig,
    settings: &DualSettings,
) -> Result<RunOutcome> {
    check_inputs(a, b, matcher, cfg)?;
    settings.validate()?;
    let na = a.len();
    let mut state = settings.initial_state(na + b.len(), na);
    let mut theta = matcher.clone();
    let mut stepper = ThetaStepper::new(cfg.theta_rule, theta.num_params());
    let mut batcher = Batcher::new(cfg.seed, cfg.batch_size);
    let full_batch = batcher.is_full(na, b.len());
    let mut rec = Recorder::new(cfg, a)?;

    for _ in 0..cfg.disc_pretrain_steps {
        let (ia, ib) = batcher.draw(na, b.len());
        let snap = if full_batch { Some(Snapshot::at(a, b, &theta, kernel)?) } else { None };
        outer_step(a, b, kernel, cfg, settings, &mut state, &mut theta, &mut stepper, &ia, &ib, snap.as_ref(), false)?;
    }

    let mut diverged = false;
    for t in 0..=cfg.iterations {
        let snap = Snapshot::at(a, b, &theta, kernel)?;
        let value = dual_distance(&state, &snap.gram)?;
        let acc = || dual_accuracy(&state, &snap.gram, &snap.union).unwrap_or(f64::NAN);
        diverged = rec.observe(t, value, acc, &snap.b_prime, &theta) || state.alpha.iter().any(|v| !v.is_finite());
        if diverged || t == cfg.iterations {
            break;
        }
        let (ia, ib) = batcher.draw(na, b.len());
        let full = full_batch.then_some(&snap);
        outer_step(a, b, kernel, cfg, settings, &mut state, &mut theta, &mut stepper, &ia, &ib, full, true)?;
    }
    let mut out = rec.finish(diverged, theta, Some(state.alpha));
    if settings.balance == BalanceMode::ExactProjection {
        out.stable_lr = Some(stability_threshold(a, b, matcher, kernel, settings)?);
    }
    Ok(out)
}

/// Largest step size `2^-k` (k >= 0) at which joint full-batch descent from the
/// initial point satisfies the projected sufficient-decrease condition
/// `f(x⁺) <= f(x) + ⟨∇f, x⁺ - x⟩ + |x⁺ - x|² / (2η)` and then keeps the objective
/// non-increasing over a 50-step trial run.
pub fn stability_threshold(
    a: &PointSet,
    b: &PointSet,
    matcher: &MatcherParams,
    kernel: &KernelSpec,
    settings: &DualSettings,
) -> Result<f64> {
    settings.validate()?;
    let na = a.len();
    let state0 = settings.initial_state(na + b.len(), na);
    let snap0 = Snapshot::at(a, b, matcher, kernel)?;
    let f0 = dual_distance(&state0, &snap0.gram)?;
    let ga = dual_grad_alpha(&state0, &snap0.gram)?;
    let pg = dual_point_grads(&state0.alpha, state0.lambda, &snap0.gram, kernel, &snap0.union);
    let all_b: Vec<usize> = (0..b.len()).collect();
    let gt = backprop_indexed(matcher, b, &all_b, &pg)?.to_flat();
    let theta0 = matcher.to_flat();

    let value_at = |state: &DualState, theta: &MatcherParams| -> Result<f64> {
        let s = Snapshot::at(a, b, theta, kernel)?;
        dual_distance(state, &s.gram)
    };

    let mut lr = 1.0;
    while lr > 1e-12 {
        let mut st = state0.clone();
        for (x, g) in st.alpha.iter_mut().zip(&ga) {
            *x -= lr * g;
        }
        settings.project(&mut st, na);
        let th: Vec<f64> = theta0.iter().zip(&gt).map(|(x, g)| x - lr * g).collect();
        let theta1 = matcher.from_flat_like(&th)?;
        let f1 = value_at(&st, &theta1)?;
        let mut lin = 0.0;
        let mut sq = 0.0;
        for ((x1, x0), g) in st.alpha.iter().zip(&state0.alpha).zip(&ga) {
            lin += g * (x1 - x0);
            sq += (x1 - x0) * (x1 - x0);
        }
        for ((x1, x0), g) in th.iter().zip(&theta0).zip(&gt) {
            lin += g * (x1 - x0);
            sq += (x1 - x0) * (x1 - x0);
        }
        let accept = f1.is_finite() && f1 <= f0 + lin + sq / (2.0 * lr) && trial_is_monotone(a, b, matcher, kernel, settings, lr)?;
        if accept {
            return Ok(lr);
        }
        lr *= 0.5;
    }
    Ok(lr)
}

fn trial_is_monotone(
    a: &PointSet,
    b: &PointSet,
    matcher: &MatcherParams,
    kernel: &KernelSpec,
    settings: &DualSettings,
    lr: f64,
) -> Result<bool> {
    let cfg = OptimizerConfig { lr_theta: lr, lr_alpha: lr, iterations: 50, trace_every: 1, ..Default::default() };
    let na = a.len();
    let mut state = settings.initial_state(na + b.len(), na);
    let mut theta = matcher.clone();
    let mut stepper = ThetaStepper::new(cfg.theta_rule, theta.num_params());
    let ia: Vec<usize> = (0..na).collect();
    let ib: Vec<usize> = (0..b.len()).collect();
    let mut prev = f64::INFINITY;
    for _ in 0..=cfg.iterations {
        let snap = Snapshot::at(a, b, &theta, kernel)?;
        let f = dual_distance(&state, &snap.gram)?;
        if !f.is_finite() || f > prev + 1e-12 * prev.abs().max(1.0) {
            return Ok(false);
        }
        prev = f;
        outer_step(a, b, kernel, &cfg, settings, &mut state, &mut theta, &mut stepper, &ia, &ib, Some(&snap), true)?;
    }
    Ok(true)
}
