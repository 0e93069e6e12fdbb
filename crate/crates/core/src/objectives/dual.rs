//! The dual (min-min) form of the logistic adversarial distance.
//!
//! For weights `α ∈ [0, 1]ⁿ` the objective is
//! `(1/2λ) αᵀQα + Σ H(α_i) + λ₁ |Σα_A - Σα_B|`, minimized jointly over `α`
//! and the matcher parameters. At the optimum over `α` with the balance
//! condition `Σα_A = Σα_B` held exactly, it equals the maximum of the primal
//! log-likelihood and `w* = (1/λ) Σ α_j y_j x_j`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{GramBlocks, KernelSpec};
use crate::objectives::primal::{optimal_bias, PrimalDiscriminator};
use crate::objectives::entropy;
use crate::pointset::LabeledUnion;

/// How the box `0 <= α <= 1` is maintained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Clamp to `[ε, 1 - ε]` after every update.
    #[default]
    Project,
    /// No clamping; a `λ₂ Σ |min(0, α_i)|` term discourages negative weights.
    /// The entropy and its derivative are evaluated at `α` clamped into the
    /// box so they stay finite.
    Penalty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    /// λ₁, weight of `|Σα_A - Σα_B|`.
    pub penalty_balance: f64,
    /// λ₂, weight of `Σ |min(0, α_i)|`; only active in [`BoundaryMode::Penalty`].
    pub penalty_positivity: f64,
    pub clamp_eps: f64,
    pub boundary: BoundaryMode,
}

impl DualState {
    pub const DEFAULT_EPS: f64 = 1e-6;

    /// All weights at `0.5`, no penalties, projection on.
    pub fn uniform(n: usize, lambda: f64) -> Self {
        DualState {
            alpha: vec![0.5; n],
            lambda,
            penalty_balance: 0.0,
            penalty_positivity: 0.0,
            clamp_eps: Self::DEFAULT_EPS,
            boundary: BoundaryMode::Project,
        }
    }

    pub fn with_alpha(mut self, alpha: Vec<f64>) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_penalties(mut self, balance: f64, positivity: f64) -> Self {
        self.penalty_balance = balance;
        self.penalty_positivity = positivity;
        self
    }

    /// Clamps every weight into `[ε, 1 - ε]`.
    pub fn project_box(&mut self) {
        let (lo, hi) = (self.clamp_eps, 1.0 - self.clamp_eps);
        for a in &mut self.alpha {
            *a = a.clamp(lo, hi);
        }
    }

    /// `Σα_A - Σα_B` for a union with `a_count` leading source points.
    pub fn balance_gap(&self, a_count: usize) -> f64 {
        let (a, b) = self.alpha.split_at(a_count);
        a.iter().sum::<f64>() - b.iter().sum::<f64>()
    }

    fn entropy_arg(&self, a: f64) -> f64 {
        match self.boundary {
            BoundaryMode::Project => a,
            BoundaryMode::Penalty => a.clamp(0.0, 1.0),
        }
    }

    fn logit_arg(&self, a: f64) -> f64 {
        a.clamp(self.clamp_eps, 1.0 - self.clamp_eps)
    }

    fn penalties(&self, a_count: usize) -> f64 {
        let mut p = self.penalty_balance * self.balance_gap(a_count).abs();
        if self.boundary == BoundaryMode::Penalty {
            p += self.penalty_positivity * self.alpha.iter().map(|a| a.min(0.0).abs()).sum::<f64>();
        }
        p
    }
}

/// `Σ_i H(α_i)` as used by [`dual_distance`].
pub fn entropy_sum(state: &DualState) -> f64 {
    state.alpha.iter().map(|&a| entropy(state.entropy_arg(a))).sum()
}

/// Penalty terms of [`dual_distance`] for a union with `a_count` source points.
pub fn penalty_terms(state: &DualState, a_count: usize) -> f64 {
    state.penalties(a_count)
}

fn quadratic(alpha: &[f64], gram: &GramBlocks) -> f64 {
    let a = DVector::from_column_slice(alpha);
    a.dot(&(&gram.q * &a))
}

/// Dual objective at the given `α`.
pub fn dual_distance(state: &DualState, gram: &GramBlocks) -> Result<f64> {
    check_dim(gram.len(), state.alpha.len())?;
    Ok(quadratic(&state.alpha, gram) / (2.0 * state.lambda)
        + entropy_sum(state)
        + state.penalties(gram.a_count()))
}

/// Cross-check of [`dual_distance`] through `⟨ααᵀ, Q⟩_F`, forming the rank-1
/// matrix explicitly. Penalties are not included.
pub fn frobenius_form(state: &DualState, gram: &GramBlocks) -> Result<f64> {
    check_dim(gram.len(), state.alpha.len())?;
    let a = DVector::from_column_slice(&state.alpha);
    let outer = &a * a.transpose();
    Ok(outer.dot(&gram.q) / (2.0 * state.lambda) + entropy_sum(state))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualGrad {
    pub alpha: Vec<f64>,
    /// One gradient per `B'` point, in union order.
    pub points: Vec<Vec<f64>>,
}

/// Gradient with respect to `α` only.
pub fn dual_grad_alpha(state: &DualState, gram: &GramBlocks) -> Result<Vec<f64>> {
    let n = gram.len();
    check_dim(n, state.alpha.len())?;
    let na = gram.a_count();
    let a = DVector::from_column_slice(&state.alpha);
    let qa = &gram.q * &a;
    let gap = state.balance_gap(na);
    let sign = if gap > 0.0 { 1.0 } else if gap < 0.0 { -1.0 } else { 0.0 };
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let ai = state.logit_arg(state.alpha[i]);
        let mut gi = qa[i] / state.lambda + (ai / (1.0 - ai)).ln();
        let y = if i < na { 1.0 } else { -1.0 };
        gi += state.penalty_balance * sign * y;
        if state.boundary == BoundaryMode::Penalty && state.alpha[i] < 0.0 {
            gi -= state.penalty_positivity;
        }
        g.push(gi);
    }
    Ok(g)
}

/// Analytic gradients of [`dual_distance`] with respect to `α` and to each
/// `B'` point (through `Q`'s dependence on point positions).
pub fn dual_grad(
    state: &DualState,
    gram: &GramBlocks,
    kernel: &KernelSpec,
    c: &LabeledUnion,
) -> Result<DualGrad> {
    check_dim(c.len(), gram.len())?;
    let alpha = dual_grad_alpha(state, gram)?;
    let points = dual_point_grads(&state.alpha, state.lambda, gram, kernel, c);
    Ok(DualGrad { alpha, points })
}

/// `∂/∂x_i (1/2λ) αᵀQα = (1/λ) α_i y_i Σ_j α_j y_j ∂k(x_i, x_j)/∂x_i` for `i ∈ B'`.
pub(crate) fn dual_point_grads(
    alpha: &[f64],
    lambda: f64,
    gram: &GramBlocks,
    kernel: &KernelSpec,
    c: &LabeledUnion,
) -> Vec<Vec<f64>> {
    let (n, d, na) = (c.len(), c.dim(), c.a_count());
    let y = c.labels();
    let mut out = Vec::with_capacity(c.b_count());
    for i in na..n {
        let xi = c.point(i);
        let mut g = vec![0.0; d];
        let scale_i = alpha[i] * y[i] / lambda;
        match *kernel {
            KernelSpec::Linear => {
                for j in 0..n {
                    let s = scale_i * alpha[j] * y[j];
                    for (gk, xk) in g.iter_mut().zip(c.point(j)) {
                        *gk += s * xk;
                    }
                }
            }
            KernelSpec::Gaussian { bandwidth } => {
                let s2 = bandwidth * bandwidth;
                for j in 0..n {
                    // Q_ij y_i y_j recovers the raw kernel value.
                    let k = gram.q[(i, j)] * y[i] * y[j];
                    let s = -scale_i * alpha[j] * y[j] * k / s2;
                    for ((gk, xk), xjk) in g.iter_mut().zip(xi).zip(c.point(j)) {
                        *gk += s * (xk - xjk);
                    }
                }
            }
        }
        out.push(g);
    }
    out
}

/// Discriminator scores implied by `α`: `(1/λ) Σ_j α_j y_j k(x_j, x_i)`, i.e.
/// `y_i (Qα)_i / λ`. For the linear kernel this is `w*ᵀx_i`.
pub fn dual_scores(state: &DualState, gram: &GramBlocks, c: &LabeledUnion) -> Result<Vec<f64>> {
    check_dim(gram.len(), state.alpha.len())?;
    let a = DVector::from_column_slice(&state.alpha);
    let qa = &gram.q * &a;
    Ok(qa.iter().zip(c.labels()).map(|(v, y)| y * v / state.lambda).collect())
}

/// `w = (1/λ) Σ_j α_j y_j x_j` with the bias chosen to maximize the primal
/// log-likelihood at that `w`.
pub fn recover_primal_w(
    state: &DualState,
    c: &LabeledUnion,
    kernel: &KernelSpec,
) -> Result<PrimalDiscriminator> {
    if !kernel.is_linear() {
        return Err(Error::UnsupportedKernel);
    }
    check_dim(c.len(), state.alpha.len())?;
    let mut w = vec![0.0; c.dim()];
    for ((x, y), a) in c.points().zip(c.labels()).zip(&state.alpha) {
        for (wk, xk) in w.iter_mut().zip(x) {
            *wk += a * y * xk / state.lambda;
        }
    }
    let scores: Vec<f64> = c.points().map(|x| crate::kernels::dot(&w, x)).collect();
    let b = optimal_bias(&scores, c.labels());
    Ok(PrimalDiscriminator { w, b, lambda: state.lambda })
}

/// Euclidean projection onto `{ε <= α <= 1 - ε, Σα_A = Σα_B}`.
///
/// The projection has the form `clip(α - τ y)`; `τ` is the root of the
/// monotone balance residual and is found by bisection.
pub fn project_balanced(state: &mut DualState, a_count: usize) {
    let (lo, hi) = (state.clamp_eps, 1.0 - state.clamp_eps);
    let alpha = state.alpha.clone();
    let residual = |tau: f64| -> f64 {
        let mut r = 0.0;
        for (i, a) in alpha.iter().enumerate() {
            if i < a_count {
                r += (a - tau).clamp(lo, hi);
            } else {
                r -= (a + tau).clamp(lo, hi);
            }
        }
        r
    };
    // residual is nonincreasing in tau and changes sign on [-2, 2] whenever
    // both sides are nonempty.
    let (mut t_lo, mut t_hi) = (-2.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (t_lo + t_hi);
        if residual(mid) > 0.0 {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
        if t_hi - t_lo < 1e-16 {
            break;
        }
    }
    let tau = 0.5 * (t_lo + t_hi);
    for (i, a) in state.alpha.iter_mut().enumerate() {
        *a = if i < a_count { (*a - tau).clamp(lo, hi) } else { (*a + tau).clamp(lo, hi) };
    }
}
