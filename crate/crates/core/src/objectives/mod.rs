//! Alignment objectives and their analytic gradients.
//!
//! The logistic discriminator's log-likelihood is bounded by the variational
//! inequality `log σ(u) <= α u + H(α)` for every `α` in `[0, 1]`, where
//! `H(α) = α log α + (1 - α) log(1 - α)`. Maximizing the inner linear problem
//! over `w` in closed form turns the primal min-max into a min-min over the
//! per-point weights `α` ([`dual`]). [`primal`], [`mmd`] and [`wgan`] hold the
//! baselines.

pub mod dual;
pub mod mmd;
pub mod primal;
pub mod wgan;

pub use dual::{
    dual_distance, dual_grad, dual_grad_alpha, dual_scores, entropy_sum, frobenius_form, penalty_terms, recover_primal_w,
    BoundaryMode, DualGrad, DualState,
};
pub use mmd::{
    mmd_distance, mmd_grad_points, mmd_witness_scores, weighted_mmd, weighted_mmd_grad_points,
    MmdNormalization,
};
pub use primal::{
    optimal_bias, primal_distance, primal_grad, primal_scores, PrimalDiscriminator, PrimalGrad,
};
pub use wgan::{wgan_critic_value, wgan_grad, CriticState, WganGrad};

/// Numerically stable logistic function.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log σ(u)` without overflow for large `|u|`.
pub fn log_sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        -(-u).exp().ln_1p()
    } else {
        u - u.exp().ln_1p()
    }
}

/// `α log α + (1 - α) log(1 - α)` with `0 log 0 = 0`.
pub fn entropy(alpha: f64) -> f64 {
    xlogx(alpha) + xlogx(1.0 - alpha)
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Upper bound `α u + H(α)` on `log σ(u)`; tight at `α = σ(-u)`.
pub fn log_sigmoid_bound(u: f64, alpha: f64) -> f64 {
    alpha * u + entropy(alpha)
}

/// The minimizer of [`log_sigmoid_bound`] over `α` for fixed `u`.
pub fn bound_minimizer(u: f64) -> f64 {
    sigmoid(-u)
}
