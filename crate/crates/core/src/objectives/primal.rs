//! Regularized logistic log-likelihood of a linear discriminator.

use crate::error::{check_dim, Result};
use crate::kernels::dot;
use crate::objectives::{log_sigmoid, sigmoid};
use crate::pointset::LabeledUnion;

/// Linear discriminator `wᵀx + b` with ℓ₂ penalty `λ/2 |w|²` (bias unpenalized).
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDiscriminator {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
}

impl PrimalDiscriminator {
    pub fn zeros(dim: usize, lambda: f64) -> Self {
        PrimalDiscriminator { w: vec![0.0; dim], b: 0.0, lambda }
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.w.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalGrad {
    pub w: Vec<f64>,
    pub b: f64,
    /// One gradient per `B'` point, in union order.
    pub points: Vec<Vec<f64>>,
}

pub fn primal_scores(w: &[f64], b: f64, c: &LabeledUnion) -> Result<Vec<f64>> {
    check_dim(c.dim(), w.len())?;
    Ok(c.points().map(|x| dot(w, x) + b).collect())
}

/// `Σ log σ(y_i (wᵀx_i + b)) - λ/2 wᵀw` at the given discriminator.
pub fn primal_distance(disc: &PrimalDiscriminator, c: &LabeledUnion) -> Result<f64> {
    let scores = primal_scores(&disc.w, disc.b, c)?;
    let ll: f64 = scores.iter().zip(c.labels()).map(|(s, y)| log_sigmoid(y * s)).sum();
    Ok(ll - 0.5 * disc.lambda * dot(&disc.w, &disc.w))
}

/// Gradients of [`primal_distance`] with respect to `w`, `b` and each `B'` point.
/// `A` points do not move under the matcher and receive no gradient.
pub fn primal_grad(disc: &PrimalDiscriminator, c: &LabeledUnion) -> Result<PrimalGrad> {
    let scores = primal_scores(&disc.w, disc.b, c)?;
    let d = c.dim();
    let mut gw: Vec<f64> = disc.w.iter().map(|w| -disc.lambda * w).collect();
    let mut gb = 0.0;
    let mut points = Vec::with_capacity(c.b_count());
    for (i, (x, (s, y))) in c.points().zip(scores.iter().zip(c.labels())).enumerate() {
        // d/du log σ(u) = σ(-u)
        let r = y * sigmoid(-y * s);
        for k in 0..d {
            gw[k] += r * x[k];
        }
        gb += r;
        if i >= c.a_count() {
            points.push(disc.w.iter().map(|w| r * w).collect());
        }
    }
    Ok(PrimalGrad { w: gw, b: gb, points })
}

/// Maximizes `Σ log σ(y_i (s_i + b))` over the scalar offset `b`.
///
/// The objective is concave in `b`; a safeguarded Newton iteration inside a
/// sign-change bracket of the derivative converges to machine precision. When
/// only one label is present the derivative never changes sign and the search
/// stops at the edge of a `±1e6` bracket.
pub fn optimal_bias(scores: &[f64], labels: &[f64]) -> f64 {
    let deriv = |b: f64| -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for (s, y) in scores.iter().zip(labels) {
            let u = y * (s + b);
            let p = sigmoid(-u);
            g += y * p;
            h -= p * (1.0 - p);
        }
        (g, h)
    };
    let (g0, _) = deriv(0.0);
    if g0 == 0.0 {
        return 0.0;
    }
    // Bracket [lo, hi] with g(lo) > 0 > g(hi).
    let dir = g0.signum();
    let mut step = 1.0;
    let mut far = dir * step;
    while deriv(far).0 * dir > 0.0 {
        step *= 2.0;
        far = dir * step;
        if step > 1e6 {
            return far;
        }
    }
    let (mut lo, mut hi) = if dir > 0.0 { (0.0, far) } else { (far, 0.0) };
    let mut b = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (g, h) = deriv(b);
        if g > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        if g == 0.0 || hi - lo <= 1e-15 * (1.0 + b.abs()) {
            break;
        }
        let newton = if h < 0.0 { b - g / h } else { f64::NAN };
        b = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (g / h).abs() < 1e-15 * (1.0 + b.abs()) {
            break;
        }
    }
    b
}
