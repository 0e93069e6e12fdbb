//! Linear Wasserstein critic with a unit-norm gradient penalty.
//!
//! For `f(x) = wᵀx + b` the input gradient is `w` everywhere, so the
//! `(|∇f| - 1)²` penalty is exactly `(|w| - 1)²` and no interpolated samples are
//! needed.

use crate::error::{check_dim, Result};
use crate::kernels::dot;
use crate::pointset::LabeledUnion;

#[derive(Clone, Debug, PartialEq)]
pub struct CriticState {
    pub w: Vec<f64>,
    pub b: f64,
    pub gp_weight: f64,
}

impl CriticState {
    pub fn zeros(dim: usize, gp_weight: f64) -> Self {
        CriticState { w: vec![0.0; dim], b: 0.0, gp_weight }
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.w.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WganGrad {
    pub w: Vec<f64>,
    /// One gradient per `B'` point.
    pub points: Vec<Vec<f64>>,
}

fn class_means(c: &LabeledUnion) -> (Vec<f64>, Vec<f64>) {
    let d = c.dim();
    let mut ma = vec![0.0; d];
    let mut mb = vec![0.0; d];
    for (i, x) in c.points().enumerate() {
        let m = if i < c.a_count() { &mut ma } else { &mut mb };
        for (mk, xk) in m.iter_mut().zip(x) {
            *mk += xk;
        }
    }
    ma.iter_mut().for_each(|v| *v /= c.a_count() as f64);
    mb.iter_mut().for_each(|v| *v /= c.b_count() as f64);
    (ma, mb)
}

/// `mean_A f - mean_B' f - gp (|w| - 1)²`, which the critic maximizes.
pub fn wgan_critic_value(critic: &CriticState, c: &LabeledUnion) -> Result<f64> {
    check_dim(c.dim(), critic.w.len())?;
    let mut sa = 0.0;
    let mut sb = 0.0;
    for (i, x) in c.points().enumerate() {
        let s = dot(&critic.w, x) + critic.b;
        if i < c.a_count() {
            sa += s;
        } else {
            sb += s;
        }
    }
    let norm = dot(&critic.w, &critic.w).sqrt();
    Ok(sa / c.a_count() as f64 - sb / c.b_count() as f64 - critic.gp_weight * (norm - 1.0).powi(2))
}

/// Gradients of [`wgan_critic_value`]. At `w = 0` the penalty's subgradient
/// `0` is used.
pub fn wgan_grad(critic: &CriticState, c: &LabeledUnion) -> Result<WganGrad> {
    check_dim(c.dim(), critic.w.len())?;
    let (ma, mb) = class_means(c);
    let norm = dot(&critic.w, &critic.w).sqrt();
    let pen = if norm > 0.0 { 2.0 * critic.gp_weight * (norm - 1.0) / norm } else { 0.0 };
    let w = ma
        .iter()
        .zip(&mb)
        .zip(&critic.w)
        .map(|((a, b), wk)| a - b - pen * wk)
        .collect();
    let nb = c.b_count() as f64;
    let point: Vec<f64> = critic.w.iter().map(|wk| -wk / nb).collect();
    Ok(WganGrad { w, points: vec![point; c.b_count()] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{make_labeled_union, Domain, PointSet};

    fn union(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> LabeledUnion {
        make_labeled_union(
            &PointSet::new(a, Domain::SourceA).unwrap(),
            &PointSet::new(b, Domain::TargetB).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_critic() {
        let c = union(vec![vec![1.0, 2.0]], vec![vec![-1.0, 0.0], vec![3.0, 3.0]]);
        assert_eq!(wgan_critic_value(&CriticState::zeros(2, 10.0), &c).unwrap(), -10.0);
    }

    #[test]
    fn identical_sets_score_zero_difference() {
        let pts = vec![vec![1.0, 2.0], vec![0.5, -1.0]];
        let c = union(pts.clone(), pts);
        let critic = CriticState { w: vec![0.6, 0.8], b: 0.3, gp_weight: 5.0 };
        assert!(wgan_critic_value(&critic, &c).unwrap().abs() < 1e-15);
    }

    #[test]
    fn matches_scripted_transcription() {
        let c = union(vec![vec![1.0, 2.0], vec![0.0, -1.0]], vec![vec![2.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3]]);
        let critic = CriticState { w: vec![0.7, -1.9], b: 0.25, gp_weight: 2.5 };
        let f = |x: &[f64]| 0.7 * x[0] - 1.9 * x[1] + 0.25;
        let mean_a = (f(&[1.0, 2.0]) + f(&[0.0, -1.0])) / 2.0;
        let mean_b = (f(&[2.0, 2.0]) + f(&[-1.0, 0.5]) + f(&[0.3, 0.3])) / 3.0;
        let norm = (0.7f64 * 0.7 + 1.9 * 1.9).sqrt();
        let expect = mean_a - mean_b - 2.5 * (norm - 1.0) * (norm - 1.0);
        assert!((wgan_critic_value(&critic, &c).unwrap() - expect).abs() < 1e-12);
    }
}
