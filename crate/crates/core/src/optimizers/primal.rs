//! Gradient ascent-descent on the primal (min-max) objectives.

use serde::{Deserialize, Serialize};

use super::{check_inputs, Batcher, OptimizerConfig, Recorder, RunOutcome, ThetaStepper, UpdateMode};
use crate::diagnostics::{accuracy_from_scores, discriminator_accuracy};
use crate::error::{Error, Result};
use crate::kernels::dot;
use crate::matchers::{apply, backprop_indexed, MatcherParams};
use crate::objectives::{
    primal_distance, primal_grad, primal_scores, sigmoid, wgan_critic_value, wgan_grad, CriticState,
    PrimalDiscriminator,
};
use crate::pointset::{make_labeled_union, LabeledUnion, PointSet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimalObjective {
    /// Regularized logistic discriminator.
    #[default]
    Logistic,
    /// Linear critic with gradient penalty.
    WganGp,
}

/// Matcher loss for the logistic objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `-Σ_{B'} log σ(wᵀx + b)`: push `B'` toward the source label.
    #[default]
    InvertedLabel,
    /// Descend on the discriminator's own objective.
    Minimax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimalSettings {
    pub objective: PrimalObjective,
    /// ℓ₂ weight on the logistic discriminator.
    pub lambda: f64,
    /// Gradient-penalty weight of the WGAN critic.
    pub gp_weight: f64,
    pub generator_loss: GeneratorLoss,
}

impl Default for PrimalSettings {
    fn default() -> Self {
        PrimalSettings {
            objective: PrimalObjective::Logistic,
            lambda: 10.0,
            gp_weight: 10.0,
            generator_loss: GeneratorLoss::InvertedLabel,
        }
    }
}

impl PrimalSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(self.gp_weight >= 0.0 && self.gp_weight.is_finite()) {
            return Err(Error::Config(format!("gp_weight must be nonnegative, got {}", self.gp_weight)));
        }
        Ok(())
    }
}

enum Disc {
    Logistic(PrimalDiscriminator),
    Wgan(CriticState),
}

impl Disc {
    fn value(&self, c: &LabeledUnion) -> Result<f64> {
        match self {
            Disc::Logistic(d) => primal_distance(d, c),
            Disc::Wgan(k) => wgan_critic_value(k, c),
        }
    }

    fn accuracy(&self, c: &LabeledUnion) -> Result<f64> {
        match self {
            Disc::Logistic(d) => discriminator_accuracy(d, c),
            Disc::Wgan(k) => {
                // A critic has no threshold of its own; split at the midpoint
                // of the two class-mean scores.
                let s = primal_scores(&k.w, 0.0, c)?;
                let (sa, sb) = s.split_at(c.a_count());
                let mid = 0.5 * (sa.iter().sum::<f64>() / sa.len() as f64 + sb.iter().sum::<f64>() / sb.len() as f64);
                let shifted: Vec<f64> = s.iter().map(|v| v - mid).collect();
                Ok(accuracy_from_scores(&shifted, c.labels()))
            }
        }
    }

    fn ascend(&mut self, c: &LabeledUnion, lr: f64) -> Result<()> {
        match self {
            Disc::Logistic(d) => {
                let g = primal_grad(d, c)?;
                for (w, gw) in d.w.iter_mut().zip(&g.w) {
                    *w += lr * gw;
                }
                d.b += lr * g.b;
            }
            Disc::Wgan(k) => {
                let g = wgan_grad(k, c)?;
                for (w, gw) in k.w.iter_mut().zip(&g.w) {
                    *w += lr * gw;
                }
            }
        }
        Ok(())
    }

    /// Gradient of the matcher's loss with respect to each `B'` point.
    fn generator_grads(&self, c: &LabeledUnion, loss: GeneratorLoss) -> Result<Vec<Vec<f64>>> {
        match self {
            Disc::Logistic(d) => match loss {
                GeneratorLoss::Minimax => Ok(primal_grad(d, c)?.points),
                GeneratorLoss::InvertedLabel => Ok(c
                    .points()
                    .skip(c.a_count())
                    .map(|x| {
                        let p = sigmoid(-(dot(&d.w, x) + d.b));
                        d.w.iter().map(|w| -p * w).collect()
                    })
                    .collect()),
            },
            Disc::Wgan(k) => Ok(wgan_grad(k, c)?.points),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Disc::Logistic(d) => d.is_finite(),
            Disc::Wgan(k) => k.is_finite(),
        }
    }
}

fn batch_union(a: &PointSet, b_prime: &PointSet, ia: &[usize], ib: &[usize], full: bool) -> Result<LabeledUnion> {
    if full {
        make_labeled_union(a, b_prime)
    } else {
        make_labeled_union(&a.subset(ia), &b_prime.subset(ib))
    }
}

/// Alternating or simultaneous ascent on the discriminator (or critic) and
/// descent on the matcher. The discriminator starts at zero.
pub fn run_primal_alignment(
    a: &PointSet,
    b: &PointSet,
    matcher: &MatcherParams,
    cfg: &OptimizerConfig,
    settings: &PrimalSettings,
) -> Result<RunOutcome> {
    check_inputs(a, b, matcher, cfg)?;
    settings.validate()?;
    let d = a.dim();
    let mut disc = match settings.objective {
        PrimalObjective::Logistic => Disc::Logistic(PrimalDiscriminator::zeros(d, settings.lambda)),
        PrimalObjective::WganGp => Disc::Wgan(CriticState::zeros(d, settings.gp_weight)),
    };
    let mut theta = matcher.clone();
    let mut stepper = ThetaStepper::new(cfg.theta_rule, theta.num_params());
    let mut batcher = Batcher::new(cfg.seed, cfg.batch_size);
    let full = batcher.is_full(a.len(), b.len());
    let mut rec = Recorder::new(cfg, a)?;

    let b_prime = apply(&theta, b)?;
    for _ in 0..cfg.disc_pretrain_steps {
        let (ia, ib) = batcher.draw(a.len(), b.len());
        disc.ascend(&batch_union(a, &b_prime, &ia, &ib, full)?, cfg.lr_disc)?;
    }

    let mut diverged = false;
    for t in 0..=cfg.iterations {
        let b_prime = apply(&theta, b)?;
        let union = make_labeled_union(a, &b_prime)?;
        let value = if disc.is_finite() { disc.value(&union)? } else { f64::NAN };
        diverged = rec.observe(t, value, || disc.accuracy(&union).unwrap_or(f64::NAN), &b_prime, &theta);
        if diverged || t == cfg.iterations {
            break;
        }
        let (ia, ib) = batcher.draw(a.len(), b.len());
        let c = batch_union(a, &b_prime, &ia, &ib, full)?;
        let point_grads = match cfg.mode {
            UpdateMode::Simultaneous => {
                let g = disc.generator_grads(&c, settings.generator_loss)?;
                disc.ascend(&c, cfg.lr_disc)?;
                g
            }
            UpdateMode::Alternating(k) => {
                for _ in 0..k {
                    disc.ascend(&c, cfg.lr_disc)?;
                }
                disc.generator_grads(&c, settings.generator_loss)?
            }
        };
        let grad = backprop_indexed(&theta, b, &ib, &point_grads)?;
        stepper.step(&mut theta, &grad, cfg.lr_theta)?;
    }
    Ok(rec.finish(diverged, theta, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{generate, Domain, GeneratorSpec};

    fn eye() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 1.0]]
    }

    #[test]
    fn frozen_matcher_keeps_parameters() {
        let a = generate(&GeneratorSpec::gaussian_blob(vec![0.0, 0.0], eye(), 40, 1)).unwrap();
        let b = generate(&GeneratorSpec::gaussian_blob(vec![4.0, 0.0], eye(), 40, 2)).unwrap().with_tag(Domain::TargetB);
        let cfg = OptimizerConfig { lr_theta: 0.0, lr_disc: 0.01, iterations: 200, ..Default::default() };
        let start = MatcherParams::affine_identity(2);
        let run = run_primal_alignment(&a, &b, &start, &cfg, &PrimalSettings::default()).unwrap();
        assert_eq!(run.matcher, start);
        let acc = &run.trace.disc_accuracy;
        assert_eq!(acc[0], 0.5);
        assert!(acc[acc.len() - 1] > 0.95);
    }

    #[test]
    fn identical_sets_stay_at_chance() {
        let a = generate(&GeneratorSpec::gaussian_blob(vec![0.0, 0.0], eye(), 30, 4)).unwrap();
        let b = a.clone().with_tag(Domain::TargetB);
        let cfg = OptimizerConfig { iterations: 100, ..Default::default() };
        for objective in [PrimalObjective::Logistic, PrimalObjective::WganGp] {
            let settings = PrimalSettings { objective, ..Default::default() };
            let run = run_primal_alignment(&a, &b, &MatcherParams::affine_identity(2), &cfg, &settings).unwrap();
            for acc in &run.trace.disc_accuracy {
                assert!((acc - 0.5).abs() < 0.1, "{objective:?}: {acc}");
            }
        }
    }

    #[test]
    fn huge_rates_are_recorded_as_divergence() {
        let a = generate(&GeneratorSpec::gaussian_blob(vec![0.0, 0.0], eye(), 20, 1)).unwrap();
        let b = generate(&GeneratorSpec::gaussian_blob(vec![4.0, 0.0], eye(), 20, 2)).unwrap().with_tag(Domain::TargetB);
        let cfg = OptimizerConfig { lr_theta: 1e6, lr_disc: 1e6, iterations: 500, ..Default::default() };
        let settings = PrimalSettings { objective: PrimalObjective::WganGp, ..Default::default() };
        let run = run_primal_alignment(&a, &b, &MatcherParams::affine_identity(2), &cfg, &settings).unwrap();
        assert_eq!(run.status(), crate::diagnostics::RunStatus::Diverged);
    }
}
