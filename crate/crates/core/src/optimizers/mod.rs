//! Gradient-dynamics engines.
//!
//! * [`saddle`]: the two-variable bilinear game `min_x max_y xy`.
//! * [`run_primal_alignment`]: ascent on a logistic discriminator or a linear
//!   WGAN critic interleaved with descent on the matcher.
//! * [`run_dual_alignment`]: joint descent on the dual weights `α` and the
//!   matcher; a plain minimization problem.
//! * [`run_mmd_alignment`]: descent on the standard MMD estimate.
//!
//! Every run is single-threaded and bit-reproducible given its inputs and
//! [`OptimizerConfig::seed`].

mod dual;
mod mmd;
mod primal;
pub mod saddle;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{ClassifyParams, MomentReference, RunStatus, RunTrace, TraceRow, DIVERGENCE_THRESHOLD};
use crate::error::{Error, Result};
use crate::matchers::{apply, MatcherParams};
use crate::pointset::PointSet;

pub use dual::{run_dual_alignment, stability_threshold, BalanceMode, DualSettings};
pub use mmd::run_mmd_alignment;
pub use primal::{run_primal_alignment, GeneratorLoss, PrimalObjective, PrimalSettings};
pub use saddle::{saddle_step, saddle_trace, saddle_trajectory, SaddleState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Discriminator (or `α`) and matcher step from the same point.
    #[default]
    Simultaneous,
    /// This many discriminator (or `α`) steps, then one matcher step.
    Alternating(usize),
}

/// Update rule for the matcher parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRule {
    #[default]
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr_theta: f64,
    pub lr_disc: f64,
    pub lr_alpha: f64,
    pub mode: UpdateMode,
    /// Outer iterations (matcher updates).
    pub iterations: usize,
    /// Points drawn per domain per step; `None` uses every point.
    pub batch_size: Option<usize>,
    /// Discriminator-only (or `α`-only) steps before alignment starts.
    pub disc_pretrain_steps: usize,
    pub seed: u64,
    /// Record a trace row every this many iterations (plus the last one).
    pub trace_every: usize,
    /// Keep a copy of the matcher every this many iterations.
    pub snapshot_every: Option<usize>,
    pub theta_rule: ThetaRule,
    pub classify: ClassifyParams,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr_theta: 0.002,
            lr_disc: 0.002,
            lr_alpha: 0.002,
            mode: UpdateMode::Simultaneous,
            iterations: 5000,
            batch_size: None,
            disc_pretrain_steps: 0,
            seed: 0,
            trace_every: 10,
            snapshot_every: None,
            theta_rule: ThetaRule::Sgd,
            classify: ClassifyParams::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lr_theta", self.lr_theta), ("lr_disc", self.lr_disc), ("lr_alpha", self.lr_alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite nonnegative number, got {v}")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace_every must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.mode == UpdateMode::Alternating(0) {
            return Err(Error::Config("alternating mode needs at least one discriminator step".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot_every must be positive".into()));
        }
        Ok(())
    }

    fn records(&self, t: usize) -> bool {
        t.is_multiple_of(self.trace_every) || t == self.iterations
    }

    fn snapshots(&self, t: usize) -> bool {
        self.snapshot_every.is_some_and(|k| t.is_multiple_of(k) || t == self.iterations)
    }

    fn disc_steps(&self) -> usize {
        match self.mode {
            UpdateMode::Simultaneous => 1,
            UpdateMode::Alternating(k) => k,
        }
    }
}

/// Result of an alignment run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub matcher: MatcherParams,
    /// `(iteration, matcher)` pairs kept per [`OptimizerConfig::snapshot_every`].
    pub snapshots: Vec<(usize, MatcherParams)>,
    /// Final dual weights for dual runs.
    pub alpha: Option<Vec<f64>>,
    /// Step size below which dual descent was found stable, for dual runs.
    pub stable_lr: Option<f64>,
}

impl RunOutcome {
    pub fn status(&self) -> RunStatus {
        self.trace.status
    }
}

/// Plain or Adam-style update on the flattened matcher parameters.
struct ThetaStepper {
    rule: ThetaRule,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl ThetaStepper {
    fn new(rule: ThetaRule, n: usize) -> Self {
        ThetaStepper { rule, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut MatcherParams, grad: &MatcherParams, lr: f64) -> Result<()> {
        match self.rule {
            ThetaRule::Sgd => params.axpy(-lr, grad),
            ThetaRule::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let g = grad.to_flat();
                let mut p = params.to_flat();
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..p.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
                    p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
                }
                *params = params.from_flat_like(&p)?;
                Ok(())
            }
        }
    }
}

/// Draws per-domain mini-batch indices, or every index when the batch covers
/// the whole set.
struct Batcher {
    rng: ChaCha8Rng,
    size: Option<usize>,
}

impl Batcher {
    fn new(seed: u64, size: Option<usize>) -> Self {
        use rand::SeedableRng;
        Batcher { rng: ChaCha8Rng::seed_from_u64(seed), size }
    }

    fn is_full(&self, na: usize, nb: usize) -> bool {
        self.size.is_none_or(|m| m >= na && m >= nb)
    }

    fn draw(&mut self, na: usize, nb: usize) -> (Vec<usize>, Vec<usize>) {
        match self.size {
            Some(m) if !self.is_full(na, nb) => {
                let mut ia = sample(&mut self.rng, na, m.min(na)).into_vec();
                let mut ib = sample(&mut self.rng, nb, m.min(nb)).into_vec();
                ia.sort_unstable();
                ib.sort_unstable();
                (ia, ib)
            }
            _ => ((0..na).collect(), (0..nb).collect()),
        }
    }
}

/// Shared bookkeeping for recording rows and detecting divergence.
struct Recorder<'a> {
    cfg: &'a OptimizerConfig,
    moments: MomentReference,
    trace: RunTrace,
    snapshots: Vec<(usize, MatcherParams)>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a OptimizerConfig, a: &PointSet) -> Result<Self> {
        Ok(Recorder { cfg, moments: MomentReference::new(a)?, trace: RunTrace::default(), snapshots: Vec::new() })
    }

    /// Records iteration `t` if scheduled; returns `true` when the run diverged.
    fn observe(
        &mut self,
        t: usize,
        objective: f64,
        accuracy: impl FnOnce() -> f64,
        b_prime: &PointSet,
        matcher: &MatcherParams,
    ) -> bool {
        let diverged = !objective.is_finite() || objective.abs() > DIVERGENCE_THRESHOLD || !matcher.is_finite();
        if diverged || self.cfg.records(t) {
            let disc_accuracy = if diverged { f64::NAN } else { accuracy() };
            self.trace.push(TraceRow {
                iteration: t,
                objective,
                disc_accuracy,
                mean_gap: self.moments.mean_gap(b_prime),
                cov_gap: self.moments.cov_gap(b_prime),
            });
        }
        if !diverged && self.cfg.snapshots(t) {
            self.snapshots.push((t, matcher.clone()));
        }
        diverged
    }

    fn finish(mut self, diverged: bool, matcher: MatcherParams, alpha: Option<Vec<f64>>) -> RunOutcome {
        self.trace.status = if diverged { RunStatus::Diverged } else { self.cfg.classify.classify(&self.trace) };
        RunOutcome { trace: self.trace, matcher, snapshots: self.snapshots, alpha, stable_lr: None }
    }
}

fn check_inputs(a: &PointSet, b: &PointSet, matcher: &MatcherParams, cfg: &OptimizerConfig) -> Result<()> {
    cfg.validate()?;
    crate::error::check_dim(a.dim(), b.dim())?;
    apply(matcher, b).map(|_| ())
}
