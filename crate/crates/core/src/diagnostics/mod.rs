//! Run traces, accuracy metrics and convergence classification.

mod toy_da;

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{dual_scores, optimal_bias, primal_scores, DualState, PrimalDiscriminator};
use crate::kernels::GramBlocks;
use crate::pointset::{empirical_moments, mean, LabeledUnion, PointSet};

pub use toy_da::{
    fit_source_classifier, toy_da_evaluate, AlignMethod, HeldOutLabels, ShiftSpec, ToyDaResult, ToyDaTask,
};

/// Objective magnitude beyond which a run counts as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Oscillating,
    Diverged,
    MaxIters,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::Oscillating => "oscillating",
            RunStatus::Diverged => "diverged",
            RunStatus::MaxIters => "max_iters",
        }
    }
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sampled row of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub disc_accuracy: f64,
    pub mean_gap: f64,
    pub cov_gap: f64,
}

/// Per-iteration record of an alignment run; all columns have equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub iterations: Vec<usize>,
    pub objective: Vec<f64>,
    pub disc_accuracy: Vec<f64>,
    pub mean_gap: Vec<f64>,
    pub cov_gap: Vec<f64>,
    pub status: RunStatus,
}

impl Default for RunTrace {
    fn default() -> Self {
        RunTrace {
            iterations: Vec::new(),
            objective: Vec::new(),
            disc_accuracy: Vec::new(),
            mean_gap: Vec::new(),
            cov_gap: Vec::new(),
            status: RunStatus::MaxIters,
        }
    }
}

impl RunTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.iterations.push(row.iteration);
        self.objective.push(row.objective);
        self.disc_accuracy.push(row.disc_accuracy);
        self.mean_gap.push(row.mean_gap);
        self.cov_gap.push(row.cov_gap);
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn row(&self, i: usize) -> TraceRow {
        TraceRow {
            iteration: self.iterations[i],
            objective: self.objective[i],
            disc_accuracy: self.disc_accuracy[i],
            mean_gap: self.mean_gap[i],
            cov_gap: self.cov_gap[i],
        }
    }

    pub fn last(&self) -> Option<TraceRow> {
        (!self.is_empty()).then(|| self.row(self.len() - 1))
    }

    /// `cov_gap[0] / cov_gap[last]`; infinite when the final gap is zero.
    pub fn cov_gap_ratio(&self) -> f64 {
        match (self.cov_gap.first(), self.cov_gap.last()) {
            (Some(&first), Some(&last)) if last > 0.0 => first / last,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => f64::NAN,
        }
    }

    /// `iter,objective,disc_acc,mean_gap,cov_gap`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "objective", "disc_acc", "mean_gap", "cov_gap"])?;
        for i in 0..self.len() {
            let r = self.row(i);
            out.write_record([
                r.iteration.to_string(),
                r.objective.to_string(),
                r.disc_accuracy.to_string(),
                r.mean_gap.to_string(),
                r.cov_gap.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Fraction of points whose score sign matches the label; a zero score counts
/// as half correct.
pub fn accuracy_from_scores(scores: &[f64], labels: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.5;
    }
    let correct: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, y)| {
            if *s == 0.0 {
                0.5
            } else if s.signum() == y.signum() {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    correct / scores.len() as f64
}

pub fn discriminator_accuracy(disc: &PrimalDiscriminator, c: &LabeledUnion) -> Result<f64> {
    let scores = primal_scores(&disc.w, disc.b, c)?;
    Ok(accuracy_from_scores(&scores, c.labels()))
}

/// Accuracy of the discriminator implied by dual weights: the kernel expansion
/// `(1/λ) Σ_j α_j y_j k(x_j, ·)` plus the likelihood-maximizing bias.
pub fn dual_accuracy(state: &DualState, gram: &GramBlocks, c: &LabeledUnion) -> Result<f64> {
    let scores = dual_scores(state, gram, c)?;
    let b = optimal_bias(&scores, c.labels());
    let shifted: Vec<f64> = scores.iter().map(|s| s + b).collect();
    Ok(accuracy_from_scores(&shifted, c.labels()))
}

/// Mean and covariance of the fixed source set, reused across trace rows.
#[derive(Clone, Debug)]
pub struct MomentReference {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
}

impl MomentReference {
    pub fn new(a: &PointSet) -> Result<Self> {
        let (mean, cov) = empirical_moments(a)?;
        Ok(MomentReference { mean, cov })
    }

    /// `|μ_A - μ_B'|²`
    pub fn mean_gap(&self, b_prime: &PointSet) -> f64 {
        mean(b_prime).iter().zip(&self.mean).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// `|Σ_A - Σ_B'|²_F`, with unbiased covariances.
    pub fn cov_gap(&self, b_prime: &PointSet) -> f64 {
        match empirical_moments(b_prime) {
            Ok((_, cov)) => (cov - &self.cov).norm_squared(),
            Err(_) => f64::NAN,
        }
    }
}

/// Window and tolerance for [`classify_trace`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    /// Window length as a fraction of the trace length.
    pub window_frac: f64,
    pub tol: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { window_frac: 0.1, tol: 0.05 }
    }
}

impl ClassifyParams {
    pub fn window_for(&self, len: usize) -> usize {
        ((len as f64 * self.window_frac).round() as usize).max(1)
    }

    /// Classifies `trace`, falling back to `MaxIters` for traces too short to judge.
    pub fn classify(&self, trace: &RunTrace) -> RunStatus {
        let window = self.window_for(trace.len());
        classify_trace(trace, window, self.tol).unwrap_or(RunStatus::MaxIters)
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Labels a finished trace.
///
/// * `Diverged`: any non-finite entry or `|objective| > 1e12`.
/// * `Converged`: the objective's standard deviation over the last `window`
///   rows is below `tol` times its full-trace range, and the final covariance
///   gap does not exceed the initial one.
/// * `Oscillating`: the last window still varies by at least `tol` times the
///   range, while its mean has not moved from the preceding window by more
///   than its own spread (no trend).
/// * `MaxIters`: anything else.
pub fn classify_trace(trace: &RunTrace, window: usize, tol: f64) -> Result<RunStatus> {
    let n = trace.len();
    if window == 0 || n < 2 * window {
        return Err(Error::InsufficientData(format!(
            "trace of length {n} is shorter than two windows of {window}"
        )));
    }
    let columns = [&trace.objective, &trace.disc_accuracy, &trace.mean_gap, &trace.cov_gap];
    if columns.iter().any(|c| c.iter().any(|v| !v.is_finite()))
        || trace.objective.iter().any(|v| v.abs() > DIVERGENCE_THRESHOLD)
    {
        return Ok(RunStatus::Diverged);
    }
    let (lo, hi) = trace
        .objective
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let last = &trace.objective[n - window..];
    let prev = &trace.objective[n - 2 * window..n - window];
    let (m_last, sd_last) = mean_sd(last);
    let (m_prev, _) = mean_sd(prev);
    let settled = sd_last <= tol * range;
    let gap_ok = trace.cov_gap[n - 1] <= trace.cov_gap[0];
    if settled && gap_ok {
        return Ok(RunStatus::Converged);
    }
    if !settled && (m_last - m_prev).abs() <= sd_last {
        return Ok(RunStatus::Oscillating);
    }
    Ok(RunStatus::MaxIters)
}

/// `(d_0 - d_T) / (max_t d_t - min_t d_t)`, the relative drop of a distance
/// trace; `None` for traces shorter than two rows or with zero range.
pub fn validation_ratio(objective: &[f64]) -> Option<f64> {
    let (first, last) = (objective.first()?, objective.last()?);
    let (lo, hi) = objective
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    (objective.len() >= 2 && range > 0.0).then(|| (first - last) / range)
}

/// Keeps a run only when its distance dropped by more than `threshold` of its range.
pub fn passes_validation(objective: &[f64], threshold: f64) -> bool {
    validation_ratio(objective).is_some_and(|r| r > threshold)
}
