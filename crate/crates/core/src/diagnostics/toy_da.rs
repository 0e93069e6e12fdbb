//! Desk-scale unsupervised domain adaptation: a logistic classifier trained on
//! labeled source points is evaluated on a shifted and rotated target before
//! and after alignment.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RunTrace;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{dot, KernelSpec};
use crate::matchers::{apply, MatcherParams};
use crate::objectives::{sigmoid, PrimalDiscriminator};
use crate::optimizers::{
    run_dual_alignment, run_mmd_alignment, run_primal_alignment, DualSettings, OptimizerConfig, PrimalSettings,
};
use crate::pointset::{generate_labeled, ClassBlob, Domain, GeneratorSpec, PointSet};

/// Target labels, readable only by the evaluation step.
#[derive(Clone, Debug, PartialEq)]
pub struct HeldOutLabels(Vec<i8>);

impl HeldOutLabels {
    pub fn new(labels: Vec<i8>) -> Self {
        HeldOutLabels(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Labeled source and unlabeled target for one adaptation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyDaTask {
    pub source: PointSet,
    /// `1` or `-1` per source point.
    pub source_labels: Vec<i8>,
    pub target: PointSet,
}

/// Parameters of [`ToyDaTask::shifted_rotated`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftSpec {
    pub count: usize,
    /// Rotation of the target about the origin, in degrees.
    pub angle_deg: f64,
    pub shift: Vec<f64>,
    pub seed: u64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec { count: 100, angle_deg: 20.0, shift: vec![3.0, 2.0], seed: 7 }
    }
}

impl ToyDaTask {
    /// Two elongated classes at `(±2, 0)` with different covariances; the
    /// target is an independent draw rotated by `angle_deg` and then shifted.
    pub fn shifted_rotated(spec: &ShiftSpec) -> Result<(ToyDaTask, HeldOutLabels)> {
        check_dim(2, spec.shift.len())?;
        let classes = [
            ClassBlob { mean: vec![-2.0, 0.0], covariance: vec![vec![0.6, 0.2], vec![0.2, 1.2]], label: 1 },
            ClassBlob { mean: vec![2.0, 0.0], covariance: vec![vec![0.3, 0.0], vec![0.0, 0.6]], label: -1 },
        ];
        let (source, source_labels) = generate_labeled(&GeneratorSpec::two_class(classes.clone(), spec.count, spec.seed))?;
        let (raw, target_labels) =
            generate_labeled(&GeneratorSpec::two_class(classes, spec.count, spec.seed.wrapping_add(1)))?;
        let (s, c) = spec.angle_deg.to_radians().sin_cos();
        let moved: Vec<Vec<f64>> = raw
            .iter()
            .map(|x| vec![c * x[0] - s * x[1] + spec.shift[0], s * x[0] + c * x[1] + spec.shift[1]])
            .collect();
        let target = PointSet::new(moved, Domain::TargetB)?;
        Ok((ToyDaTask { source, source_labels, target }, HeldOutLabels(target_labels)))
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.source.len(), self.source_labels.len())?;
        check_dim(self.source.dim(), self.target.dim())?;
        if self.source_labels.iter().any(|l| *l != 1 && *l != -1) {
            return Err(Error::InvalidSpec("source labels must be 1 or -1".into()));
        }
        let pos = self.source_labels.iter().filter(|l| **l == 1).count();
        if pos == 0 || pos == self.source_labels.len() {
            return Err(Error::InvalidSpec("source must contain both classes".into()));
        }
        Ok(())
    }
}

/// Which distance drives the matcher.
#[derive(Clone, Debug, PartialEq)]
pub enum AlignMethod {
    /// Evaluate the given matcher without training it.
    Fixed,
    Dual { kernel: KernelSpec, settings: DualSettings },
    Primal(PrimalSettings),
    Mmd { kernel: KernelSpec },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDaResult {
    pub source_accuracy: f64,
    pub target_accuracy_before: f64,
    /// Target accuracy after each recorded epoch, last entry final.
    pub target_accuracy_after: Vec<f64>,
    /// Iteration of each entry of `target_accuracy_after`.
    pub epochs: Vec<usize>,
    /// Alignment trace, absent for [`AlignMethod::Fixed`].
    pub trace: Option<RunTrace>,
}

impl ToyDaResult {
    pub fn final_accuracy(&self) -> f64 {
        self.target_accuracy_after.last().copied().unwrap_or(self.target_accuracy_before)
    }

    pub fn improved(&self) -> bool {
        self.final_accuracy() > self.target_accuracy_before
    }

    /// `epoch,target_acc`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "target_acc"])?;
        for (e, acc) in self.epochs.iter().zip(&self.target_accuracy_after) {
            out.write_record([e.to_string(), acc.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `source_acc,target_acc_before,target_acc_after` with a single row.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["source_acc", "target_acc_before", "target_acc_after"])?;
        out.write_record([
            self.source_accuracy.to_string(),
            self.target_accuracy_before.to_string(),
            self.final_accuracy().to_string(),
        ])?;
        out.flush()?;
        Ok(())
    }
}

/// Ridge-regularized logistic regression fitted by damped Newton iterations.
/// The bias is not penalized.
pub fn fit_source_classifier(source: &PointSet, labels: &[i8], lambda: f64) -> Result<PrimalDiscriminator> {
    check_dim(source.len(), labels.len())?;
    let pos = labels.iter().filter(|l| **l == 1).count();
    if pos == 0 || pos == labels.len() || labels.iter().any(|l| *l != 1 && *l != -1) {
        return Err(Error::InvalidSpec("classifier needs labels 1 and -1, both present".into()));
    }
    let d = source.dim();
    let y: Vec<f64> = labels.iter().map(|l| f64::from(*l)).collect();
    let objective = |theta: &DVector<f64>| -> f64 {
        let w = &theta.as_slice()[..d];
        let b = theta[d];
        let ll: f64 = source.iter().zip(&y).map(|(x, yi)| crate::objectives::log_sigmoid(yi * (dot(w, x) + b))).sum();
        ll - 0.5 * lambda * dot(w, w)
    };
    let mut theta = DVector::zeros(d + 1);
    let mut f = objective(&theta);
    for _ in 0..100 {
        let mut g = DVector::zeros(d + 1);
        let mut h = DMatrix::zeros(d + 1, d + 1);
        for (x, yi) in source.iter().zip(&y) {
            let xt = DVector::from_iterator(d + 1, x.iter().copied().chain(std::iter::once(1.0)));
            let s = theta.dot(&xt);
            let p = sigmoid(-yi * s);
            g.axpy(yi * p, &xt, 1.0);
            h.ger(p * (1.0 - p), &xt, &xt, 1.0);
        }
        for k in 0..d {
            g[k] -= lambda * theta[k];
            h[(k, k)] += lambda;
        }
        h[(d, d)] += 1e-12;
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&g);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-10 {
            let cand = &theta + &step * t;
            let fc = objective(&cand);
            if fc >= f {
                theta = cand;
                f = fc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || step.norm() * t < 1e-12 {
            break;
        }
    }
    Ok(PrimalDiscriminator { w: theta.as_slice()[..d].to_vec(), b: theta[d], lambda })
}

fn classifier_accuracy(clf: &PrimalDiscriminator, points: &PointSet, labels: &[i8]) -> f64 {
    let correct: f64 = points
        .iter()
        .zip(labels)
        .map(|(x, l)| {
            let s = dot(&clf.w, x) + clf.b;
            if s == 0.0 {
                0.5
            } else if (s > 0.0) == (*l > 0) {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    correct / points.len() as f64
}

/// Regularization of the source classifier.
const CLASSIFIER_LAMBDA: f64 = 1e-2;

/// Trains the source classifier, aligns the target to the source with
/// `method`, and scores the classifier on the aligned target at every matcher
/// snapshot. Target labels are consulted only for scoring.
pub fn toy_da_evaluate(
    task: &ToyDaTask,
    held_out: &HeldOutLabels,
    matcher: &MatcherParams,
    method: &AlignMethod,
    cfg: &OptimizerConfig,
) -> Result<ToyDaResult> {
    task.validate()?;
    check_dim(task.target.len(), held_out.len())?;
    let clf = fit_source_classifier(&task.source, &task.source_labels, CLASSIFIER_LAMBDA)?;
    let source_accuracy = classifier_accuracy(&clf, &task.source, &task.source_labels);
    let target_accuracy_before = classifier_accuracy(&clf, &task.target, &held_out.0);

    let mut run_cfg = cfg.clone();
    if run_cfg.snapshot_every.is_none() {
        run_cfg.snapshot_every = Some(run_cfg.trace_every);
    }
    let source = task.source.clone();
    let outcome = match method {
        AlignMethod::Fixed => None,
        AlignMethod::Dual { kernel, settings } => {
            Some(run_dual_alignment(&source, &task.target, matcher, kernel, &run_cfg, settings)?)
        }
        AlignMethod::Primal(settings) => Some(run_primal_alignment(&source, &task.target, matcher, &run_cfg, settings)?),
        AlignMethod::Mmd { kernel } => Some(run_mmd_alignment(&source, &task.target, matcher, kernel, &run_cfg)?),
    };
    let snapshots = match &outcome {
        None => vec![(0, matcher.clone())],
        Some(o) if o.snapshots.is_empty() => vec![(0, o.matcher.clone())],
        Some(o) => o.snapshots.clone(),
    };
    let mut epochs = Vec::with_capacity(snapshots.len());
    let mut after = Vec::with_capacity(snapshots.len());
    for (t, params) in &snapshots {
        let moved = apply(params, &task.target)?;
        epochs.push(*t);
        after.push(classifier_accuracy(&clf, &moved, &held_out.0));
    }
    Ok(ToyDaResult {
        source_accuracy,
        target_accuracy_before,
        target_accuracy_after: after,
        epochs,
        trace: outcome.map(|o| o.trace),
    })
}
