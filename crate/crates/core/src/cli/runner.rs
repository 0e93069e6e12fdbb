use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::svg::{line_panels, scatter_panels, trajectory, Cloud, Panel, Series};
use super::{ExperimentConfig, ExperimentKind, ObjectiveKind};
use crate::diagnostics::{classify_trace, toy_da_evaluate, AlignMethod, RunStatus, RunTrace, ToyDaTask};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::matchers::{apply, MatcherParams};
use crate::optimizers::saddle::write_saddle_csv;
use crate::optimizers::{
    run_dual_alignment, run_mmd_alignment, run_primal_alignment, saddle_trace, saddle_trajectory, DualSettings,
    OptimizerConfig, PrimalObjective, RunOutcome, SaddleState,
};
use crate::pointset::{make_labeled_union, write_pointset_csv, write_union_csv, PointSet};

pub const SUMMARY_HEADER: [&str; 12] = [
    "run_id",
    "objective",
    "lr_theta",
    "lr_disc",
    "lr_alpha",
    "lambda",
    "lambda1",
    "lambda2",
    "status",
    "final_cov_gap",
    "cov_gap_ratio",
    "final_acc",
];

/// Minimum covariance-gap reduction for a synthetic run to count as a success.
const SUCCESS_COV_RATIO: f64 = 10.0;

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub objective: ObjectiveKind,
    pub lr_theta: f64,
    pub lr_disc: f64,
    pub lr_alpha: f64,
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub status: RunStatus,
    pub final_cov_gap: f64,
    pub cov_gap_ratio: f64,
    /// Final discriminator accuracy, or final target accuracy for toy DA.
    pub final_acc: f64,
    /// Unadapted target accuracy, toy DA only.
    pub baseline_acc: Option<f64>,
}

impl RunRecord {
    /// Synthetic runs: converged with the covariance gap reduced at least 10x.
    /// Toy DA runs: final target accuracy above the unadapted baseline.
    pub fn success(&self) -> bool {
        match self.baseline_acc {
            Some(before) => self.final_acc > before,
            None => self.status == RunStatus::Converged && self.cov_gap_ratio >= SUCCESS_COV_RATIO,
        }
    }

    fn csv_row(&self) -> [String; 12] {
        [
            self.run_id.clone(),
            self.objective.to_string(),
            self.lr_theta.to_string(),
            self.lr_disc.to_string(),
            self.lr_alpha.to_string(),
            self.lambda.to_string(),
            self.lambda1.to_string(),
            self.lambda2.to_string(),
            self.status.to_string(),
            self.final_cov_gap.to_string(),
            self.cov_gap_ratio.to_string(),
            self.final_acc.to_string(),
        ]
    }
}

/// Per-objective counts over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveRanking {
    pub objective: ObjectiveKind,
    pub runs: usize,
    pub converged: usize,
    pub successes: usize,
}

impl ObjectiveRanking {
    pub fn converged_fraction(&self) -> f64 {
        self.converged as f64 / self.runs as f64
    }

    pub fn success_fraction(&self) -> f64 {
        self.successes as f64 / self.runs as f64
    }
}

/// Everything a run or grid produced, in grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridOutcome {
    pub records: Vec<RunRecord>,
    pub ranking: Vec<ObjectiveRanking>,
}

impl GridOutcome {
    pub fn ranking_for(&self, objective: ObjectiveKind) -> Option<&ObjectiveRanking> {
        self.ranking.iter().find(|r| r.objective == objective)
    }
}

#[derive(Clone, Debug)]
struct Cell {
    index: usize,
    objective: ObjectiveKind,
    lr_theta: f64,
    lr_alpha: f64,
    lr_disc: f64,
    lambda: Option<f64>,
}

impl Cell {
    fn run_id(&self) -> String {
        format!("{:03}_{}", self.index, self.objective)
    }
}

fn or_base(list: &[f64], base: f64) -> Vec<f64> {
    if list.is_empty() {
        vec![base]
    } else {
        list.to_vec()
    }
}

fn cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let opt = &cfg.optimizer;
    let Some(g) = &cfg.grid else {
        return Ok(vec![Cell {
            index: 0,
            objective: cfg.objective,
            lr_theta: opt.lr_theta,
            lr_alpha: opt.lr_alpha,
            lr_disc: opt.lr_disc,
            lambda: None,
        }]);
    };
    let objectives = if g.objectives.is_empty() { vec![cfg.objective] } else { g.objectives.clone() };
    let lr_theta = or_base(&g.lr_theta, opt.lr_theta);
    // A single adversary-rate list drives both lr_alpha and lr_disc.
    let (lr_alpha, lr_disc, coupled) = match (g.lr_alpha.is_empty(), g.lr_disc.is_empty()) {
        (false, true) => (g.lr_alpha.clone(), vec![], true),
        (true, false) => (g.lr_disc.clone(), vec![], true),
        _ => (or_base(&g.lr_alpha, opt.lr_alpha), or_base(&g.lr_disc, opt.lr_disc), false),
    };
    let lambdas: Vec<Option<f64>> = if g.lambda.is_empty() { vec![None] } else { g.lambda.iter().map(|l| Some(*l)).collect() };
    // `None` means "same as lr_alpha".
    let disc_axis: Vec<Option<f64>> = if coupled { vec![None] } else { lr_disc.iter().map(|v| Some(*v)).collect() };
    let total = objectives.len() * lr_theta.len() * lr_alpha.len() * disc_axis.len() * lambdas.len();
    if total > g.cap {
        return Err(Error::Config(format!("grid has {total} runs, more than the cap of {}", g.cap)));
    }
    let mut out = Vec::with_capacity(total);
    for &objective in &objectives {
        for &lt in &lr_theta {
            for &la in &lr_alpha {
                for &disc in &disc_axis {
                    for &lambda in &lambdas {
                        let ld = disc.unwrap_or(la);
                        out.push(Cell { index: out.len(), objective, lr_theta: lt, lr_alpha: la, lr_disc: ld, lambda });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

struct Prepared {
    cfg: ExperimentConfig,
    a: PointSet,
    b: PointSet,
    kernel: KernelSpec,
    task: Option<(ToyDaTask, crate::diagnostics::HeldOutLabels)>,
}

impl Prepared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.resolve_seed();
        let (task, a, b) = match cfg.experiment {
            ExperimentKind::ToyDa => {
                let (task, held) = ToyDaTask::shifted_rotated(&cfg.toy_da)?;
                let (a, b) = (task.source.clone(), task.target.clone());
                (Some((task, held)), a, b)
            }
            _ => {
                let (a, b) = cfg.point_sets()?;
                (None, a, b)
            }
        };
        let kernel = cfg.gaussian_kernel(&a, &b)?;
        Ok(Prepared { cfg, a, b, kernel, task })
    }

    fn settings(&self, cell: &Cell) -> (OptimizerConfig, DualSettings, super::PrimalConfig) {
        let mut opt = self.cfg.optimizer.clone();
        opt.lr_theta = cell.lr_theta;
        opt.lr_alpha = cell.lr_alpha;
        opt.lr_disc = cell.lr_disc;
        if opt.snapshot_every.is_none() && self.a.dim() == 2 {
            opt.snapshot_every = Some(opt.trace_every);
        }
        let mut dual = self.cfg.dual.clone();
        let mut primal = self.cfg.primal.clone();
        if let Some(l) = cell.lambda {
            dual.lambda = l;
            primal.lambda = l;
        }
        (opt, dual, primal)
    }

    fn align(&self, cell: &Cell, matcher: &MatcherParams) -> Result<RunOutcome> {
        let (opt, dual, primal) = self.settings(cell);
        let (a, b) = (&self.a, &self.b);
        match cell.objective {
            ObjectiveKind::Primal => run_primal_alignment(a, b, matcher, &opt, &primal.settings(PrimalObjective::Logistic)),
            ObjectiveKind::Wgan => run_primal_alignment(a, b, matcher, &opt, &primal.settings(PrimalObjective::WganGp)),
            ObjectiveKind::DualLinear => run_dual_alignment(a, b, matcher, &KernelSpec::Linear, &opt, &dual),
            ObjectiveKind::DualKernel => run_dual_alignment(a, b, matcher, &self.kernel, &opt, &dual),
            ObjectiveKind::Mmd => run_mmd_alignment(a, b, matcher, &self.kernel, &opt),
        }
    }

    fn method(&self, cell: &Cell) -> AlignMethod {
        let (_, dual, primal) = self.settings(cell);
        match cell.objective {
            ObjectiveKind::Primal => AlignMethod::Primal(primal.settings(PrimalObjective::Logistic)),
            ObjectiveKind::Wgan => AlignMethod::Primal(primal.settings(PrimalObjective::WganGp)),
            ObjectiveKind::DualLinear => AlignMethod::Dual { kernel: KernelSpec::Linear, settings: dual },
            ObjectiveKind::DualKernel => AlignMethod::Dual { kernel: self.kernel, settings: dual },
            ObjectiveKind::Mmd => AlignMethod::Mmd { kernel: self.kernel },
        }
    }

    fn lambda_of(&self, cell: &Cell) -> f64 {
        let (_, dual, primal) = self.settings(cell);
        match cell.objective {
            ObjectiveKind::Primal | ObjectiveKind::Wgan => primal.lambda,
            _ => dual.lambda,
        }
    }

    fn run_cell(&self, cell: &Cell, out: &Path) -> Result<RunRecord> {
        let run_id = cell.run_id();
        let matcher = self.cfg.matcher.identity(self.b.len(), self.b.dim());
        let (trace, final_acc, baseline_acc) = match &self.task {
            None => {
                let run = self.align(cell, &matcher)?;
                self.write_snapshots(&run, &out.join("plots").join(format!("{run_id}_clouds.svg")))?;
                let acc = run.trace.disc_accuracy.last().copied().unwrap_or(f64::NAN);
                (run.trace, acc, None)
            }
            Some((task, held)) => {
                let (opt, _, _) = self.settings(cell);
                let r = toy_da_evaluate(task, held, &matcher, &self.method(cell), &opt)?;
                let dir = out.join("toy_da");
                let mut w = create(&dir.join(format!("{run_id}.csv")))?;
                r.write_csv(&mut w)?;
                w.flush()?;
                let mut w = create(&dir.join(format!("{run_id}_summary.csv")))?;
                r.write_summary_csv(&mut w)?;
                w.flush()?;
                let trace = r.trace.clone().unwrap_or_default();
                (trace, r.final_accuracy(), Some(r.target_accuracy_before))
            }
        };
        let mut w = create(&out.join("traces").join(format!("{run_id}.csv")))?;
        trace.write_csv(&mut w)?;
        w.flush()?;
        write_text(&out.join("plots").join(format!("{run_id}.svg")), &trace_figure(&trace, &run_id))?;
        let (_, dual, _) = self.settings(cell);
        Ok(RunRecord {
            run_id,
            objective: cell.objective,
            lr_theta: cell.lr_theta,
            lr_disc: cell.lr_disc,
            lr_alpha: cell.lr_alpha,
            lambda: self.lambda_of(cell),
            lambda1: dual.lambda1,
            lambda2: dual.lambda2,
            status: trace.status,
            final_cov_gap: trace.cov_gap.last().copied().unwrap_or(f64::NAN),
            cov_gap_ratio: trace.cov_gap_ratio(),
            final_acc,
            baseline_acc,
        })
    }

    /// Point clouds `A`, `B` and `M_θ(B)` at the configured iterations (2-D only).
    fn write_snapshots(&self, run: &RunOutcome, path: &Path) -> Result<()> {
        if self.a.dim() != 2 || run.snapshots.is_empty() {
            return Ok(());
        }
        let to_xy = |p: &PointSet| -> Vec<[f64; 2]> { p.iter().map(|x| [x[0], x[1]]).collect() };
        let a = to_xy(&self.a);
        let b = to_xy(&self.b);
        let mut titles = Vec::new();
        let mut moved = Vec::new();
        for want in self.cfg.snapshot_iters() {
            // Latest snapshot at or before the requested iteration.
            if let Some((t, params)) = run.snapshots.iter().rev().find(|(t, _)| *t <= want) {
                if titles.last() == Some(&format!("iteration {t}")) {
                    continue;
                }
                titles.push(format!("iteration {t}"));
                moved.push(to_xy(&apply(params, &self.b)?));
            }
        }
        let panels: Vec<Vec<Cloud<'_>>> = moved
            .iter()
            .map(|m| vec![Cloud { label: "A", points: &a }, Cloud { label: "B", points: &b }, Cloud { label: "M(B)", points: m }])
            .collect();
        write_text(path, &scatter_panels(&titles, &panels))
    }
}

fn trace_figure(trace: &RunTrace, title: &str) -> String {
    let x: Vec<f64> = trace.iterations.iter().map(|i| *i as f64).collect();
    let objective = format!("{title}: objective");
    line_panels(&[
        Panel { title: &objective, series: vec![Series { label: "objective", x: &x, y: &trace.objective }], log_y: false },
        Panel {
            title: "discriminator accuracy",
            series: vec![Series { label: "accuracy", x: &x, y: &trace.disc_accuracy }],
            log_y: false,
        },
        Panel {
            title: "covariance gap (log10)",
            series: vec![Series { label: "cov_gap", x: &x, y: &trace.cov_gap }],
            log_y: true,
        },
    ])
}

fn rank(records: &[RunRecord], order: &[ObjectiveKind]) -> Vec<ObjectiveRanking> {
    let mut out: Vec<ObjectiveRanking> = order
        .iter()
        .map(|&objective| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.objective == objective).collect();
            ObjectiveRanking {
                objective,
                runs: rs.len(),
                converged: rs.iter().filter(|r| r.status == RunStatus::Converged).count(),
                successes: rs.iter().filter(|r| r.success()).count(),
            }
        })
        .filter(|r| r.runs > 0)
        .collect();
    // Stable sort keeps configuration order among ties.
    out.sort_by(|x, y| {
        y.success_fraction()
            .total_cmp(&x.success_fraction())
            .then(y.converged_fraction().total_cmp(&x.converged_fraction()))
    });
    out
}

fn write_summary(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(SUMMARY_HEADER)?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

fn write_ranking(path: &Path, ranking: &[ObjectiveRanking]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["rank", "objective", "runs", "converged", "successes", "converged_fraction", "success_fraction"])?;
    for (i, r) in ranking.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.objective.to_string(),
            r.runs.to_string(),
            r.converged.to_string(),
            r.successes.to_string(),
            r.converged_fraction().to_string(),
            r.success_fraction().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn execute(cfg: &ExperimentConfig, jobs: usize) -> Result<GridOutcome> {
    let prepared = Prepared::new(cfg)?;
    let cells = cells(&prepared.cfg)?;
    let out = prepared.cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| cells.par_iter().map(|c| prepared.run_cell(c, &out)).collect());
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut order: Vec<ObjectiveKind> = Vec::new();
    for c in &cells {
        if !order.contains(&c.objective) {
            order.push(c.objective);
        }
    }
    let ranking = rank(&records, &order);
    write_summary(&out.join("summary.csv"), &records)?;
    write_ranking(&out.join("ranking.csv"), &ranking)?;
    Ok(GridOutcome { records, ranking })
}

/// Runs the configured experiment. A `[grid]` section, when present, is
/// expanded as in [`compare_grid`]; the saddle experiment writes its
/// trajectory instead of a summary.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<GridOutcome> {
    if cfg.experiment == ExperimentKind::Saddle {
        run_saddle(cfg)?;
        return Ok(GridOutcome { records: vec![], ranking: vec![] });
    }
    execute(cfg, jobs)
}

/// Runs every grid cell for every listed objective and ranks the objectives
/// by success fraction. Requires a `[grid]` section.
pub fn compare_grid(cfg: &ExperimentConfig, jobs: usize) -> Result<GridOutcome> {
    if cfg.grid.is_none() {
        return Err(Error::Config("compare_grid needs a [grid] section".into()));
    }
    if cfg.experiment == ExperimentKind::Saddle {
        return Err(Error::Config("the saddle experiment has no grid".into()));
    }
    execute(cfg, jobs)
}

/// Writes `saddle.csv` (`iter,x,y,r2`), `saddle_trace.csv` and `saddle.svg`.
pub fn run_saddle(cfg: &ExperimentConfig) -> Result<Vec<SaddleState>> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let traj = saddle_trajectory(cfg.saddle.start(), cfg.saddle.steps);
    let mut w = create(&out.join("saddle.csv"))?;
    write_saddle_csv(&mut w, &traj)?;
    w.flush()?;
    let mut trace = saddle_trace(&traj);
    let window = cfg.optimizer.classify.window_for(trace.len());
    trace.status = classify_trace(&trace, window, cfg.optimizer.classify.tol).unwrap_or(RunStatus::MaxIters);
    let mut w = create(&out.join("saddle_trace.csv"))?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    let xy: Vec<[f64; 2]> = traj.iter().map(|s| [s.x, s.y]).collect();
    let title = format!("min_x max_y xy, step {}, {} steps: {}", cfg.saddle.step, cfg.saddle.steps, trace.status);
    write_text(&out.join("saddle.svg"), &trajectory(&title, &xy))?;
    Ok(traj)
}

/// Writes the configured point sets as CSV: `source.csv`, `target.csv` and
/// `union.csv` (with a `label` column). Toy DA tasks also get
/// `source_labels.csv`; target labels are not written.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let prepared = Prepared::new(cfg)?;
    let out = &prepared.cfg.output_dir;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let path = out.join(name);
        let mut w = create(&path)?;
        f(&mut w)?;
        w.flush()?;
        written.push(path);
        Ok(())
    };
    emit("source.csv", &|w| write_pointset_csv(w, &prepared.a))?;
    emit("target.csv", &|w| write_pointset_csv(w, &prepared.b))?;
    let union = make_labeled_union(&prepared.a, &prepared.b)?;
    emit("union.csv", &|w| write_union_csv(w, &union))?;
    if let Some((task, _)) = &prepared.task {
        emit("source_labels.csv", &|w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["label"])?;
            for l in &task.source_labels {
                c.write_record([l.to_string()])?;
            }
            c.flush()?;
            Ok(())
        })?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::super::GridConfig;
    use super::*;

    fn quick(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentKind::SyntheticAlign);
        cfg.output_dir = dir.to_path_buf();
        cfg.source.count = 20;
        cfg.target.count = 20;
        cfg.optimizer.iterations = 40;
        cfg
    }

    #[test]
    fn grid_expansion_couples_adversary_rates() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::SyntheticAlign);
        cfg.grid = Some(GridConfig {
            lr_theta: vec![0.1, 0.2, 0.3],
            lr_alpha: vec![0.01, 0.02, 0.03],
            objectives: vec![ObjectiveKind::DualLinear, ObjectiveKind::Primal],
            ..Default::default()
        });
        let c = cells(&cfg).unwrap();
        assert_eq!(c.len(), 18);
        assert!(c.iter().all(|c| c.lr_alpha == c.lr_disc));
        assert_eq!(c[17].run_id(), "017_primal");
    }

    #[test]
    fn grid_cap_is_enforced() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::SyntheticAlign);
        cfg.grid = Some(GridConfig { lr_theta: vec![0.1; 11], lr_alpha: vec![0.1; 10], cap: 100, ..Default::default() });
        assert!(matches!(cells(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn one_cell_grid_equals_single_run() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let single = run_experiment(&quick(d1.path()), 1).unwrap();
        let mut cfg = quick(d2.path());
        cfg.grid = Some(GridConfig::default());
        let grid = compare_grid(&cfg, 2).unwrap();
        assert_eq!(single, grid);
        let s1 = fs::read(d1.path().join("summary.csv")).unwrap();
        let s2 = fs::read(d2.path().join("summary.csv")).unwrap();
        assert_eq!(s1, s2);
        assert!(d2.path().join("traces/000_dual_linear.csv").exists());
        assert!(d2.path().join("plots/000_dual_linear_clouds.svg").exists());
    }

    #[test]
    fn saddle_demo_files() {
        let d = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Saddle);
        cfg.output_dir = d.path().to_path_buf();
        let traj = run_saddle(&cfg).unwrap();
        assert_eq!(traj.len(), 201);
        let text = fs::read_to_string(d.path().join("saddle.csv")).unwrap();
        assert!(text.starts_with("iter,x,y,r2\n0,1,0,1\n1,1,0.1,"));
        assert!(d.path().join("saddle.svg").exists());
    }

    #[test]
    fn gen_data_writes_both_sets() {
        let d = tempfile::tempdir().unwrap();
        let files = gen_data(&quick(d.path())).unwrap();
        assert_eq!(files.len(), 3);
        let union = fs::read_to_string(d.path().join("union.csv")).unwrap();
        assert_eq!(union.lines().count(), 41);
    }
}
