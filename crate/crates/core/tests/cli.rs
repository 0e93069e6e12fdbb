use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dual-align"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn saddle_demo_writes_trajectory() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("s");
    let o = run(&["saddle-demo", "--steps", "50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("saddle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 52);
    assert!(fs::read_to_string(out.join("saddle.svg")).unwrap().starts_with("<svg"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let r2: f64 = stdout.lines().next().unwrap().trim_start_matches("final r2 = ").parse().unwrap();
    assert!((r2 - 1.01f64.powi(50)).abs() < 1e-12);
}

#[test]
fn run_with_overrides_writes_all_outputs() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"synthetic_align\"\nobjective = \"mmd\"\n");
    let out = d.path().join("o");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--iterations", "30", "--objective", "dual_kernel", "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with(
        "run_id,objective,lr_theta,lr_disc,lr_alpha,lambda,lambda1,lambda2,status,final_cov_gap,cov_gap_ratio,final_acc\n"
    ));
    assert!(summary.contains("000_dual_kernel,dual_kernel,"));
    let trace = fs::read_to_string(out.join("traces/000_dual_kernel.csv")).unwrap();
    assert!(trace.lines().last().unwrap().starts_with("30,"));
    assert!(out.join("plots/000_dual_kernel.svg").exists());
    assert!(out.join("plots/000_dual_kernel_clouds.svg").exists());
    assert!(out.join("ranking.csv").exists());
}

#[test]
fn diverged_runs_are_reported_not_errors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"synthetic_align\"\nobjective = \"wgan\"\n[optimizer]\niterations = 200\n");
    let out = d.path().join("o");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--lr-theta", "1e6", "--lr-disc", "1e6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().contains(",diverged,"), "{summary}");
}

#[test]
fn grid_ranks_objectives() {
    let d = tempfile::tempdir().unwrap();
    let body = "experiment = \"synthetic_align\"\n[optimizer]\niterations = 40\n[grid]\nlr_theta = [0.001, 0.002]\nlr_alpha = [0.001]\nobjectives = [\"dual_linear\", \"primal\"]\n";
    let cfg = write_config(d.path(), body);
    let out = d.path().join("g");
    let o = run(&["grid", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 5);
    let ranking = fs::read_to_string(out.join("ranking.csv")).unwrap();
    assert!(ranking.starts_with("rank,objective,runs,converged,successes,converged_fraction,success_fraction\n"));
    assert_eq!(ranking.lines().count(), 3);
}

#[test]
fn grid_without_section_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"synthetic_align\"\n");
    let o = run(&["grid", "--config", &cfg, "--out", d.path().join("g").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid"));
}

#[test]
fn config_errors_exit_1_with_location() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"synthetic_align\"\n\n[optimizer]\nlr_theta = -1.0\n");
    let o = run(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("{cfg}:4:")), "{}", stderr(&o));

    let cfg = write_config(d.path(), "experiment = \"nope\"\n");
    let o = run(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":1:"), "{}", stderr(&o));

    let cfg = write_config(d.path(), "experiment = \"synthetic_align\"\n");
    let o = run(&["run", "--config", &cfg, "--iterations", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("iterations"), "{}", stderr(&o));
}

#[test]
fn io_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["run", "--config", d.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(d.path(), "experiment = \"saddle\"\n");
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["run", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn gen_data_writes_point_sets() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "experiment = \"toy_da\"\n[toy_da]\ncount = 30\n");
    let out = d.path().join("data");
    let o = run(&["gen-data", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["source.csv", "target.csv", "union.csv", "source_labels.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(out.join("source_labels.csv")).unwrap().lines().count(), 31);
}
