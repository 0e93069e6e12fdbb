use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dual_align::cli::{
    compare_grid, gen_data, load_config, run_experiment, run_saddle, ExperimentConfig, ExperimentKind, LoadError,
    ObjectiveKind,
};
use dual_align::Error;

/// Dual adversarial distribution alignment experiments.
#[derive(Parser)]
#[command(name = "dual-align", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Run every cell of the config's [grid] and rank the objectives.
    Grid(RunArgs),
    /// Simulate gradient descent-ascent on min_x max_y xy.
    SaddleDemo(SaddleArgs),
    /// Write the configured point sets as CSV.
    GenData(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for grid runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the top-level `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `objective`.
    #[arg(long, value_parser = parse_objective)]
    objective: Option<ObjectiveKind>,
    /// Overrides `optimizer.iterations`.
    #[arg(long)]
    iterations: Option<usize>,
    /// Overrides `optimizer.lr_theta`.
    #[arg(long)]
    lr_theta: Option<f64>,
    /// Overrides `optimizer.lr_alpha`.
    #[arg(long)]
    lr_alpha: Option<f64>,
    /// Overrides `optimizer.lr_disc`.
    #[arg(long)]
    lr_disc: Option<f64>,
    /// Overrides `dual.lambda` and `primal.lambda`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Overrides `kernel.bandwidth`.
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Args)]
struct SaddleArgs {
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    y0: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_objective(s: &str) -> Result<ObjectiveKind, String> {
    ObjectiveKind::parse(s).ok_or_else(|| format!("unknown objective `{s}`"))
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, LoadError> {
        let mut cfg = load_config(&self.config)?;
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if let Some(o) = self.objective {
            cfg.objective = o;
        }
        if let Some(n) = self.iterations {
            cfg.optimizer.iterations = n;
        }
        if let Some(v) = self.lr_theta {
            cfg.optimizer.lr_theta = v;
        }
        if let Some(v) = self.lr_alpha {
            cfg.optimizer.lr_alpha = v;
        }
        if let Some(v) = self.lr_disc {
            cfg.optimizer.lr_disc = v;
        }
        if let Some(v) = self.lambda {
            cfg.dual.lambda = v;
            cfg.primal.lambda = v;
        }
        if self.bandwidth.is_some() {
            cfg.kernel.bandwidth = self.bandwidth;
        }
        cfg.validate().map_err(|(key, message)| {
            LoadError::Config(dual_align::cli::ConfigError {
                path: format!("{} (after command-line overrides, key `{key}`)", self.config.display()),
                line: None,
                message,
            })
        })?;
        Ok(cfg)
    }
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Io(_) | Error::Csv(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn report(result: Result<dual_align::cli::GridOutcome, Error>, out: &std::path::Path) -> ExitCode {
    match result {
        Ok(g) => {
            for r in &g.ranking {
                println!(
                    "{:<12} runs {:>3}  converged {:>3}  successes {:>3}  success_fraction {:.3}",
                    r.objective.as_str(),
                    r.runs,
                    r.converged,
                    r.successes,
                    r.success_fraction()
                );
            }
            println!("outputs written to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let loaded = |args: &RunArgs| match args.load() {
        Ok(c) => Ok(c),
        Err(e) => {
            eprintln!("error: {e}");
            Err(match e {
                LoadError::Config(_) => ExitCode::from(1),
                LoadError::Io(_) => ExitCode::from(2),
            })
        }
    };
    match cli.command {
        Command::Run(args) => match loaded(&args) {
            Ok(cfg) => report(run_experiment(&cfg, args.jobs), &cfg.output_dir),
            Err(code) => code,
        },
        Command::Grid(args) => match loaded(&args) {
            Ok(cfg) => report(compare_grid(&cfg, args.jobs), &cfg.output_dir),
            Err(code) => code,
        },
        Command::GenData(args) => match loaded(&args) {
            Ok(cfg) => match gen_data(&cfg) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            },
            Err(code) => code,
        },
        Command::SaddleDemo(args) => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Saddle);
            cfg.saddle.step = args.step;
            cfg.saddle.steps = args.steps;
            cfg.saddle.x0 = args.x0;
            cfg.saddle.y0 = args.y0;
            cfg.output_dir = args.out;
            if let Err((_, msg)) = cfg.validate() {
                eprintln!("error: {msg}");
                return ExitCode::from(1);
            }
            match run_saddle(&cfg) {
                Ok(traj) => {
                    let last = traj.last().expect("trajectory includes the start");
                    println!("final r2 = {}", last.radius_sq());
                    println!("outputs written to {}", cfg.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
    }
}
