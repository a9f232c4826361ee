//! Command-line drivers: configuration, the three experiments and their CSV
//! output.
//!
//! Configuration is resolved in three layers: built-in defaults, then an
//! optional JSON file (`--config`), then command-line flags. Every struct in
//! the file is optional and unknown keys are rejected.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! divergence, 3 verification failure.

mod example1;
mod output;

pub use example1::{train_example1, Example1Config, Example1Run, LossKind, StepRecord};
pub use output::{
    write_example1_steps, write_example1_summary, write_gradcheck, write_iteration_reports,
    write_rollout_traces,
};

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::approximators::write_snapshot;
use crate::error::{Error, Result};
use crate::gradcheck::{run_gradient_suite, GradCheck};
use crate::policy_iteration::{
    run_policy_iteration, EnvPlant, IterationReport, ModelPlant, PIConfig,
};
use crate::problems::{pendulum_cost_with, pendulum_x0, Parameterization, PendulumCostParams, PendulumModel};
use crate::sde_core::{euler_env_from_model, SamplingMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Example1,
    Pendulum,
    Gradcheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub example1: Example1Config,
    /// `pendulum.seed` is not read from the file; the top-level seed is used.
    pub pendulum: PIConfig,
    pub pendulum_cost: PendulumCostParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Example1,
            seed: 0,
            out_dir: PathBuf::from("out"),
            example1: Example1Config::default(),
            pendulum: PIConfig::default(),
            pendulum_cost: PendulumCostParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Parser)]
#[command(name = "bsde-ml", version, about = "Measurability-loss policy evaluation and policy iteration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the one-parameter families of the quadratic Brownian benchmark.
    Example1(Example1Args),
    /// Policy iteration on the pendulum swing-up.
    Pendulum(PendulumArgs),
    /// Finite-difference check of every approximator/loss gradient.
    Gradcheck(CommonArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct Example1Args {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dimension; repeat for several.
    #[arg(long = "n")]
    pub n: Vec<usize>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub param: Option<Parameterization>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct PendulumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub mode: Option<SamplingMode>,
    /// Outer policy-iteration steps.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Buffer capacity in trajectories.
    #[arg(long)]
    pub buffer: Option<usize>,
    /// Rollouts per iteration.
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// Minibatch size for both inner loops.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Step budget for both inner loops.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Learning rate for both networks.
    #[arg(long)]
    pub lr: Option<f64>,
}

fn base_config(common: &CommonArgs, experiment: Experiment) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.experiment = experiment;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

/// Layers defaults, the config file and flags into one configuration.
pub fn resolve_config(command: &Command) -> Result<RunConfig> {
    match command {
        Command::Example1(a) => {
            let mut cfg = base_config(&a.common, Experiment::Example1)?;
            let e = &mut cfg.example1;
            if !a.n.is_empty() {
                e.n = a.n.clone();
            }
            if let Some(v) = a.loss {
                e.loss = v;
            }
            if let Some(v) = a.param {
                e.parameterization = v;
            }
            if let Some(v) = a.steps {
                e.steps = v;
            }
            if let Some(v) = a.batch {
                e.batch = v;
            }
            if let Some(v) = a.lr {
                e.lr = v;
            }
            if let Some(v) = a.dt {
                e.dt = v;
            }
            if let Some(v) = a.horizon {
                e.horizon = v;
            }
            Ok(cfg)
        }
        Command::Pendulum(a) => {
            let mut cfg = base_config(&a.common, Experiment::Pendulum)?;
            let p = &mut cfg.pendulum;
            if let Some(v) = a.mode {
                p.mode = v;
            }
            if let Some(v) = a.iters {
                p.iterations = v;
            }
            if let Some(v) = a.sigma0 {
                p.sigma0 = v;
            }
            if let Some(v) = a.buffer {
                p.buffer_capacity = v;
            }
            if let Some(v) = a.rollouts {
                p.rollouts = v;
            }
            for t in [&mut p.evaluation, &mut p.improvement] {
                if let Some(v) = a.batch {
                    t.batch_size = v;
                }
                if let Some(v) = a.steps {
                    t.max_steps = v;
                }
                if let Some(v) = a.lr {
                    t.adam.lr = v;
                }
            }
            Ok(cfg)
        }
        Command::Gradcheck(c) => base_config(c, Experiment::Gradcheck),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Trains every configured dimension and writes per-step and summary CSVs.
pub fn cmd_example1(cfg: &RunConfig) -> Result<Vec<Example1Run>> {
    let e = &cfg.example1;
    e.validate()?;
    let stem = format!("example1_{}_{}", e.loss, e.parameterization);
    let mut runs = Vec::new();
    for &n in &e.n {
        let started = Instant::now();
        let run = train_example1(e, n, cfg.seed)?;
        write_example1_steps(create(&cfg.out_dir, &format!("{stem}_n{n}.csv"))?, &run)?;
        eprintln!(
            "example1 {} {} n={n}: theta={} target={} ({:.1?})",
            e.loss,
            e.parameterization,
            run.final_theta,
            run.target_theta,
            started.elapsed()
        );
        runs.push(run);
    }
    write_example1_summary(
        create(&cfg.out_dir, &format!("{stem}_summary.csv"))?,
        &e.loss.to_string(),
        &e.parameterization.to_string(),
        &runs,
    )?;
    Ok(runs)
}

/// Runs policy iteration on the pendulum and writes iteration reports,
/// noise-free rollout traces and the final policy parameters.
pub fn cmd_pendulum(cfg: &RunConfig) -> Result<Vec<IterationReport>> {
    let pi = PIConfig {
        seed: cfg.seed,
        ..cfg.pendulum.clone()
    };
    pi.validate()?;
    let cost = pendulum_cost_with(cfg.pendulum_cost)
        .map_err(|e| Error::Config(e.to_string()))?;
    let started = Instant::now();
    let outcome = match pi.mode {
        SamplingMode::ModelBased => {
            let plant = ModelPlant::new(PendulumModel::default(), pendulum_x0())?;
            run_policy_iteration(&pi, &cost, &plant)?
        }
        SamplingMode::ModelFree => {
            let plant = EnvPlant {
                env: euler_env_from_model(PendulumModel::default(), pendulum_x0()),
            };
            run_policy_iteration(&pi, &cost, &plant)?
        }
    };
    let stem = format!("pendulum_{}", pi.mode);
    write_iteration_reports(create(&cfg.out_dir, &format!("{stem}_iterations.csv"))?, &outcome.reports)?;
    write_rollout_traces(create(&cfg.out_dir, &format!("{stem}_rollouts.csv"))?, &outcome.reports)?;
    write_snapshot(create(&cfg.out_dir, &format!("{stem}_policy.txt"))?, &outcome.u)?;
    for r in &outcome.reports {
        eprintln!("pendulum {} iteration {}: cost {}", pi.mode, r.iteration, r.cost());
    }
    eprintln!("pendulum {}: {:.1?}", pi.mode, started.elapsed());
    Ok(outcome.reports)
}

/// Runs the gradient suite and writes `gradcheck.csv`.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<Vec<GradCheck>> {
    let checks = run_gradient_suite(cfg.seed)?;
    write_gradcheck(create(&cfg.out_dir, "gradcheck.csv")?, &checks)?;
    for c in &checks {
        println!(
            "{} {:<14} {:<48} max rel err {:e}",
            if c.passed() { "ok  " } else { "FAIL" },
            c.loss,
            c.arch,
            c.max_rel_error
        );
    }
    Ok(checks)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SimulationDiverged { .. } | Error::TrainingDiverged { .. } => EXIT_DIVERGED,
        _ => EXIT_USAGE,
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = resolve_config(&cli.command).and_then(|cfg| match cfg.experiment {
        Experiment::Example1 => cmd_example1(&cfg).map(|_| EXIT_OK),
        Experiment::Pendulum => cmd_pendulum(&cfg).map(|_| EXIT_OK),
        Experiment::Gradcheck => cmd_gradcheck(&cfg).map(|checks| {
            if checks.iter().all(GradCheck::passed) {
                EXIT_OK
            } else {
                EXIT_VERIFICATION
            }
        }),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
