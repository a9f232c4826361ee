use serde::{Deserialize, Serialize};

use crate::approximators::{Adam, AdamConfig, Mode};
use crate::error::{Error, Result};
use crate::losses::{deep_bsde_loss, martingale_loss, measurability_loss, LossReport};
use crate::problems::{example1_rollouts, Example1Spec, Parameterization};
use crate::sde_core::{SeedStreams, StreamDomain, TimeGrid, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Measurability,
    DeepBsde,
    Martingale,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Measurability => "measurability",
            LossKind::DeepBsde => "deep-bsde",
            LossKind::Martingale => "martingale",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "measurability" => Ok(LossKind::Measurability),
            "deep-bsde" => Ok(LossKind::DeepBsde),
            "martingale" => Ok(LossKind::Martingale),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Config {
    /// Dimensions to train, one run each.
    pub n: Vec<usize>,
    pub horizon: f64,
    pub dt: f64,
    pub loss: LossKind,
    pub parameterization: Parameterization,
    pub theta0: f64,
    /// Initial guess for the Deep BSDE starting value.
    pub y0_db0: f64,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Fixed held-out trajectories for the validation loss.
    pub validation_batch: usize,
}

impl Default for Example1Config {
    fn default() -> Self {
        Self {
            n: vec![1],
            horizon: 0.5,
            dt: 0.01,
            loss: LossKind::Measurability,
            parameterization: Parameterization::WellSpecified,
            theta0: 0.5,
            y0_db0: 1.0,
            steps: 2000,
            batch: 32,
            lr: 0.01,
            validation_batch: 256,
        }
    }
}

impl Example1Config {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::Config("n must list positive dimensions".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        let min_batch = if self.loss == LossKind::Measurability { 2 } else { 1 };
        if self.batch < min_batch || self.validation_batch < min_batch {
            return Err(Error::Config(format!(
                "{} loss needs batches of at least {min_batch}",
                self.loss
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} is invalid", self.lr)));
        }
        if !(self.theta0.is_finite() && self.y0_db0.is_finite()) {
            return Err(Error::Config("initial values must be finite".into()));
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::from_step(self.horizon, self.dt).map_err(|e| Error::Config(e.to_string()))
    }

    /// Limit of the selected loss: 1 when well specified, otherwise the
    /// closed-form minimizer of the Z-error (or Y-error for the martingale loss).
    pub fn target_theta(&self, n: usize) -> Result<f64> {
        let spec = Example1Spec::new(n, self.horizon, self.parameterization)?;
        Ok(match (self.parameterization, self.loss) {
            (Parameterization::WellSpecified, _) => 1.0,
            (Parameterization::Misspecified, LossKind::Martingale) => spec.theta_star_y(),
            (Parameterization::Misspecified, _) => spec.theta_star_z(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub theta: f64,
    pub y0_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example1Run {
    pub n: usize,
    pub records: Vec<StepRecord>,
    pub final_theta: f64,
    pub final_y0_db: Option<f64>,
    pub target_theta: f64,
}

impl Example1Run {
    pub fn abs_error(&self) -> f64 {
        (self.final_theta - self.target_theta).abs()
    }
}

fn loss_at(
    cfg: &Example1Config,
    spec: &Example1Spec,
    batch: &[&Trajectory],
    params: &[f64],
) -> Result<LossReport> {
    match cfg.loss {
        LossKind::Measurability => {
            measurability_loss(batch, &mut spec.z_family(params[0]), Mode::Train)
        }
        LossKind::DeepBsde => {
            deep_bsde_loss(batch, &mut spec.z_family(params[0]), params[1], Mode::Train)
        }
        LossKind::Martingale => martingale_loss(batch, &mut spec.y_family(params[0]), Mode::Train),
    }
}

/// Trains the one-parameter family for dimension `n`, drawing a fresh batch
/// every step.
pub fn train_example1(cfg: &Example1Config, n: usize, seed: u64) -> Result<Example1Run> {
    cfg.validate()?;
    let spec = Example1Spec::new(n, cfg.horizon, cfg.parameterization)?;
    let grid = cfg.grid()?;
    let streams = SeedStreams::new(seed);
    let validation = example1_rollouts(
        n,
        &grid,
        &streams,
        StreamDomain::Validation,
        0,
        cfg.validation_batch,
    )?;
    let validation: Vec<&Trajectory> = validation.iter().collect();

    let mut params = vec![cfg.theta0];
    if cfg.loss == LossKind::DeepBsde {
        params.push(cfg.y0_db0);
    }
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr), params.len());
    let mut records = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = example1_rollouts(
            n,
            &grid,
            &streams,
            StreamDomain::Rollout,
            (step * cfg.batch) as u64,
            cfg.batch,
        )?;
        let batch: Vec<&Trajectory> = batch.iter().collect();
        let train = loss_at(cfg, &spec, &batch, &params)?;
        let val = loss_at(cfg, &spec, &validation, &params)?;
        if !train.loss.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        records.push(StepRecord {
            step,
            train_loss: train.loss,
            val_loss: val.loss,
            theta: params[0],
            y0_db: params.get(1).copied(),
        });
        let mut grad = train.grad;
        grad.extend(train.grad_y0_db);
        opt.step(&mut params, &grad)?;
    }
    if !params.iter().all(|p| p.is_finite()) {
        return Err(Error::TrainingDiverged { step: cfg.steps });
    }
    Ok(Example1Run {
        n,
        records,
        final_theta: params[0],
        final_y0_db: params.get(1).copied(),
        target_theta: cfg.target_theta(n)?,
    })
}
