//! Policy iteration: alternate fitting `z ≈ σᵀv_x` for the current policy
//! (measurability loss on fresh on-policy rollouts) and regressing a new
//! policy onto the Hamiltonian minimizer `−R⁻¹Υᵀz`.
//!
//! Iteration `i` fills the buffer with rollouts of `u⁽ⁱ⁾`, fits `z`, then
//! trains `u` in place so that it becomes `u⁽ⁱ⁺¹⁾`. After every iteration
//! the new policy is rolled out once on the noise-free system.

mod buffer;
mod hamiltonian;
mod plant;
mod train;

pub use buffer::{Buffer, EpochSampler};
pub use hamiltonian::{hamiltonian, hamiltonian_argmin, improvement_target, target_from_z};
pub use plant::{evaluate_deterministic, EnvPlant, ModelPlant, Plant};
pub use train::{
    evaluate_policy, fit_regression, improve_policy, plateaued, regression_loss, TrainConfig,
    TrainHistory,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::approximators::{Adam, MlpBn, MlpBnConfig, ParamFn};
use crate::error::{check_dim, Error, Result};
use crate::problems::CostSpec;
use crate::sde_core::{NoiseScheme, SamplingMode, SeedStreams, StreamDomain, TimeGrid, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PIConfig {
    pub iterations: usize,
    pub rollouts: usize,
    pub buffer_capacity: usize,
    pub horizon: f64,
    pub dt: f64,
    pub mode: SamplingMode,
    pub sigma0: f64,
    pub evaluation: TrainConfig,
    pub improvement: TrainConfig,
    pub network: MlpBnConfig,
    /// Set by the caller; not part of the serialized form.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for PIConfig {
    fn default() -> Self {
        Self {
            iterations: 4,
            rollouts: 12800,
            buffer_capacity: 12800,
            horizon: 1.0,
            dt: 0.01,
            mode: SamplingMode::ModelBased,
            sigma0: 1.414,
            evaluation: TrainConfig::default(),
            improvement: TrainConfig::default(),
            network: MlpBnConfig::default(),
            seed: 0,
        }
    }
}

impl PIConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rollouts == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("rollouts and buffer capacity must be positive".into()));
        }
        if self.rollouts > self.buffer_capacity {
            return Err(Error::Config(format!(
                "{} rollouts per iteration exceed buffer capacity {}",
                self.rollouts, self.buffer_capacity
            )));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Config(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        self.grid()?;
        self.evaluation.validate()?;
        self.improvement.validate()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::from_step(self.horizon, self.dt).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scheme(&self) -> Result<NoiseScheme> {
        NoiseScheme::new(self.mode, self.sigma0)
    }
}

/// Outcome of one outer iteration. Iteration 0 is the initial policy.
#[derive(Clone, Debug)]
pub struct IterationReport {
    pub iteration: usize,
    pub eval_loss: Option<f64>,
    pub eval_steps: usize,
    pub improve_loss: Option<f64>,
    pub improve_steps: usize,
    /// Noise-free rollout of the policy produced by this iteration.
    pub rollout: Trajectory,
}

impl IterationReport {
    pub fn cost(&self) -> f64 {
        self.rollout.total_cost()
    }

    pub fn cost_to_go(&self) -> Vec<f64> {
        self.rollout.cost_to_go()
    }

    pub fn terminal_state(&self) -> &DVector<f64> {
        self.rollout.terminal_state()
    }
}

pub struct PIOutcome<Z, U> {
    pub reports: Vec<IterationReport>,
    pub z: Z,
    pub u: U,
}

/// Runs policy iteration with `MlpBn` approximators; `u⁽⁰⁾ ≡ 0`.
pub fn run_policy_iteration<S: Plant + ?Sized>(
    cfg: &PIConfig,
    cost: &CostSpec,
    plant: &S,
) -> Result<PIOutcome<MlpBn, MlpBn>> {
    let streams = SeedStreams::new(cfg.seed);
    let dim_in = 1 + plant.dim_x();
    let dim_w = cfg.scheme()?.dim_w(plant.dim_x(), plant.dim_u());
    let z = MlpBn::new(dim_in, dim_w, cfg.network, &mut streams.rng(StreamDomain::Init, 0));
    let u = MlpBn::zero_output(
        dim_in,
        plant.dim_u(),
        cfg.network,
        &mut streams.rng(StreamDomain::Init, 1),
    );
    run_policy_iteration_with(cfg, cost, plant, z, u)
}

/// Runs policy iteration from the given approximators; `u` is the initial
/// policy and is trained in place across iterations.
pub fn run_policy_iteration_with<S, Z, U>(
    cfg: &PIConfig,
    cost: &CostSpec,
    plant: &S,
    mut z: Z,
    mut u: U,
) -> Result<PIOutcome<Z, U>>
where
    S: Plant + ?Sized,
    Z: ParamFn,
    U: ParamFn,
{
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let grid = cfg.grid()?;
    let (dim_x, dim_u) = (plant.dim_x(), plant.dim_u());
    check_dim("control weight", dim_u, cost.dim_u())?;
    check_dim("z input", 1 + dim_x, z.input_dim())?;
    check_dim("z output", scheme.dim_w(dim_x, dim_u), z.output_dim())?;
    check_dim("policy input", 1 + dim_x, u.input_dim())?;
    check_dim("policy output", dim_u, u.output_dim())?;
    if scheme.mode == SamplingMode::ModelBased && plant.model().is_none() {
        return Err(Error::Config("model-based sampling requires a model".into()));
    }
    let streams = SeedStreams::new(cfg.seed);

    let mut reports = vec![IterationReport {
        iteration: 0,
        eval_loss: None,
        eval_steps: 0,
        improve_loss: None,
        improve_steps: 0,
        rollout: plant.deterministic(&u, cost, &grid)?,
    }];
    let mut buffer = Buffer::new(cfg.buffer_capacity)?;
    for i in 0..cfg.iterations {
        let trajs = plant.rollouts(
            &scheme,
            &u,
            cost,
            &grid,
            &streams,
            StreamDomain::Rollout,
            (i * cfg.rollouts) as u64,
            cfg.rollouts,
        )?;
        buffer.fill(i, trajs)?;

        buffer.require_generation(i)?;
        let mut z_opt = Adam::new(cfg.evaluation.adam, z.num_params());
        let eval = evaluate_policy(
            &buffer,
            &mut z,
            &mut z_opt,
            &cfg.evaluation,
            streams.rng(StreamDomain::Shuffle, 2 * i as u64),
        )?;

        buffer.require_generation(i)?;
        let mut u_opt = Adam::new(cfg.improvement.adam, u.num_params());
        let improve = improve_policy(
            &buffer,
            &mut z,
            &mut u,
            &mut u_opt,
            &scheme,
            plant.model(),
            cost,
            &cfg.improvement,
            streams.rng(StreamDomain::Shuffle, 2 * i as u64 + 1),
        )?;

        reports.push(IterationReport {
            iteration: i + 1,
            eval_loss: eval.final_loss(),
            eval_steps: eval.steps(),
            improve_loss: improve.final_loss(),
            improve_steps: improve.steps(),
            rollout: plant.deterministic(&u, cost, &grid)?,
        });
    }
    Ok(PIOutcome { reports, z, u })
}
