use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problems::CostSpec;
use crate::sde_core::{
    rollout_batch_model_based, rollout_batch_model_free, simulate_model_based,
    simulate_model_free, BlackBoxEnv, ControlAffineModel, NoiseScheme, Policy, SamplingMode,
    SeedStreams, StreamDomain, TimeGrid, Trajectory,
};

/// The system policy iteration interacts with.
pub trait Plant: Sync {
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;

    /// White-box dynamics, if available.
    fn model(&self) -> Option<&dyn ControlAffineModel>;

    /// Exploratory rollouts of `policy` under `scheme`; rollout `i` uses
    /// stream `(domain, first_index + i)`.
    #[allow(clippy::too_many_arguments)]
    fn rollouts(
        &self,
        scheme: &NoiseScheme,
        policy: &dyn Policy,
        cost: &CostSpec,
        grid: &TimeGrid,
        streams: &SeedStreams,
        domain: StreamDomain,
        first_index: u64,
        count: usize,
    ) -> Result<Vec<Trajectory>>;

    /// Noise-free rollout of `policy`.
    fn deterministic(&self, policy: &dyn Policy, cost: &CostSpec, grid: &TimeGrid)
        -> Result<Trajectory>;
}

/// Known `F`, `G` and initial state.
pub struct ModelPlant<M> {
    pub model: M,
    pub x0: DVector<f64>,
}

impl<M: ControlAffineModel> ModelPlant<M> {
    pub fn new(model: M, x0: DVector<f64>) -> Result<Self> {
        crate::error::check_dim("initial state", model.dim_x(), x0.len())?;
        Ok(Self { model, x0 })
    }
}

impl<M: ControlAffineModel> Plant for ModelPlant<M> {
    fn dim_x(&self) -> usize {
        self.model.dim_x()
    }

    fn dim_u(&self) -> usize {
        self.model.dim_u()
    }

    fn model(&self) -> Option<&dyn ControlAffineModel> {
        Some(&self.model)
    }

    fn rollouts(
        &self,
        scheme: &NoiseScheme,
        policy: &dyn Policy,
        cost: &CostSpec,
        grid: &TimeGrid,
        streams: &SeedStreams,
        domain: StreamDomain,
        first_index: u64,
        count: usize,
    ) -> Result<Vec<Trajectory>> {
        rollout_batch_model_based(
            &self.model, scheme, policy, cost, grid, &self.x0, streams, domain, first_index,
            count,
        )
    }

    fn deterministic(
        &self,
        policy: &dyn Policy,
        cost: &CostSpec,
        grid: &TimeGrid,
    ) -> Result<Trajectory> {
        evaluate_deterministic(&self.model, policy, cost, grid, &self.x0)
    }
}

/// A black-box simulator; only model-free sampling is possible.
pub struct EnvPlant<E> {
    pub env: E,
}

impl<E: BlackBoxEnv + Clone + Sync> Plant for EnvPlant<E> {
    fn dim_x(&self) -> usize {
        self.env.dim_x()
    }

    fn dim_u(&self) -> usize {
        self.env.dim_u()
    }

    fn model(&self) -> Option<&dyn ControlAffineModel> {
        None
    }

    fn rollouts(
        &self,
        scheme: &NoiseScheme,
        policy: &dyn Policy,
        cost: &CostSpec,
        grid: &TimeGrid,
        streams: &SeedStreams,
        domain: StreamDomain,
        first_index: u64,
        count: usize,
    ) -> Result<Vec<Trajectory>> {
        if scheme.mode != SamplingMode::ModelFree {
            return Err(Error::InvalidArgument(
                "a black-box environment supports only model-free sampling".into(),
            ));
        }
        rollout_batch_model_free(
            &self.env, scheme.sigma0, policy, cost, grid, streams, domain, first_index, count,
        )
    }

    fn deterministic(
        &self,
        policy: &dyn Policy,
        cost: &CostSpec,
        grid: &TimeGrid,
    ) -> Result<Trajectory> {
        let mut env = self.env.clone();
        // increments are drawn but multiplied by σ₀ = 0
        let mut rng = SeedStreams::new(0).rng(StreamDomain::Custom(0), 0);
        simulate_model_free(&mut env, 0.0, policy, cost, grid, &mut rng)
    }
}

/// Euler rollout of the noise-free system under `policy`.
pub fn evaluate_deterministic<M, P>(
    model: &M,
    policy: &P,
    cost: &CostSpec,
    grid: &TimeGrid,
    x0: &DVector<f64>,
) -> Result<Trajectory>
where
    M: ControlAffineModel + ?Sized,
    P: Policy + ?Sized,
{
    let scheme = NoiseScheme::new(SamplingMode::ModelBased, 0.0)?;
    let mut rng = SeedStreams::new(0).rng(StreamDomain::Custom(0), 0);
    simulate_model_based(model, &scheme, policy, cost, grid, x0, &mut rng)
}
