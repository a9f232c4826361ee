//! Time discretization, Brownian sampling and Euler–Maruyama rollouts.
//!
//! Two ways of injecting exploration noise are supported. With
//! [`SamplingMode::ModelBased`] the state is perturbed directly by
//! `σ₀·dW` and the full drift `F + G·u` must be known. With
//! [`SamplingMode::ModelFree`] the noise enters through the control,
//! `u + σ₀·dW/dt`, so any opaque stepper ([`BlackBoxEnv`]) can be used.

mod brownian;
mod env;
mod grid;
mod model;
mod simulate;
mod traj_csv;

pub use brownian::{sample_brownian, BrownianIncrements, SeedStreams, StreamDomain};
pub use env::{euler_env_from_model, BlackBoxEnv, EulerEnv};
pub use grid::{make_grid, TimeGrid};
pub use model::{
    ControlAffineModel, FnPolicy, LinearModel, NoiseScheme, Policy, SamplingMode, ZeroDynamics, ZeroPolicy,
};
pub use simulate::{
    rollout_batch_model_based, rollout_batch_model_free, simulate_model_based,
    simulate_model_based_with, simulate_model_free, simulate_model_free_with, Trajectory,
    DIVERGENCE_BOUND,
};
pub use traj_csv::{trajectory_csv_header, write_trajectories_csv};
