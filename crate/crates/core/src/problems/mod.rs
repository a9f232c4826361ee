//! Cost functionals and the concrete benchmark problems.

mod cost;
mod example1;
mod lq;
mod pendulum;

pub use cost::CostSpec;
pub use example1::{
    example1_cost, example1_model, example1_rollouts, example1_scheme, example1_true_solution, example1_yerr,
    example1_zerr, theta_star_y, theta_star_z, Example1Spec, Parameterization,
};
pub use lq::ScalarLq;
pub use pendulum::{
    pendulum_cost, pendulum_cost_with, pendulum_x0, PendulumCostParams, PendulumModel,
};
