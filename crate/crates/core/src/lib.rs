//! Policy evaluation for control-affine stochastic systems by minimizing the
//! variance of a backward-integrated value process (the *measurability loss*),
//! and a policy-iteration loop built on top of it.
//!
//! Modules:
//! - [`sde_core`]: time grids, Brownian increments, Euler–Maruyama rollouts in
//!   the state-noise and control-noise sampling modes, black-box environments.
//! - [`problems`]: cost functionals, the quadratic Brownian benchmark with its
//!   closed-form error criteria, the pendulum swing-up model, a scalar LQ model.
//! - [`approximators`]: trainable functions of `(t, x)` with hand-written
//!   gradients and the Adam optimizer.
//! - [`losses`]: measurability, Deep BSDE and martingale losses and Monte-Carlo
//!   error criteria.
//! - [`policy_iteration`]: buffer, evaluation/improvement loops, outer iteration.
//! - [`cli_reports`]: configuration, experiment drivers and CSV output.

pub mod approximators;
pub mod cli_reports;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod policy_iteration;
pub mod problems;
pub mod sde_core;

pub use error::{Error, Result};
