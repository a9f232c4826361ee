//! Losses for fitting the BSDE solution along sampled trajectories.
//!
//! All three losses share one discretization. For a trajectory with
//! increments `dW_j` and running costs `g_j`,
//!
//! ```text
//! y₀^θ = φ(X_H) + Σ_j g_j·dt − Σ_j ⟨z^θ(t_j, X_j), dW_j⟩        (j = 0..H-1)
//! ```
//!
//! - measurability loss: population variance of `y₀^θ` over the batch;
//! - Deep BSDE loss: mean of `|y_T^{θ,DB} − φ(X_H)|²` where `y_T^{θ,DB}` is
//!   integrated forward from a trainable initial guess;
//! - martingale loss: regression of a value function `y(t, x)` onto the
//!   realized cost-to-go, weighted by `dt`.
//!
//! On any batch, `DB(θ, c) = (c − mean y₀^θ)² + Var_B(y₀^θ)` holds exactly.

mod criteria;

pub use criteria::{yerr_mc, yerr_samples, zerr_mc, zerr_samples};

use nalgebra::{DMatrix, DVector};

use crate::approximators::{Mode, ParamFn};
use crate::error::{check_dim, Error, Result};
use crate::sde_core::Trajectory;

/// Decomposition of one `y₀^θ` estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Y0Sample {
    pub terminal: f64,
    pub cost_sum: f64,
    pub stoch_sum: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Derivative with respect to the Deep BSDE initial guess.
    pub grad_y0_db: Option<f64>,
    pub batch_size: usize,
}

/// Rows `(t_k, X_k^i)` for `k < H`, trajectory-major.
pub fn grid_inputs(batch: &[&Trajectory]) -> Result<DMatrix<f64>> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let (h, dim_x) = (first.steps(), first.dim_x());
    for traj in batch {
        check_dim("trajectory steps", h, traj.steps())?;
        check_dim("trajectory state", dim_x, traj.dim_x())?;
    }
    let mut inputs = DMatrix::zeros(batch.len() * h, 1 + dim_x);
    for (i, traj) in batch.iter().enumerate() {
        for k in 0..h {
            let row = i * h + k;
            inputs[(row, 0)] = traj.grid.node(k);
            for j in 0..dim_x {
                inputs[(row, j + 1)] = traj.states[k][j];
            }
        }
    }
    Ok(inputs)
}

fn check_z<P: ParamFn + ?Sized>(batch: &[&Trajectory], z: &P) -> Result<()> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    check_dim("z input", 1 + first.dim_x(), z.input_dim())?;
    for traj in batch {
        check_dim("z output vs Brownian dimension", traj.dim_w(), z.output_dim())?;
    }
    Ok(())
}

fn cost_sum(traj: &Trajectory) -> f64 {
    traj.running_costs.iter().sum::<f64>() * traj.grid.dt()
}

fn stoch_sum(traj: &Trajectory, z_out: &DMatrix<f64>, first_row: usize) -> f64 {
    (0..traj.steps())
        .map(|k| {
            let dw = traj.dw.step(k);
            dw.iter()
                .enumerate()
                .map(|(j, w)| z_out[(first_row + k, j)] * w)
                .sum::<f64>()
        })
        .sum()
}

/// `y₀^θ` for one trajectory, with `z` evaluated in Eval mode.
pub fn y0_estimate<P: ParamFn + ?Sized>(traj: &Trajectory, z: &P) -> Result<Y0Sample> {
    check_z(&[traj], z)?;
    let mut stoch = 0.0;
    for k in 0..traj.steps() {
        let zk = z.eval(traj.grid.node(k), traj.states[k].as_slice());
        stoch += zk.iter().zip(traj.dw.step(k)).map(|(a, b)| a * b).sum::<f64>();
    }
    let terminal = traj.terminal_cost;
    let cost = cost_sum(traj);
    Ok(Y0Sample {
        terminal,
        cost_sum: cost,
        stoch_sum: stoch,
        value: terminal + cost - stoch,
    })
}

/// `y₀^θ` for a whole batch through the batched forward pass.
pub fn y0_values<P: ParamFn + ?Sized>(
    batch: &[&Trajectory],
    z: &mut P,
    mode: Mode,
) -> Result<Vec<f64>> {
    check_z(batch, z)?;
    let z_out = z.forward(&grid_inputs(batch)?, mode)?;
    Ok(y0_from_outputs(batch, &z_out))
}

fn y0_from_outputs(batch: &[&Trajectory], z_out: &DMatrix<f64>) -> Vec<f64> {
    let h = batch[0].steps();
    batch
        .iter()
        .enumerate()
        .map(|(i, traj)| traj.terminal_cost + cost_sum(traj) - stoch_sum(traj, z_out, i * h))
        .collect()
}

/// Upstream gradient for `z` outputs given `∂L/∂(Σ_k ⟨z_k, dW_k⟩)` per trajectory.
fn stoch_upstream(batch: &[&Trajectory], dims: (usize, usize), per_traj: &[f64]) -> DMatrix<f64> {
    let h = batch[0].steps();
    let mut up = DMatrix::zeros(dims.0, dims.1);
    for (i, traj) in batch.iter().enumerate() {
        for k in 0..h {
            for (j, w) in traj.dw.step(k).iter().enumerate() {
                up[(i * h + k, j)] = per_traj[i] * w;
            }
        }
    }
    up
}

/// Population variance of `y₀^θ` over the batch and its θ-gradient.
pub fn measurability_loss<P: ParamFn + ?Sized>(
    batch: &[&Trajectory],
    z: &mut P,
    mode: Mode,
) -> Result<LossReport> {
    if batch.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "measurability loss needs at least 2 trajectories, got {}",
            batch.len()
        )));
    }
    check_z(batch, z)?;
    let z_out = z.forward(&grid_inputs(batch)?, mode)?;
    let y0 = y0_from_outputs(batch, &z_out);
    let b = batch.len() as f64;
    let mean = y0.iter().sum::<f64>() / b;
    let loss = y0.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / b;
    // ∂L/∂y_i = 2(y_i − ȳ)/B and ∂y_i/∂(stoch sum) = −1
    let d_stoch: Vec<f64> = y0.iter().map(|y| -2.0 * (y - mean) / b).collect();
    let up = stoch_upstream(batch, z_out.shape(), &d_stoch);
    let grad = z.backward(&up)?;
    Ok(LossReport {
        loss,
        grad,
        grad_y0_db: None,
        batch_size: batch.len(),
    })
}

/// Deep BSDE loss with the trial process integrated forward from `y0_db`.
pub fn deep_bsde_loss<P: ParamFn + ?Sized>(
    batch: &[&Trajectory],
    z: &mut P,
    y0_db: f64,
    mode: Mode,
) -> Result<LossReport> {
    check_z(batch, z)?;
    let z_out = z.forward(&grid_inputs(batch)?, mode)?;
    let h = batch[0].steps();
    let b = batch.len() as f64;
    let residuals: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let dt = traj.grid.dt();
            let mut y = y0_db;
            for k in 0..h {
                let zdw: f64 = traj
                    .dw
                    .step(k)
                    .iter()
                    .enumerate()
                    .map(|(j, w)| z_out[(i * h + k, j)] * w)
                    .sum();
                y += -traj.running_costs[k] * dt + zdw;
            }
            y - traj.terminal_cost
        })
        .collect();
    let loss = residuals.iter().map(|r| r * r).sum::<f64>() / b;
    let d_res: Vec<f64> = residuals.iter().map(|r| 2.0 * r / b).collect();
    let up = stoch_upstream(batch, z_out.shape(), &d_res);
    let grad = z.backward(&up)?;
    Ok(LossReport {
        loss,
        grad,
        grad_y0_db: Some(d_res.iter().sum()),
        batch_size: batch.len(),
    })
}

/// `(1/B) Σ_i Σ_k |y(t_k, X_k^i) − Ĝ_k^i|²·dt` with `Ĝ` the realized cost-to-go.
pub fn martingale_loss<P: ParamFn + ?Sized>(
    batch: &[&Trajectory],
    y: &mut P,
    mode: Mode,
) -> Result<LossReport> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    check_dim("value function output", 1, y.output_dim())?;
    check_dim("value function input", 1 + first.dim_x(), y.input_dim())?;
    let y_out = y.forward(&grid_inputs(batch)?, mode)?;
    let h = first.steps();
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut up = DMatrix::zeros(y_out.nrows(), 1);
    for (i, traj) in batch.iter().enumerate() {
        let dt = traj.grid.dt();
        let target = traj.cost_to_go();
        for k in 0..h {
            let r = y_out[(i * h + k, 0)] - target[k];
            loss += r * r * dt;
            up[(i * h + k, 0)] = 2.0 * r * dt / b;
        }
    }
    let grad = y.backward(&up)?;
    Ok(LossReport {
        loss: loss / b,
        grad,
        grad_y0_db: None,
        batch_size: batch.len(),
    })
}

/// Mean and standard error of a sample.
pub fn mean_and_std_err(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}
