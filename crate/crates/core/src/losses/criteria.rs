//! Monte-Carlo estimates of the integrated squared errors against a known
//! solution, `E∫‖z − Z‖² dt` and `E∫|y − Y|² dt` (left Riemann sums).

use nalgebra::DVector;

use super::dvec;
use crate::approximators::ParamFn;
use crate::sde_core::Trajectory;

/// Per-trajectory `Σ_k ‖z(t_k, X_k) − Z(t_k, X_k)‖²·dt`.
pub fn zerr_samples<P, F>(batch: &[&Trajectory], z: &P, true_z: F) -> Vec<f64>
where
    P: ParamFn + ?Sized,
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    batch
        .iter()
        .map(|traj| {
            let dt = traj.grid.dt();
            (0..traj.steps())
                .map(|k| {
                    let t = traj.grid.node(k);
                    let x = &traj.states[k];
                    (dvec(&z.eval(t, x.as_slice())) - true_z(t, x)).norm_squared() * dt
                })
                .sum()
        })
        .collect()
}

pub fn zerr_mc<P, F>(batch: &[&Trajectory], z: &P, true_z: F) -> f64
where
    P: ParamFn + ?Sized,
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let s = zerr_samples(batch, z, true_z);
    s.iter().sum::<f64>() / s.len() as f64
}

/// Per-trajectory `Σ_k |y(t_k, X_k) − Y(t_k, X_k)|²·dt`.
pub fn yerr_samples<P, F>(batch: &[&Trajectory], y: &P, true_y: F) -> Vec<f64>
where
    P: ParamFn + ?Sized,
    F: Fn(f64, &DVector<f64>) -> f64,
{
    batch
        .iter()
        .map(|traj| {
            let dt = traj.grid.dt();
            (0..traj.steps())
                .map(|k| {
                    let t = traj.grid.node(k);
                    let x = &traj.states[k];
                    (y.eval(t, x.as_slice())[0] - true_y(t, x)).powi(2) * dt
                })
                .sum()
        })
        .collect()
}

pub fn yerr_mc<P, F>(batch: &[&Trajectory], y: &P, true_y: F) -> f64
where
    P: ParamFn + ?Sized,
    F: Fn(f64, &DVector<f64>) -> f64,
{
    let s = yerr_samples(batch, y, true_y);
    s.iter().sum::<f64>() / s.len() as f64
}
