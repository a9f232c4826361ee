//! Trainable functions `(t, x) ↦ ℝ^m` with exact parameter gradients.
//!
//! Batched inputs are `N × (1 + D_x)` matrices whose rows are `(t, x)`.
//! Every [`ParamFn`] is also a [`Policy`] through its Eval-mode [`ParamFn::eval`].

mod adam;
mod linear;
mod mlp;
mod snapshot;

pub use adam::{Adam, AdamConfig};
pub use linear::{Basis, LinearFamily, TimePolyLinear};
pub use mlp::{MlpBn, MlpBnConfig};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_VERSION};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::sde_core::Policy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Stored statistics only; no internal state changes.
    Eval,
}

pub trait ParamFn: Send + Sync {
    /// Architecture descriptor written into snapshot headers.
    fn arch(&self) -> String;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Evaluates a batch and caches what [`ParamFn::backward`] needs.
    fn forward(&mut self, inputs: &DMatrix<f64>, mode: Mode) -> Result<DMatrix<f64>>;

    /// Gradient of `Σ_ij upstream_ij · out_ij` with respect to the parameters,
    /// for the batch of the most recent `forward`.
    fn backward(&mut self, upstream: &DMatrix<f64>) -> Result<Vec<f64>>;

    /// Eval-mode value at a single point. Pure.
    fn eval(&self, t: f64, x: &[f64]) -> Vec<f64>;

    /// Non-trainable state (e.g. running statistics).
    fn buffers(&self) -> Vec<f64> {
        Vec::new()
    }

    fn set_buffers(&mut self, values: &[f64]) -> Result<()> {
        crate::error::check_dim("buffers", 0, values.len())
    }

    /// Single-point forward through the batched path.
    fn forward_point(&mut self, t: f64, x: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let out = self.forward(&input_matrix(&[(t, x)]), mode)?;
        Ok(out.row(0).iter().copied().collect())
    }
}

impl<P: ParamFn> Policy for P {
    fn dim_u(&self) -> usize {
        self.output_dim()
    }

    fn act(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.eval(t, x.as_slice()))
    }
}

/// Stacks `(t, x)` points into an `N × (1 + D_x)` input matrix.
pub fn input_matrix(points: &[(f64, &[f64])]) -> DMatrix<f64> {
    let cols = points.first().map_or(1, |(_, x)| 1 + x.len());
    DMatrix::from_fn(points.len(), cols, |i, j| {
        if j == 0 {
            points[i].0
        } else {
            points[i].1[j - 1]
        }
    })
}
