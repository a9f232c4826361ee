//! Pendulum swing-up. The angle is measured from the upright position, so
//! `x = (π, 0)` hangs at rest and the target `(0, 0)` is inverted.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CostSpec;
use crate::sde_core::ControlAffineModel;

/// `F = (θ̇, (a sin θ − b θ̇)/I)`, `G = (0, cos θ / I)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumModel {
    pub a: f64,
    pub b: f64,
    pub inertia: f64,
}

impl Default for PendulumModel {
    fn default() -> Self {
        Self {
            a: 9.8,
            b: 0.1,
            inertia: 1.0,
        }
    }
}

impl ControlAffineModel for PendulumModel {
    fn dim_x(&self) -> usize {
        2
    }

    fn dim_u(&self) -> usize {
        1
    }

    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[1], (self.a * x[0].sin() - self.b * x[1]) / self.inertia])
    }

    fn gain(&self, _t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, x[0].cos() / self.inertia])
    }
}

pub fn pendulum_x0() -> DVector<f64> {
    DVector::from_vec(vec![std::f64::consts::PI, 0.0])
}

/// Weights of `Q(x) = (x − x*)ᵀ Λ (x − x*)` and `R = r·I`; `φ ≡ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumCostParams {
    pub lambda: [f64; 2],
    pub target: [f64; 2],
    pub r: f64,
}

impl Default for PendulumCostParams {
    fn default() -> Self {
        Self {
            lambda: [1.01, 0.01],
            target: [0.0, 0.0],
            r: 0.005,
        }
    }
}

pub fn pendulum_cost() -> CostSpec {
    pendulum_cost_with(PendulumCostParams::default()).expect("default weights are valid")
}

pub fn pendulum_cost_with(p: PendulumCostParams) -> crate::Result<CostSpec> {
    CostSpec::new(
        |_x: &DVector<f64>| 0.0,
        move |_t, x: &DVector<f64>| {
            let d0 = x[0] - p.target[0];
            let d1 = x[1] - p.target[1];
            p.lambda[0] * d0 * d0 + p.lambda[1] * d1 * d1
        },
        DMatrix::from_element(1, 1, p.r),
    )
}
