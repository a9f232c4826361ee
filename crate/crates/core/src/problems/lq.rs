use nalgebra::{DMatrix, DVector};

use super::CostSpec;
use crate::error::Result;
use crate::sde_core::LinearModel;

/// Scalar linear-quadratic problem:
/// `ẋ = a x + b u`, `J = s x_T² + ∫ q x² + ½ r u² dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarLq {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl ScalarLq {
    pub fn model(&self) -> LinearModel {
        LinearModel {
            a: DMatrix::from_element(1, 1, self.a),
            b: DMatrix::from_element(1, 1, self.b),
            c: DVector::zeros(1),
        }
    }

    pub fn cost(&self) -> Result<CostSpec> {
        let (q, s) = (self.q, self.s);
        CostSpec::new(
            move |x: &DVector<f64>| s * x[0] * x[0],
            move |_t, x: &DVector<f64>| q * x[0] * x[0],
            DMatrix::from_element(1, 1, self.r),
        )
    }
}
