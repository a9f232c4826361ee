use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

type TerminalFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type StateCostFn = dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync;

/// `J = φ(x_T) + ∫ Q(t, x) + ½ uᵀRu dt`.
#[derive(Clone)]
pub struct CostSpec {
    terminal: Arc<TerminalFn>,
    state_cost: Arc<StateCostFn>,
    control_weight: DMatrix<f64>,
    control_weight_inv: DMatrix<f64>,
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostSpec")
            .field("control_weight", &self.control_weight)
            .finish_non_exhaustive()
    }
}

impl CostSpec {
    /// Fails unless `r` is symmetric positive definite.
    pub fn new<T, Q>(terminal: T, state_cost: Q, r: DMatrix<f64>) -> Result<Self>
    where
        T: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        Q: Fn(f64, &DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        if !r.is_square() {
            return Err(Error::InvalidArgument("R must be square".into()));
        }
        let scale = r.amax().max(1.0);
        if (&r - r.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument("R must be symmetric".into()));
        }
        let control_weight_inv = if r.nrows() == 0 {
            DMatrix::zeros(0, 0)
        } else {
            r.clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidArgument("R must be positive definite".into()))?
                .inverse()
        };
        Ok(Self {
            terminal: Arc::new(terminal),
            state_cost: Arc::new(state_cost),
            control_weight: r,
            control_weight_inv,
        })
    }

    pub fn dim_u(&self) -> usize {
        self.control_weight.nrows()
    }

    pub fn terminal(&self, x: &DVector<f64>) -> f64 {
        (self.terminal)(x)
    }

    pub fn state_cost(&self, t: f64, x: &DVector<f64>) -> f64 {
        (self.state_cost)(t, x)
    }

    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.control_weight
    }

    pub fn control_weight_inv(&self) -> &DMatrix<f64> {
        &self.control_weight_inv
    }

    /// `g(t, x, u) = Q(t, x) + ½ uᵀRu`.
    pub fn running_cost(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_dim("control for running cost", self.dim_u(), u.len())?;
        Ok(self.state_cost(t, x) + 0.5 * u.dot(&(&self.control_weight * u)))
    }

    /// Same cost with a constant added to `φ`.
    pub fn with_terminal_offset(&self, offset: f64) -> Self {
        let inner = Arc::clone(&self.terminal);
        Self {
            terminal: Arc::new(move |x: &DVector<f64>| inner(x) + offset),
            ..self.clone()
        }
    }
}
