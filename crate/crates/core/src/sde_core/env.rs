use nalgebra::DVector;

use super::ControlAffineModel;

/// An opaque system that can only be reset and driven by controls.
pub trait BlackBoxEnv: Send {
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;
    /// Restores the initial state and returns it.
    fn reset(&mut self) -> DVector<f64>;
    /// Applies `u` for `dt` seconds and returns the new state.
    fn step(&mut self, u: &DVector<f64>, dt: f64) -> DVector<f64>;
}

/// Forward-Euler stepper around a white-box model. Only the stepping
/// interface is visible to the learner.
#[derive(Clone, Debug)]
pub struct EulerEnv<M> {
    model: M,
    x0: DVector<f64>,
    state: DVector<f64>,
    clock: f64,
}

impl<M: ControlAffineModel> EulerEnv<M> {
    pub fn new(model: M, x0: DVector<f64>) -> Self {
        Self {
            model,
            state: x0.clone(),
            x0,
            clock: 0.0,
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }
}

pub fn euler_env_from_model<M: ControlAffineModel>(model: M, x0: DVector<f64>) -> EulerEnv<M> {
    EulerEnv::new(model, x0)
}

impl<M: ControlAffineModel> BlackBoxEnv for EulerEnv<M> {
    fn dim_x(&self) -> usize {
        self.model.dim_x()
    }

    fn dim_u(&self) -> usize {
        self.model.dim_u()
    }

    fn reset(&mut self) -> DVector<f64> {
        self.state = self.x0.clone();
        self.clock = 0.0;
        self.state.clone()
    }

    fn step(&mut self, u: &DVector<f64>, dt: f64) -> DVector<f64> {
        let t = self.clock;
        let velocity = self.model.drift(t, &self.state) + self.model.gain(t, &self.state) * u;
        self.state += velocity * dt;
        self.clock += dt;
        self.state.clone()
    }
}
