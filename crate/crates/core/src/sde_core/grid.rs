use crate::error::{Error, Result};

/// Uniform discretization `0 = t_0 < … < t_H = T` with `dt = T / H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        Ok(Self {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    /// Grid for a horizon and a target step size; `T/dt` must be (close to) an integer.
    pub fn from_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} is not a positive multiple of dt {dt}"
            )));
        }
        Self::new(horizon, steps as usize)
    }

    /// The degenerate grid with no steps. Rollouts on it only see `x_0`.
    pub fn zero_length() -> Self {
        Self {
            horizon: 0.0,
            steps: 0,
            dt: 0.0,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.node(k))
    }
}

pub fn make_grid(horizon: f64, steps: i64) -> Result<TimeGrid> {
    if steps <= 0 {
        return Err(Error::InvalidArgument(format!(
            "number of steps must be positive, got {steps}"
        )));
    }
    TimeGrid::new(horizon, steps as usize)
}
