//! Pure policy evaluation on an `n`-dimensional Brownian motion with
//! running cost `−n` and terminal cost `‖x‖²`. The value function is
//! `v(t, x) = ‖x‖²`, so `Y_t = ‖X_t‖²` and `Z_t = 2X_t`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CostSpec;
use crate::approximators::{Basis, LinearFamily};
use crate::error::{Error, Result};
use crate::sde_core::{
    rollout_batch_model_based, NoiseScheme, SamplingMode, SeedStreams, StreamDomain,
    TimeGrid, Trajectory, ZeroDynamics, ZeroPolicy,
};

/// Trial function class for the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parameterization {
    /// `y = θ‖x‖²`, `z = 2θx`; contains the true solution at `θ = 1`.
    #[serde(rename = "well")]
    WellSpecified,
    /// `y = θ‖x‖⁴`, `z = 4θx‖x‖²`; does not contain it.
    #[serde(rename = "mis")]
    Misspecified,
}

impl std::str::FromStr for Parameterization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "well" => Ok(Parameterization::WellSpecified),
            "mis" => Ok(Parameterization::Misspecified),
            other => Err(Error::InvalidArgument(format!("unknown parameterization `{other}`"))),
        }
    }
}

impl std::fmt::Display for Parameterization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parameterization::WellSpecified => "well",
            Parameterization::Misspecified => "mis",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example1Spec {
    pub n: usize,
    pub horizon: f64,
    pub parameterization: Parameterization,
}

impl Example1Spec {
    pub fn new(n: usize, horizon: f64, parameterization: Parameterization) -> Result<Self> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if n == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need n ≥ 1 and T > 0, got n = {n}, T = {horizon}"
            )));
        }
        Ok(Self {
            n,
            horizon,
            parameterization,
        })
    }

    pub fn z_family(&self, theta: f64) -> LinearFamily {
        let basis = match self.parameterization {
            Parameterization::WellSpecified => Basis::ZWell,
            Parameterization::Misspecified => Basis::ZMis,
        };
        LinearFamily::new(basis, self.n, theta)
    }

    pub fn y_family(&self, theta: f64) -> LinearFamily {
        let basis = match self.parameterization {
            Parameterization::WellSpecified => Basis::YWell,
            Parameterization::Misspecified => Basis::YMis,
        };
        LinearFamily::new(basis, self.n, theta)
    }

    /// Minimizer of the gradient error criterion over the trial class.
    pub fn theta_star_z(&self) -> f64 {
        match self.parameterization {
            Parameterization::WellSpecified => 1.0,
            Parameterization::Misspecified => theta_star_z(self.n, self.horizon),
        }
    }

    /// Minimizer of the value error criterion over the trial class.
    pub fn theta_star_y(&self) -> f64 {
        match self.parameterization {
            Parameterization::WellSpecified => 1.0,
            Parameterization::Misspecified => theta_star_y(self.n, self.horizon),
        }
    }
}

/// `F ≡ 0` with no control input.
pub fn example1_model(n: usize) -> ZeroDynamics {
    ZeroDynamics { dim_x: n, dim_u: 0 }
}

/// `φ(x) = ‖x‖²`, `Q ≡ −n`, `D_u = 0`.
pub fn example1_cost(n: usize) -> CostSpec {
    let q = -(n as f64);
    CostSpec::new(
        |x: &DVector<f64>| x.norm_squared(),
        move |_t, _x: &DVector<f64>| q,
        DMatrix::zeros(0, 0),
    )
    .expect("empty control weight is valid")
}

/// `σ = I`: the state is the Brownian motion itself.
pub fn example1_scheme() -> NoiseScheme {
    NoiseScheme {
        mode: SamplingMode::ModelBased,
        sigma0: 1.0,
    }
}

/// `count` Brownian paths from the origin, rollout `i` on stream `(domain, first_index + i)`.
pub fn example1_rollouts(
    n: usize,
    grid: &TimeGrid,
    streams: &SeedStreams,
    domain: StreamDomain,
    first_index: u64,
    count: usize,
) -> Result<Vec<Trajectory>> {
    rollout_batch_model_based(
        &example1_model(n),
        &example1_scheme(),
        &ZeroPolicy { dim_u: 0 },
        &example1_cost(n),
        grid,
        &DVector::zeros(n),
        streams,
        domain,
        first_index,
        count,
    )
}

/// `E∫₀ᵀ |‖X_t‖² − θ‖X_t‖⁴|² dt` in closed form.
pub fn example1_yerr(theta: f64, n: usize, horizon: f64) -> f64 {
    let n = n as f64;
    let t = horizon;
    n * (n + 2.0)
        * t.powi(3)
        * (1.0 / 3.0 + theta * theta * (n + 4.0) * (n + 6.0) * t * t / 5.0
            - 2.0 * theta * (n + 4.0) * t / 4.0)
}

/// `E∫₀ᵀ ‖2X_t − 4θX_t‖X_t‖²‖² dt` in closed form.
pub fn example1_zerr(theta: f64, n: usize, horizon: f64) -> f64 {
    let n = n as f64;
    let t = horizon;
    4.0 * n
        * t
        * t
        * (0.5 + theta * theta * (n + 2.0) * (n + 4.0) * t * t
            - 4.0 / 3.0 * theta * (n + 2.0) * t)
}

/// `argmin_θ Yerr = 5 / (4 (n + 6) T)`.
pub fn theta_star_y(n: usize, horizon: f64) -> f64 {
    5.0 / (4.0 * (n as f64 + 6.0) * horizon)
}

/// `argmin_θ Zerr = 2 / (3 (n + 4) T)`.
pub fn theta_star_z(n: usize, horizon: f64) -> f64 {
    2.0 / (3.0 * (n as f64 + 4.0) * horizon)
}

/// `(Y, Z) = (‖x‖², 2x)`.
pub fn example1_true_solution(_t: f64, x: &DVector<f64>) -> (f64, DVector<f64>) {
    (x.norm_squared(), x * 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_core::{SeedStreams, StreamDomain};
    use rand_distr::{Distribution, StandardNormal};

    /// Golden-section search, independent of the closed-form minimizer.
    fn argmin(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn closed_form_minimizers() {
        assert!((theta_star_z(1, 0.5) - 0.266_666_666_666_666_7).abs() < 1e-15);
        assert!((theta_star_y(1, 0.5) - 0.357_142_857_142_857_1).abs() < 1e-15);
        let tz = argmin(|th| example1_zerr(th, 1, 0.5), -1.0, 2.0);
        let ty = argmin(|th| example1_yerr(th, 1, 0.5), -1.0, 2.0);
        assert!((tz - 0.26667).abs() < 1e-5);
        assert!((ty - 0.35714).abs() < 1e-5);
    }

    #[test]
    fn zerr_minimizer_all_dims() {
        for n in [1usize, 10, 100] {
            let t = 0.5;
            // quadratic a θ² + b θ + c: vertex from three evaluations
            let (f0, f1, fm) = (
                example1_zerr(0.0, n, t),
                example1_zerr(1.0, n, t),
                example1_zerr(-1.0, n, t),
            );
            let a = 0.5 * (f1 + fm) - f0;
            let b = 0.5 * (f1 - fm);
            let vertex = -b / (2.0 * a);
            let expect = 2.0 / (3.0 * (n as f64 + 4.0) * t);
            assert!((vertex - expect).abs() < 1e-10, "n={n}: {vertex} vs {expect}");
            assert!((theta_star_z(n, t) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zerr_at_zero() {
        assert!((example1_zerr(0.0, 1, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn true_solution_values() {
        let (y, z) = example1_true_solution(0.2, &DVector::zeros(3));
        assert_eq!(y, 0.0);
        assert_eq!(z, DVector::zeros(3));
        let (y, z) = example1_true_solution(0.2, &DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(y, 2.0);
        assert_eq!(z, DVector::from_vec(vec![2.0, 2.0]));
    }

    #[test]
    fn true_value_matches_conditional_expectation() {
        // E[‖W_T‖² − n(T − t) | W_t = x] by brute force
        let (n, horizon, t) = (2usize, 0.5f64, 0.2f64);
        let x = DVector::from_vec(vec![0.7, -0.4]);
        let mut rng = SeedStreams::new(17).rng(StreamDomain::Custom(0), 0);
        let paths = 100_000;
        let sd = (horizon - t).sqrt();
        let samples: Vec<f64> = (0..paths)
            .map(|_| {
                let wt = x.map(|xi| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    xi + sd * z
                });
                wt.norm_squared() - n as f64 * (horizon - t)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / paths as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
        let se = (var / paths as f64).sqrt();
        let (y, _) = example1_true_solution(t, &x);
        assert!((mean - y).abs() < 3.0 * se, "{mean} vs {y} (se {se})");
    }

    #[test]
    fn cost_is_minus_n() {
        let c = example1_cost(4);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.running_cost(0.1, &x, &DVector::zeros(0)).unwrap(), -4.0);
        assert_eq!(c.terminal(&x), 30.0);
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(Example1Spec::new(0, 0.5, Parameterization::WellSpecified).is_err());
        assert!(Example1Spec::new(1, 0.0, Parameterization::WellSpecified).is_err());
    }
}
