use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// White-box dynamics `ẋ = F(t, x) + G(t, x)·u`.
pub trait ControlAffineModel: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;
    fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
    /// `D_x × D_u` control gain.
    fn gain(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64>;
}

impl<M: ControlAffineModel + ?Sized> ControlAffineModel for &M {
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_u(&self) -> usize {
        (**self).dim_u()
    }
    fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (**self).drift(t, x)
    }
    fn gain(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        (**self).gain(t, x)
    }
}

/// `F ≡ 0`, `G ≡ 0`: the state moves by noise alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroDynamics {
    pub dim_x: usize,
    pub dim_u: usize,
}

impl ControlAffineModel for ZeroDynamics {
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_u(&self) -> usize {
        self.dim_u
    }
    fn drift(&self, _t: f64, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim_x)
    }
    fn gain(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.dim_x, self.dim_u)
    }
}

/// `F(t, x) = A·x + c`, `G(t, x) = B`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.len() != n {
            return Err(Error::InvalidArgument(format!(
                "inconsistent linear model shapes: A {}x{}, B {}x{}, c {}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.len()
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Drift-free, control-free model of dimension `n` (pure diffusion).
    pub fn zero(dim_x: usize, dim_u: usize) -> Self {
        Self {
            a: DMatrix::zeros(dim_x, dim_x),
            b: DMatrix::zeros(dim_x, dim_u),
            c: DVector::zeros(dim_x),
        }
    }
}

impl ControlAffineModel for LinearModel {
    fn dim_x(&self) -> usize {
        self.a.nrows()
    }
    fn dim_u(&self) -> usize {
        self.b.ncols()
    }
    fn drift(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.c
    }
    fn gain(&self, _t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        self.b.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    ModelBased,
    ModelFree,
}

impl std::fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplingMode::ModelBased => "model-based",
            SamplingMode::ModelFree => "model-free",
        })
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model-based" => Ok(SamplingMode::ModelBased),
            "model-free" => Ok(SamplingMode::ModelFree),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

/// The diffusion factorization `G = σ·Υ`.
///
/// | mode        | σ        | Υ          | D_w |
/// |-------------|----------|------------|-----|
/// | model-based | σ₀·I     | σ₀⁻¹·G     | D_x |
/// | model-free  | σ₀·G     | σ₀⁻¹·I     | D_u |
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseScheme {
    pub mode: SamplingMode,
    pub sigma0: f64,
}

impl NoiseScheme {
    /// `sigma0` may be zero for deterministic rollouts; [`Self::upsilon`]
    /// then fails.
    pub fn new(mode: SamplingMode, sigma0: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma0 must be finite and non-negative, got {sigma0}"
            )));
        }
        Ok(Self { mode, sigma0 })
    }

    pub fn dim_w(&self, dim_x: usize, dim_u: usize) -> usize {
        match self.mode {
            SamplingMode::ModelBased => dim_x,
            SamplingMode::ModelFree => dim_u,
        }
    }

    /// `σ(t, x)` given the gain `G(t, x)`.
    pub fn sigma(&self, gain: &DMatrix<f64>) -> DMatrix<f64> {
        match self.mode {
            SamplingMode::ModelBased => {
                DMatrix::identity(gain.nrows(), gain.nrows()) * self.sigma0
            }
            SamplingMode::ModelFree => gain * self.sigma0,
        }
    }

    /// `Υ(t, x)` given the gain `G(t, x)`.
    pub fn upsilon(&self, gain: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.sigma0 == 0.0 {
            return Err(Error::InvalidArgument(
                "Υ is undefined for a zero noise level".into(),
            ));
        }
        Ok(match self.mode {
            SamplingMode::ModelBased => gain / self.sigma0,
            SamplingMode::ModelFree => {
                DMatrix::identity(gain.ncols(), gain.ncols()) / self.sigma0
            }
        })
    }
}

/// A state-feedback controller `u(t, x)`. Must be a pure function so that
/// rollouts can run in parallel.
pub trait Policy: Sync {
    fn dim_u(&self) -> usize;
    fn act(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;
}

/// `u ≡ 0`.
#[derive(Clone, Copy, Debug)]
pub struct ZeroPolicy {
    pub dim_u: usize,
}

impl Policy for ZeroPolicy {
    fn dim_u(&self) -> usize {
        self.dim_u
    }
    fn act(&self, _t: f64, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim_u)
    }
}

/// Closure-backed policy.
pub struct FnPolicy<F> {
    dim_u: usize,
    f: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64> + Sync,
{
    pub fn new(dim_u: usize, f: F) -> Self {
        Self { dim_u, f }
    }
}

impl<F> Policy for FnPolicy<F>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64> + Sync,
{
    fn dim_u(&self) -> usize {
        self.dim_u
    }
    fn act(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(t, x)
    }
}
