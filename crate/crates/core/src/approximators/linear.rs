use nalgebra::DMatrix;

use super::{Mode, ParamFn};
use crate::error::{check_dim, Error, Result};

/// Fixed feature `b(x)` scaled by one parameter: `f_θ(t, x) = θ·b(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// `2x`
    ZWell,
    /// `4x‖x‖²`
    ZMis,
    /// `‖x‖²`
    YWell,
    /// `‖x‖⁴`
    YMis,
}

impl Basis {
    fn tag(self) -> &'static str {
        match self {
            Basis::ZWell => "z-well",
            Basis::ZMis => "z-mis",
            Basis::YWell => "y-well",
            Basis::YMis => "y-mis",
        }
    }

    fn output_dim(self, dim_x: usize) -> usize {
        match self {
            Basis::ZWell | Basis::ZMis => dim_x,
            Basis::YWell | Basis::YMis => 1,
        }
    }

    fn write(self, x: &[f64], out: &mut [f64]) {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        match self {
            Basis::ZWell => out.iter_mut().zip(x).for_each(|(o, v)| *o = 2.0 * v),
            Basis::ZMis => out.iter_mut().zip(x).for_each(|(o, v)| *o = 4.0 * v * sq),
            Basis::YWell => out[0] = sq,
            Basis::YMis => out[0] = sq * sq,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearFamily {
    basis: Basis,
    dim_x: usize,
    theta: [f64; 1],
    cache: Option<DMatrix<f64>>,
}

impl LinearFamily {
    pub fn new(basis: Basis, dim_x: usize, theta: f64) -> Self {
        Self {
            basis,
            dim_x,
            theta: [theta],
            cache: None,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn theta(&self) -> f64 {
        self.theta[0]
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta[0] = theta;
    }

    fn features(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.output_dim();
        let mut feats = DMatrix::zeros(inputs.nrows(), m);
        let mut x = vec![0.0; self.dim_x];
        let mut row = vec![0.0; m];
        for i in 0..inputs.nrows() {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj = inputs[(i, j + 1)];
            }
            self.basis.write(&x, &mut row);
            for (j, v) in row.iter().enumerate() {
                feats[(i, j)] = *v;
            }
        }
        feats
    }
}

impl ParamFn for LinearFamily {
    fn arch(&self) -> String {
        format!("linear basis={} dim_x={}", self.basis.tag(), self.dim_x)
    }

    fn input_dim(&self) -> usize {
        1 + self.dim_x
    }

    fn output_dim(&self) -> usize {
        self.basis.output_dim(self.dim_x)
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn forward(&mut self, inputs: &DMatrix<f64>, _mode: Mode) -> Result<DMatrix<f64>> {
        check_dim("linear family input", self.input_dim(), inputs.ncols())?;
        let feats = self.features(inputs);
        let out = &feats * self.theta[0];
        self.cache = Some(feats);
        Ok(out)
    }

    fn backward(&mut self, upstream: &DMatrix<f64>) -> Result<Vec<f64>> {
        let feats = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        if feats.shape() != upstream.shape() {
            return Err(Error::DimensionMismatch {
                context: "upstream gradient rows",
                expected: feats.nrows(),
                got: upstream.nrows(),
            });
        }
        Ok(vec![feats.dot(upstream)])
    }

    fn eval(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.basis.write(x, &mut out);
        out.iter_mut().for_each(|v| *v *= self.theta[0]);
        out
    }
}

/// `f_θ(t, x) = (Σ_d θ_d t^d)·x`, a time-varying linear feedback/gradient.
#[derive(Clone, Debug)]
pub struct TimePolyLinear {
    dim_x: usize,
    coeffs: Vec<f64>,
    cache: Option<DMatrix<f64>>,
}

impl TimePolyLinear {
    pub fn new(dim_x: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("need at least one coefficient".into()));
        }
        Ok(Self {
            dim_x,
            coeffs,
            cache: None,
        })
    }

    pub fn zeros(dim_x: usize, degree: usize) -> Self {
        Self {
            dim_x,
            coeffs: vec![0.0; degree + 1],
            cache: None,
        }
    }

    pub fn gain_at(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

impl ParamFn for TimePolyLinear {
    fn arch(&self) -> String {
        format!("time-poly-linear dim_x={} degree={}", self.dim_x, self.coeffs.len() - 1)
    }

    fn input_dim(&self) -> usize {
        1 + self.dim_x
    }

    fn output_dim(&self) -> usize {
        self.dim_x
    }

    fn params(&self) -> &[f64] {
        &self.coeffs
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn forward(&mut self, inputs: &DMatrix<f64>, _mode: Mode) -> Result<DMatrix<f64>> {
        check_dim("time-poly input", self.input_dim(), inputs.ncols())?;
        let n = inputs.nrows();
        let out = DMatrix::from_fn(n, self.dim_x, |i, j| {
            self.gain_at(inputs[(i, 0)]) * inputs[(i, j + 1)]
        });
        self.cache = Some(inputs.clone());
        Ok(out)
    }

    fn backward(&mut self, upstream: &DMatrix<f64>) -> Result<Vec<f64>> {
        let inputs = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        check_dim("upstream gradient rows", inputs.nrows(), upstream.nrows())?;
        check_dim("upstream gradient cols", self.dim_x, upstream.ncols())?;
        let mut grad = vec![0.0; self.coeffs.len()];
        for i in 0..inputs.nrows() {
            let t = inputs[(i, 0)];
            let inner: f64 = (0..self.dim_x).map(|j| upstream[(i, j)] * inputs[(i, j + 1)]).sum();
            let mut tp = 1.0;
            for g in grad.iter_mut() {
                *g += tp * inner;
                tp *= t;
            }
        }
        Ok(grad)
    }

    fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let k = self.gain_at(t);
        x.iter().map(|v| k * v).collect()
    }
}
