//! Input batch-norm → dense(16) → tanh → dense(m).
//!
//! Parameters are stored flat in the order
//! `γ[d], β[d], W1[h×d], b1[h], W2[m×h], b2[m]` (matrices row-major).
//! Normalization acts on the raw `(t, x)` input, so batch statistics do not
//! depend on any parameter and the parameter gradient needs no
//! batch-statistics backward pass.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Mode, ParamFn};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpBnConfig {
    pub hidden: usize,
    pub momentum: f64,
    pub eps: f64,
}

impl Default for MlpBnConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

#[derive(Clone, Debug)]
struct Cache {
    /// Row-major `N × d`.
    xhat: Vec<f64>,
    /// Row-major `N × h` tanh activations.
    hidden: Vec<f64>,
    rows: usize,
}

#[derive(Clone, Debug)]
pub struct MlpBn {
    input_dim: usize,
    output_dim: usize,
    cfg: MlpBnConfig,
    params: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    cache: Option<Cache>,
}

impl MlpBn {
    /// Dense weights and biases uniform in `±1/√fan_in`; `γ = 1`, `β = 0`.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        cfg: MlpBnConfig,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(input_dim, output_dim, cfg);
        let (d, h) = (input_dim, cfg.hidden);
        net.params[..d].fill(1.0);
        let b1 = 1.0 / (d.max(1) as f64).sqrt();
        let b2 = 1.0 / (h.max(1) as f64).sqrt();
        let (w1, end1) = (net.off_w1(), net.off_w2());
        for p in &mut net.params[w1..end1] {
            *p = rng.random_range(-b1..=b1);
        }
        for p in &mut net.params[end1..] {
            *p = rng.random_range(-b2..=b2);
        }
        net
    }

    /// Every parameter zero; the output is identically zero.
    pub fn zeros(input_dim: usize, output_dim: usize, cfg: MlpBnConfig) -> Self {
        let h = cfg.hidden;
        let n = 2 * input_dim + h * input_dim + h + output_dim * h + output_dim;
        Self {
            input_dim,
            output_dim,
            cfg,
            params: vec![0.0; n],
            running_mean: vec![0.0; input_dim],
            running_var: vec![1.0; input_dim],
            cache: None,
        }
    }

    /// Random hidden layer, zero output layer: a zero function that can
    /// still be trained.
    pub fn zero_output<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        cfg: MlpBnConfig,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::new(input_dim, output_dim, cfg, rng);
        let start = net.off_w2();
        net.params[start..].fill(0.0);
        net
    }

    pub fn config(&self) -> MlpBnConfig {
        self.cfg
    }

    pub fn running_stats(&self) -> (&[f64], &[f64]) {
        (&self.running_mean, &self.running_var)
    }

    fn off_w1(&self) -> usize {
        2 * self.input_dim
    }
    fn off_b1(&self) -> usize {
        self.off_w1() + self.cfg.hidden * self.input_dim
    }
    fn off_w2(&self) -> usize {
        self.off_b1() + self.cfg.hidden
    }
    fn off_b2(&self) -> usize {
        self.off_w2() + self.output_dim * self.cfg.hidden
    }

    fn batch_stats(&mut self, inputs: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let n = inputs.nrows() as f64;
        let mut mean = vec![0.0; self.input_dim];
        let mut var = vec![0.0; self.input_dim];
        for j in 0..self.input_dim {
            let col = inputs.column(j);
            let mu = col.sum() / n;
            mean[j] = mu;
            var[j] = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        }
        let mom = self.cfg.momentum;
        let unbias = if inputs.nrows() > 1 { n / (n - 1.0) } else { 1.0 };
        for j in 0..self.input_dim {
            self.running_mean[j] = (1.0 - mom) * self.running_mean[j] + mom * mean[j];
            self.running_var[j] = (1.0 - mom) * self.running_var[j] + mom * var[j] * unbias;
        }
        (mean, var)
    }
}

impl ParamFn for MlpBn {
    fn arch(&self) -> String {
        format!(
            "mlp-bn in={} hidden={} out={} momentum={} eps={}",
            self.input_dim, self.cfg.hidden, self.output_dim, self.cfg.momentum, self.cfg.eps
        )
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&mut self, inputs: &DMatrix<f64>, mode: Mode) -> Result<DMatrix<f64>> {
        check_dim("network input", self.input_dim, inputs.ncols())?;
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (mean, var) = match mode {
            Mode::Train => self.batch_stats(inputs),
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let (d, h, m) = (self.input_dim, self.cfg.hidden, self.output_dim);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.cfg.eps).sqrt()).collect();
        let p = &self.params;
        let (gamma, beta) = (&p[..d], &p[d..2 * d]);
        let w1 = &p[self.off_w1()..self.off_b1()];
        let b1 = &p[self.off_b1()..self.off_w2()];
        let w2 = &p[self.off_w2()..self.off_b2()];
        let b2 = &p[self.off_b2()..];

        // row-major scratch
        let mut xhat = vec![0.0; n * d];
        for j in 0..d {
            for (i, v) in inputs.column(j).iter().enumerate() {
                xhat[i * d + j] = (v - mean[j]) * inv_std[j];
            }
        }
        let mut hidden = vec![0.0; n * h];
        let mut out = DMatrix::zeros(n, m);
        let mut normed = vec![0.0; d];
        for i in 0..n {
            let xr = &xhat[i * d..(i + 1) * d];
            for j in 0..d {
                normed[j] = gamma[j] * xr[j] + beta[j];
            }
            let hr = &mut hidden[i * h..(i + 1) * h];
            for r in 0..h {
                let row = &w1[r * d..(r + 1) * d];
                let pre = b1[r] + row.iter().zip(&normed).map(|(w, v)| w * v).sum::<f64>();
                hr[r] = pre.tanh();
            }
            for c in 0..m {
                let row = &w2[c * h..(c + 1) * h];
                out[(i, c)] = b2[c] + row.iter().zip(hr.iter()).map(|(w, a)| w * a).sum::<f64>();
            }
        }
        self.cache = Some(Cache { xhat, hidden, rows: n });
        Ok(out)
    }

    fn backward(&mut self, upstream: &DMatrix<f64>) -> Result<Vec<f64>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        check_dim("upstream gradient rows", cache.rows, upstream.nrows())?;
        check_dim("upstream gradient cols", self.output_dim, upstream.ncols())?;
        let (d, h, m) = (self.input_dim, self.cfg.hidden, self.output_dim);
        let p = &self.params;
        let (gamma, beta) = (&p[..d], &p[d..2 * d]);
        let (o_w1, o_b1, o_w2, o_b2) = (self.off_w1(), self.off_b1(), self.off_w2(), self.off_b2());
        let w1 = &p[o_w1..o_b1];
        let w2 = &p[o_w2..o_b2];

        let mut grad = vec![0.0; p.len()];
        let (g_bn, rest) = grad.split_at_mut(o_w1);
        let (g_w1, rest) = rest.split_at_mut(o_b1 - o_w1);
        let (g_b1, rest) = rest.split_at_mut(o_w2 - o_b1);
        let (g_w2, g_b2) = rest.split_at_mut(o_b2 - o_w2);
        let (g_gamma, g_beta) = g_bn.split_at_mut(d);

        let mut normed = vec![0.0; d];
        let mut d_pre = vec![0.0; h];
        let mut g_out = vec![0.0; m];
        for i in 0..cache.rows {
            let xr = &cache.xhat[i * d..(i + 1) * d];
            let hr = &cache.hidden[i * h..(i + 1) * h];
            for (c, g) in g_out.iter_mut().enumerate() {
                *g = upstream[(i, c)];
            }
            for c in 0..m {
                let g = g_out[c];
                g_b2[c] += g;
                for (acc, a) in g_w2[c * h..(c + 1) * h].iter_mut().zip(hr) {
                    *acc += g * a;
                }
            }
            for r in 0..h {
                let back: f64 = (0..m).map(|c| g_out[c] * w2[c * h + r]).sum();
                d_pre[r] = back * (1.0 - hr[r] * hr[r]);
            }
            for j in 0..d {
                normed[j] = gamma[j] * xr[j] + beta[j];
            }
            for r in 0..h {
                let g = d_pre[r];
                g_b1[r] += g;
                for (acc, v) in g_w1[r * d..(r + 1) * d].iter_mut().zip(&normed) {
                    *acc += g * v;
                }
            }
            for j in 0..d {
                let dn: f64 = (0..h).map(|r| d_pre[r] * w1[r * d + j]).sum();
                g_gamma[j] += dn * xr[j];
                g_beta[j] += dn;
            }
        }
        Ok(grad)
    }

    fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let (d, h, m) = (self.input_dim, self.cfg.hidden, self.output_dim);
        let p = &self.params;
        let mut normed = vec![0.0; d];
        for (j, slot) in normed.iter_mut().enumerate() {
            let raw = if j == 0 { t } else { x[j - 1] };
            let xhat = (raw - self.running_mean[j]) / (self.running_var[j] + self.cfg.eps).sqrt();
            *slot = p[j] * xhat + p[d + j];
        }
        let (w1, b1, w2, b2) = (self.off_w1(), self.off_b1(), self.off_w2(), self.off_b2());
        let hidden: Vec<f64> = (0..h)
            .map(|r| {
                let row = &p[w1 + r * d..w1 + (r + 1) * d];
                (row.iter().zip(&normed).map(|(w, v)| w * v).sum::<f64>() + p[b1 + r]).tanh()
            })
            .collect();
        (0..m)
            .map(|r| {
                let row = &p[w2 + r * h..w2 + (r + 1) * h];
                row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>() + p[b2 + r]
            })
            .collect()
    }

    fn buffers(&self) -> Vec<f64> {
        let mut out = self.running_mean.clone();
        out.extend_from_slice(&self.running_var);
        out
    }

    fn set_buffers(&mut self, values: &[f64]) -> Result<()> {
        check_dim("batch-norm buffers", 2 * self.input_dim, values.len())?;
        let d = self.input_dim;
        self.running_mean.copy_from_slice(&values[..d]);
        self.running_var.copy_from_slice(&values[d..]);
        Ok(())
    }
}
