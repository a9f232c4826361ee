use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{Buffer, EpochSampler};
use super::hamiltonian::targets_for_rows;
use crate::approximators::{Adam, AdamConfig, Mode, ParamFn};
use crate::error::{check_dim, Error, Result};
use crate::losses::{grid_inputs, measurability_loss};
use crate::problems::CostSpec;
use crate::sde_core::{ControlAffineModel, NoiseScheme};

/// Settings for one inner training loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_steps: usize,
    /// Stop once the mean loss over the last `window` steps improves on the
    /// preceding window by less than this fraction.
    pub tolerance: f64,
    pub window: usize,
    /// Trajectories per minibatch.
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_steps: 2000,
            tolerance: 1e-4,
            window: 50,
            batch_size: 128,
            adam: AdamConfig {
                lr: 1e-4,
                weight_decay: 1e-8,
                ..AdamConfig::default()
            },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 || self.window == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "max_steps, window and batch_size must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} is invalid", self.adam.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub losses: Vec<f64>,
    /// True if the plateau test stopped the loop before `max_steps`.
    pub converged: bool,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    pub fn steps(&self) -> usize {
        self.losses.len()
    }
}

/// Relative improvement between the last two complete windows is below `tol`.
pub fn plateaued(losses: &[f64], window: usize, tol: f64) -> bool {
    let n = losses.len();
    if window == 0 || n < 2 * window || !n.is_multiple_of(window) {
        return false;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let prev = mean(&losses[n - 2 * window..n - window]);
    let cur = mean(&losses[n - window..]);
    let scale = prev.abs().max(f64::MIN_POSITIVE);
    (prev - cur) / scale < tol
}

fn record(history: &mut TrainHistory, loss: f64) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged {
            step: history.losses.len(),
        });
    }
    history.losses.push(loss);
    Ok(())
}

/// Fits `z` on the buffer by minimizing the measurability loss.
pub fn evaluate_policy<P, R>(
    buffer: &Buffer,
    z: &mut P,
    opt: &mut Adam,
    cfg: &TrainConfig,
    rng: R,
) -> Result<TrainHistory>
where
    P: ParamFn + ?Sized,
    R: Rng,
{
    cfg.validate()?;
    let mut sampler = buffer.sampler(cfg.batch_size, rng)?;
    let mut history = TrainHistory::default();
    while history.steps() < cfg.max_steps {
        let batch = buffer.select(&sampler.next_indices());
        let report = measurability_loss(&batch, z, Mode::Train)?;
        record(&mut history, report.loss)?;
        opt.step(z.params_mut(), &report.grad)?;
        if plateaued(&history.losses, cfg.window, cfg.tolerance) {
            history.converged = true;
            break;
        }
    }
    Ok(history)
}

/// Regresses `u` onto `−R⁻¹Υᵀz` at every grid point of the buffered
/// trajectories. `z` is evaluated once, in Eval mode.
#[allow(clippy::too_many_arguments)]
pub fn improve_policy<Z, U, R>(
    buffer: &Buffer,
    z: &mut Z,
    u: &mut U,
    opt: &mut Adam,
    scheme: &NoiseScheme,
    model: Option<&dyn ControlAffineModel>,
    cost: &CostSpec,
    cfg: &TrainConfig,
    rng: R,
) -> Result<TrainHistory>
where
    Z: ParamFn + ?Sized,
    U: ParamFn + ?Sized,
    R: Rng,
{
    cfg.validate()?;
    if buffer.is_empty() {
        return Err(Error::State("improving from an empty buffer".into()));
    }
    let all: Vec<_> = buffer.trajectories().iter().collect();
    let inputs = grid_inputs(&all)?;
    let z_out = z.forward(&inputs, Mode::Eval)?;
    let targets = targets_for_rows(&inputs, &z_out, scheme, model, cost)?;
    fit_regression(&inputs, &targets, all[0].steps(), u, opt, cfg, rng)
}

/// `(1/N) Σ_rows ‖u(row) − target(row)‖²` and its parameter gradient.
pub fn regression_loss<U: ParamFn + ?Sized>(
    u: &mut U,
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    mode: Mode,
) -> Result<(f64, Vec<f64>)> {
    check_dim("regression rows", inputs.nrows(), targets.nrows())?;
    let diff = u.forward(inputs, mode)? - targets;
    let n = inputs.nrows() as f64;
    let grad = u.backward(&(&diff * (2.0 / n)))?;
    Ok((diff.norm_squared() / n, grad))
}

/// Minimizes `(1/N) Σ_rows ‖u(row) − target(row)‖²` over minibatches.
///
/// Rows come in consecutive groups of `group_len` (one trajectory each);
/// minibatches draw `cfg.batch_size` whole groups.
pub fn fit_regression<U, R>(
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    group_len: usize,
    u: &mut U,
    opt: &mut Adam,
    cfg: &TrainConfig,
    rng: R,
) -> Result<TrainHistory>
where
    U: ParamFn + ?Sized,
    R: Rng,
{
    cfg.validate()?;
    check_dim("regression rows", inputs.nrows(), targets.nrows())?;
    check_dim("regression input", u.input_dim(), inputs.ncols())?;
    check_dim("regression output", u.output_dim(), targets.ncols())?;
    if group_len == 0 || !inputs.nrows().is_multiple_of(group_len) {
        return Err(Error::InvalidArgument(format!(
            "{} rows do not split into groups of {group_len}",
            inputs.nrows()
        )));
    }
    let mut sampler = EpochSampler::new(inputs.nrows() / group_len, cfg.batch_size, rng)?;
    let mut history = TrainHistory::default();
    while history.steps() < cfg.max_steps {
        let groups = sampler.next_indices();
        let rows: Vec<usize> = groups
            .iter()
            .flat_map(|g| g * group_len..(g + 1) * group_len)
            .collect();
        let x = inputs.select_rows(&rows);
        let y = targets.select_rows(&rows);
        let (loss, grad) = regression_loss(u, &x, &y, Mode::Train)?;
        record(&mut history, loss)?;
        opt.step(u.params_mut(), &grad)?;
        if plateaued(&history.losses, cfg.window, cfg.tolerance) {
            history.converged = true;
            break;
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximators::{Basis, LinearFamily, MlpBn, MlpBnConfig, TimePolyLinear};
    use crate::problems::example1_rollouts;
    use crate::sde_core::{
        LinearModel, SamplingMode, SeedStreams, StreamDomain, TimeGrid,
    };
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(lr: f64, steps: usize, batch: usize) -> TrainConfig {
        TrainConfig {
            max_steps: steps,
            tolerance: 1e-12,
            window: 50,
            batch_size: batch,
            adam: AdamConfig::with_lr(lr),
        }
    }

    fn example1_buffer(n: usize, count: usize, seed: u64) -> Buffer {
        let grid = TimeGrid::new(0.5, 50).unwrap();
        let trajs =
            example1_rollouts(n, &grid, &SeedStreams::new(seed), StreamDomain::Rollout, 0, count)
                .unwrap();
        let mut b = Buffer::new(count).unwrap();
        b.fill(0, trajs).unwrap();
        b
    }

    #[test]
    fn plateau_rule() {
        let flat = vec![1.0; 100];
        assert!(plateaued(&flat, 50, 1e-4));
        assert!(!plateaued(&flat[..99], 50, 1e-4));
        let falling: Vec<f64> = (0..100).map(|i| 1.0 / (1.0 + i as f64)).collect();
        assert!(!plateaued(&falling, 50, 1e-4));
    }

    #[test]
    fn evaluation_recovers_well_specified_theta() {
        for n in [1, 10] {
            let buffer = example1_buffer(n, 1024, 20 + n as u64);
            let mut z = LinearFamily::new(Basis::ZWell, n, 0.5);
            let c = cfg(0.01, 2000, 32);
            let mut opt = Adam::new(c.adam, 1);
            evaluate_policy(&buffer, &mut z, &mut opt, &c, ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert!((z.theta() - 1.0).abs() < 0.05, "n={n}: θ={}", z.theta());
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let buffer = example1_buffer(2, 16, 3);
        let mut z = LinearFamily::new(Basis::ZMis, 2, 0.5);
        let c = cfg(0.0, 120, 16);
        let mut opt = Adam::new(c.adam, 1);
        let h = evaluate_policy(&buffer, &mut z, &mut opt, &c, ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(z.theta(), 0.5);
        for l in &h.losses {
            assert!((l - h.losses[0]).abs() <= 1e-12 * h.losses[0]);
        }
    }

    #[test]
    fn nonfinite_loss_is_divergence() {
        let buffer = example1_buffer(1, 8, 4);
        let mut z = LinearFamily::new(Basis::ZWell, 1, f64::NAN);
        let c = cfg(0.01, 10, 8);
        let mut opt = Adam::new(c.adam, 1);
        let err = evaluate_policy(&buffer, &mut z, &mut opt, &c, ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::TrainingDiverged { step: 0 })));
    }

    #[test]
    fn empty_buffer_is_rejected() {
        let buffer = Buffer::new(4).unwrap();
        let mut z = LinearFamily::new(Basis::ZWell, 1, 0.5);
        let c = cfg(0.01, 10, 8);
        let mut opt = Adam::new(c.adam, 1);
        assert!(evaluate_policy(&buffer, &mut z, &mut opt, &c, ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    /// Buffer of scalar LQ rollouts, `dX = (−X + u)dt + dW` under `u = 0`.
    fn lq_buffer() -> (Buffer, LinearModel, CostSpec) {
        let model = LinearModel::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
        )
        .unwrap();
        let cost = CostSpec::new(
            |_x: &DVector<f64>| 0.0,
            |_t, x: &DVector<f64>| x[0] * x[0],
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 1.0).unwrap();
        let trajs = crate::sde_core::rollout_batch_model_based(
            &model,
            &scheme,
            &crate::sde_core::ZeroPolicy { dim_u: 1 },
            &cost,
            &TimeGrid::new(1.0, 20).unwrap(),
            &DVector::from_element(1, 1.0),
            &SeedStreams::new(5),
            StreamDomain::Rollout,
            0,
            32,
        )
        .unwrap();
        let mut b = Buffer::new(32).unwrap();
        b.fill(0, trajs).unwrap();
        (b, model, cost)
    }

    #[test]
    fn realizable_linear_target_fits_exactly() {
        let (buffer, model, cost) = lq_buffer();
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 1.0).unwrap();
        // z = (0.3 + 0.2t)x gives Û = −(0.3 + 0.2t)x
        let mut z = TimePolyLinear::new(1, vec![0.3, 0.2]).unwrap();
        let mut u = TimePolyLinear::new(1, vec![-0.3, -0.2]).unwrap();
        let c = cfg(1e-3, 5, 8);
        let mut opt = Adam::new(c.adam, u.num_params());
        let h = improve_policy(
            &buffer, &mut z, &mut u, &mut opt, &scheme, Some(&model), &cost, &c,
            ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(h.losses[0] < 1e-28, "{:?}", h.losses);

        let mut u = TimePolyLinear::zeros(1, 1);
        let c = cfg(0.05, 3000, 8);
        let mut opt = Adam::new(c.adam, u.num_params());
        let h = improve_policy(
            &buffer, &mut z, &mut u, &mut opt, &scheme, Some(&model), &cost, &c,
            ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(h.final_loss().unwrap() < 1e-12, "{:?}", h.final_loss());
        assert!((u.params()[0] + 0.3).abs() < 1e-5 && (u.params()[1] + 0.2).abs() < 1e-5);
    }

    #[test]
    fn improvement_with_zero_learning_rate_keeps_u() {
        let (buffer, model, cost) = lq_buffer();
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 1.0).unwrap();
        let mut z = TimePolyLinear::new(1, vec![0.3]).unwrap();
        let mut u = TimePolyLinear::new(1, vec![0.7, -0.1]).unwrap();
        let c = cfg(0.0, 60, 8);
        let mut opt = Adam::new(c.adam, 2);
        improve_policy(
            &buffer, &mut z, &mut u, &mut opt, &scheme, Some(&model), &cost, &c,
            ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(u.params(), &[0.7, -0.1]);
    }

    #[test]
    fn mlp_regression_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1000;
        let inputs: DMatrix<f64> = DMatrix::from_fn(n, 3, |_, j| {
            if j == 0 {
                rng.random_range(0.0..1.0f64)
            } else {
                rng.random_range(-2.0..2.0f64)
            }
        });
        let targets = DMatrix::from_fn(n, 1, |i, _| {
            (inputs[(i, 1)]).sin() + 0.5 * inputs[(i, 2)] * inputs[(i, 0)]
        });
        let mean = targets.mean();
        let var = targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let mut u = MlpBn::new(3, 1, MlpBnConfig::default(), &mut rng);
        let c = cfg(0.01, 4000, 100);
        let mut opt = Adam::new(c.adam, u.num_params());
        fit_regression(&inputs, &targets, 1, &mut u, &mut opt, &c, ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        let pred = u.forward(&inputs, Mode::Eval).unwrap();
        let mse = (pred - &targets).norm_squared() / n as f64;
        assert!(mse < 0.01 * var, "mse {mse} vs var {var}");
    }
}
