//! Central finite differences for verifying hand-written gradients, and a
//! suite that checks every approximator against every loss.

use nalgebra::DMatrix;
use rand::Rng;

use crate::approximators::{Basis, LinearFamily, MlpBn, MlpBnConfig, Mode, ParamFn, TimePolyLinear};
use crate::error::Result;
use crate::losses::{deep_bsde_loss, martingale_loss, measurability_loss};
use crate::policy_iteration::regression_loss;
use crate::problems::example1_rollouts;
use crate::sde_core::{SeedStreams, StreamDomain, TimeGrid, Trajectory};

/// `(f(p + h·e_i) − f(p − h·e_i)) / 2h` for every coordinate.
pub fn central_difference<F>(point: &[f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + h;
            let up = f(&probe);
            probe[i] = point[i] - h;
            let down = f(&probe);
            probe[i] = point[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i − n_i| / max(‖a‖_∞, ‖n‖_∞)`; zero when both vectors vanish
/// or are empty.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Tolerance on the relative error for networks.
pub const NETWORK_TOLERANCE: f64 = 1e-5;
/// Tolerance for one-parameter families whose losses are polynomial in θ.
pub const LINEAR_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub arch: String,
    pub loss: &'static str,
    pub num_params: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// A function with no parameters that outputs zeros.
#[derive(Clone, Debug)]
struct EmptyFn {
    input_dim: usize,
    output_dim: usize,
}

impl ParamFn for EmptyFn {
    fn arch(&self) -> String {
        "empty".into()
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn params(&self) -> &[f64] {
        &[]
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }
    fn forward(&mut self, inputs: &DMatrix<f64>, _mode: Mode) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(inputs.nrows(), self.output_dim))
    }
    fn backward(&mut self, _upstream: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
    fn eval(&self, _t: f64, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.output_dim]
    }
}

/// Analytic vs central-difference gradient of `loss` at the current params.
fn check<P, L>(f: &P, loss_name: &'static str, h: f64, tolerance: f64, loss: L) -> Result<GradCheck>
where
    P: ParamFn + Clone,
    L: Fn(&mut P) -> Result<(f64, Vec<f64>)>,
{
    let mut probe = f.clone();
    let (_, analytic) = loss(&mut probe)?;
    let base = f.params().to_vec();
    let mut failure = None;
    let numeric = central_difference(&base, h, |p| {
        let mut probe = f.clone();
        probe.params_mut().copy_from_slice(p);
        match loss(&mut probe) {
            Ok((v, _)) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(GradCheck {
        arch: f.arch(),
        loss: loss_name,
        num_params: base.len(),
        max_rel_error: max_relative_error(&analytic, &numeric),
        tolerance,
    })
}

/// Deep BSDE gradient including the initial-guess coordinate.
fn check_deep_bsde<P>(f: &P, batch: &[&Trajectory], y0_db: f64, h: f64, tol: f64) -> Result<GradCheck>
where
    P: ParamFn + Clone,
{
    let mut probe = f.clone();
    let report = deep_bsde_loss(batch, &mut probe, y0_db, Mode::Train)?;
    let mut analytic = report.grad;
    analytic.extend(report.grad_y0_db);
    let mut base = f.params().to_vec();
    base.push(y0_db);
    let k = f.num_params();
    let numeric = central_difference(&base, h, |p| {
        let mut probe = f.clone();
        probe.params_mut().copy_from_slice(&p[..k]);
        deep_bsde_loss(batch, &mut probe, p[k], Mode::Train).map_or(f64::NAN, |r| r.loss)
    });
    Ok(GradCheck {
        arch: f.arch(),
        loss: "deep-bsde",
        num_params: base.len(),
        max_rel_error: max_relative_error(&analytic, &numeric),
        tolerance: tol,
    })
}

/// Every approximator paired with every loss it can be trained on, on
/// small random batches.
pub fn run_gradient_suite(seed: u64) -> Result<Vec<GradCheck>> {
    let streams = SeedStreams::new(seed);
    let grid = TimeGrid::new(0.5, 10)?;
    let n = 2;
    let trajs = example1_rollouts(n, &grid, &streams, StreamDomain::Rollout, 0, 6)?;
    let batch: Vec<&Trajectory> = trajs.iter().collect();
    let mut rng = streams.rng(StreamDomain::Init, 0);
    let mut out = Vec::new();

    for basis in [Basis::ZWell, Basis::ZMis] {
        let z = LinearFamily::new(basis, n, rng.random_range(0.2..1.2));
        out.push(check(&z, "measurability", 1e-4, LINEAR_TOLERANCE, |f| {
            measurability_loss(&batch, f, Mode::Train).map(|r| (r.loss, r.grad))
        })?);
        out.push(check_deep_bsde(&z, &batch, 0.3, 1e-4, LINEAR_TOLERANCE)?);
    }
    for basis in [Basis::YWell, Basis::YMis] {
        let y = LinearFamily::new(basis, n, rng.random_range(0.2..1.2));
        out.push(check(&y, "martingale", 1e-4, LINEAR_TOLERANCE, |f| {
            martingale_loss(&batch, f, Mode::Train).map(|r| (r.loss, r.grad))
        })?);
    }

    let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let poly = TimePolyLinear::new(n, coeffs)?;
    out.push(check(&poly, "measurability", 1e-4, NETWORK_TOLERANCE, |f| {
        measurability_loss(&batch, f, Mode::Train).map(|r| (r.loss, r.grad))
    })?);
    out.push(check_deep_bsde(&poly, &batch, -0.4, 1e-4, NETWORK_TOLERANCE)?);

    let cfg = MlpBnConfig {
        hidden: 5,
        ..MlpBnConfig::default()
    };
    let z_net = MlpBn::new(1 + n, n, cfg, &mut rng);
    out.push(check(&z_net, "measurability", 1e-5, NETWORK_TOLERANCE, |f| {
        measurability_loss(&batch, f, Mode::Train).map(|r| (r.loss, r.grad))
    })?);
    out.push(check_deep_bsde(&z_net, &batch, 0.7, 1e-5, NETWORK_TOLERANCE)?);
    let y_net = MlpBn::new(1 + n, 1, cfg, &mut rng);
    out.push(check(&y_net, "martingale", 1e-5, NETWORK_TOLERANCE, |f| {
        martingale_loss(&batch, f, Mode::Train).map(|r| (r.loss, r.grad))
    })?);

    let rows = 40;
    let inputs = DMatrix::from_fn(rows, 1 + n, |_, _| rng.random_range(-1.5..1.5));
    let targets = DMatrix::from_fn(rows, n, |_, _| rng.random_range(-2.0..2.0));
    for mode in [Mode::Train, Mode::Eval] {
        let mut u_net = MlpBn::new(1 + n, n, cfg, &mut rng);
        // non-trivial running statistics for the Eval-mode check
        u_net.forward(&inputs, Mode::Train)?;
        out.push(check(&u_net, "improvement-mse", 1e-5, NETWORK_TOLERANCE, |f| {
            regression_loss(f, &inputs, &targets, mode)
        })?);
    }
    out.push(check(&poly, "improvement-mse", 1e-4, NETWORK_TOLERANCE, |f| {
        regression_loss(f, &inputs, &targets, Mode::Train)
    })?);

    let empty = EmptyFn {
        input_dim: 1 + n,
        output_dim: n,
    };
    out.push(check(&empty, "measurability", 1e-5, NETWORK_TOLERANCE, |f| {
        measurability_loss(&batch, f, Mode::Train).map(|r| (r.loss, r.grad))
    })?);
    Ok(out)
}
