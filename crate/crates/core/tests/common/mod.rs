//! Shared oracles for the integration tests.
#![allow(dead_code)]

use bsde_ml::approximators::{AdamConfig, TimePolyLinear};
use bsde_ml::policy_iteration::{
    run_policy_iteration_with, ModelPlant, PIConfig, PIOutcome, TrainConfig,
};
use bsde_ml::problems::ScalarLq;
use bsde_ml::sde_core::{LinearModel, SamplingMode};
use nalgebra::DVector;

/// `ẋ = −x + u`, running cost `x² + ½u²`, no terminal cost, `T = 1`.
pub const LQ: ScalarLq = ScalarLq {
    a: -1.0,
    b: 1.0,
    q: 1.0,
    r: 1.0,
    s: 0.0,
};
pub const LQ_HORIZON: f64 = 1.0;
pub const LQ_X0: f64 = 1.0;

/// Classic RK4 for `y' = f(t, y)` integrated from `t1` back to `t0`.
/// Returns `y` at `t0 + k·(t1 − t0)/steps` for `k = 0..=steps`.
pub fn rk4_backward<F>(f: F, y_end: Vec<f64>, t0: f64, t1: f64, steps: usize) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let h = -(t1 - t0) / steps as f64;
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let mut out = vec![y_end.clone(); steps + 1];
    let mut y = y_end;
    for i in (0..steps).rev() {
        let t = t0 + (i + 1) as f64 * (t1 - t0) / steps as f64;
        let k1 = f(t, &y);
        let k2 = f(t + h / 2.0, &axpy(&y, &k1, h / 2.0));
        let k3 = f(t + h / 2.0, &axpy(&y, &k2, h / 2.0));
        let k4 = f(t + h, &axpy(&y, &k3, h));
        y = y
            .iter()
            .enumerate()
            .map(|(j, v)| v + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        out[i] = y.clone();
    }
    out
}

/// Optimal `P(t)` with `v*(t, x) = P(t)x²` (noise only adds a constant).
pub fn riccati_optimal(lq: &ScalarLq, horizon: f64, steps: usize) -> Vec<f64> {
    let (a, b, q, r) = (lq.a, lq.b, lq.q, lq.r);
    rk4_backward(
        |_t, y| vec![-(q + 2.0 * a * y[0] - 2.0 * b * b * y[0] * y[0] / r)],
        vec![lq.s],
        0.0,
        horizon,
        steps,
    )
    .into_iter()
    .map(|y| y[0])
    .collect()
}

/// Value `P(t)x² + c(t)` of the feedback `u = −k(t)x` under noise `σ dW`.
/// Returns `(P, c)` on the dense grid.
pub fn linear_policy_value<K>(
    lq: &ScalarLq,
    k: K,
    sigma: f64,
    horizon: f64,
    steps: usize,
) -> (Vec<f64>, Vec<f64>)
where
    K: Fn(f64) -> f64,
{
    let (a, b, q, r) = (lq.a, lq.b, lq.q, lq.r);
    let sol = rk4_backward(
        |t, y| {
            let kt = k(t);
            vec![
                -(q + 0.5 * r * kt * kt + 2.0 * (a - b * kt) * y[0]),
                -sigma * sigma * y[0],
            ]
        },
        vec![lq.s, 0.0],
        0.0,
        horizon,
        steps,
    );
    sol.into_iter().map(|y| (y[0], y[1])).unzip()
}

/// Zero-policy `P₀(t) = ½(1 − e^{−2(T−t)})` for [`LQ`].
pub fn lq_zero_policy_p(t: f64) -> f64 {
    0.5 * (1.0 - (-2.0 * (LQ_HORIZON - t)).exp())
}

pub fn lq_model() -> LinearModel {
    LQ.model()
}

/// One evaluation + improvement step from `u ≡ 0` on [`LQ`] with cubic-in-time
/// linear feedback families for both `z` and `u`.
pub fn lq_one_step(seed: u64) -> PIOutcome<TimePolyLinear, TimePolyLinear> {
    let train = TrainConfig {
        max_steps: 3000,
        batch_size: 64,
        adam: AdamConfig::with_lr(0.01),
        ..TrainConfig::default()
    };
    let cfg = PIConfig {
        iterations: 1,
        rollouts: 512,
        buffer_capacity: 512,
        horizon: LQ_HORIZON,
        dt: 0.01,
        mode: SamplingMode::ModelBased,
        sigma0: 1.0,
        evaluation: train.clone(),
        improvement: train,
        seed,
        ..PIConfig::default()
    };
    let plant = ModelPlant::new(lq_model(), DVector::from_element(1, LQ_X0)).unwrap();
    run_policy_iteration_with(
        &cfg,
        &LQ.cost().unwrap(),
        &plant,
        TimePolyLinear::zeros(1, 3),
        TimePolyLinear::zeros(1, 3),
    )
    .unwrap()
}
