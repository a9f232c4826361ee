mod common;

use bsde_ml::approximators::ParamFn;
use bsde_ml::policy_iteration::hamiltonian;
use bsde_ml::problems::ScalarLq;
use bsde_ml::sde_core::{
    sample_brownian, simulate_model_based_with, FnPolicy, NoiseScheme, SamplingMode, SeedStreams,
    StreamDomain, TimeGrid,
};
use common::*;
use nalgebra::DVector;

#[test]
fn oracle_reproduces_closed_forms() {
    let steps = 1000;
    let (p, c) = linear_policy_value(&LQ, |_| 0.0, 0.0, LQ_HORIZON, steps);
    for (i, pi) in p.iter().enumerate() {
        let t = i as f64 / steps as f64;
        assert!((pi - lq_zero_policy_p(t)).abs() < 1e-12);
    }
    assert!(c.iter().all(|v| *v == 0.0));
    // optimal P(0) = 0.35162 for this instance
    let opt = riccati_optimal(&LQ, LQ_HORIZON, steps);
    assert!((opt[0] - 0.351_62).abs() < 1e-5, "{}", opt[0]);
    // the optimal feedback evaluated as a fixed policy reproduces P*
    let k = |t: f64| {
        let i = ((t * steps as f64).round() as usize).min(steps);
        2.0 * opt[i]
    };
    let (pk, _) = linear_policy_value(&LQ, k, 0.0, LQ_HORIZON, steps);
    assert!((pk[0] - opt[0]).abs() < 1e-3);
}

#[test]
fn one_step_recovers_improvement_of_the_zero_policy() {
    let out = lq_one_step(3);
    let (z, u) = (&out.z, &out.u);
    let mut z_err = 0.0f64;
    let mut u_err = 0.0f64;
    for i in 0..100 {
        let t = i as f64 / 100.0;
        // z = σ₀·v_x = 2P₀(t)x and the improved gain is −(b/r)·2P₀(t)
        let truth = 2.0 * lq_zero_policy_p(t);
        z_err = z_err.max((z.gain_at(t) - truth).abs());
        u_err = u_err.max((u.gain_at(t) + truth).abs());
    }
    assert!(z_err < 0.05, "z gain error {z_err}");
    assert!(u_err <= z_err + 0.01, "u gain error {u_err} vs z error {z_err}");
    assert_eq!(u.num_params(), 4);
}

#[test]
fn policy_difference_equals_expected_hamiltonian_gap() {
    // two fixed policies u = −k x; v^θ from the oracle, expectation along X^ψ
    let lq = ScalarLq { s: 0.5, ..LQ };
    let (k_theta, k_psi, sigma) = (0.3, 1.1, 0.6);
    let grid = TimeGrid::from_step(LQ_HORIZON, 0.002).unwrap();
    let dense = 5 * grid.steps();
    let (p_theta, _) = linear_policy_value(&lq, |_| k_theta, sigma, LQ_HORIZON, dense);
    let model = lq.model();
    let cost = lq.cost().unwrap();
    let scheme = NoiseScheme::new(SamplingMode::ModelBased, sigma).unwrap();
    let x0 = DVector::from_element(1, LQ_X0);
    let pol_theta = FnPolicy::new(1, move |_t, x: &DVector<f64>| x * -k_theta);
    let pol_psi = FnPolicy::new(1, move |_t, x: &DVector<f64>| x * -k_psi);
    let streams = SeedStreams::new(8);

    let paths = 4000;
    let mut lhs = Vec::with_capacity(paths);
    let mut rhs = Vec::with_capacity(paths);
    for i in 0..paths {
        let dw = sample_brownian(&grid, 1, &mut streams.rng(StreamDomain::Rollout, i as u64)).unwrap();
        let psi = simulate_model_based_with(&model, &scheme, &pol_psi, &cost, &grid, &x0, dw.clone())
            .unwrap();
        let theta =
            simulate_model_based_with(&model, &scheme, &pol_theta, &cost, &grid, &x0, dw).unwrap();
        lhs.push(psi.total_cost() - theta.total_cost());
        let mut gap = 0.0;
        for k in 0..grid.steps() {
            let t = grid.node(k);
            let x = &psi.states[k];
            let p = DVector::from_element(1, 2.0 * p_theta[5 * k] * x[0]);
            let h_psi = hamiltonian(t, x, &(x * -k_psi), &p, &model, &cost).unwrap();
            let h_theta = hamiltonian(t, x, &(x * -k_theta), &p, &model, &cost).unwrap();
            gap += (h_psi - h_theta) * grid.dt();
        }
        rhs.push(gap);
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let ((ml, sl), (mr, sr)) = (stats(&lhs), stats(&rhs));
    let combined = (sl * sl + sr * sr).sqrt();
    assert!(
        (ml - mr).abs() <= 3.0 * combined,
        "value difference {ml} ± {sl} vs Hamiltonian gap {mr} ± {sr}"
    );
    // and the gap is not trivially zero
    assert!(ml.abs() > 10.0 * combined);
}
