use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use super::{
    sample_brownian, BlackBoxEnv, BrownianIncrements, ControlAffineModel, NoiseScheme, Policy,
    SamplingMode, SeedStreams, StreamDomain, TimeGrid,
};
use crate::error::{check_dim, Error, Result};
use crate::problems::CostSpec;

/// Rollouts abort once `‖X_k‖` exceeds this bound.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// One sampled path on a [`TimeGrid`].
///
/// `states` has `H + 1` entries; `dw`, `controls` and `running_costs` have `H`.
/// `controls[k]` is the policy output at `(t_k, X_k)` *before* any exploration
/// noise, and `running_costs[k] = Q(t_k, X_k) + ½ uᵀRu` at that control.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<DVector<f64>>,
    pub dw: BrownianIncrements,
    pub controls: Vec<DVector<f64>>,
    pub running_costs: Vec<f64>,
    pub terminal_cost: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn dim_x(&self) -> usize {
        self.states[0].len()
    }

    pub fn dim_w(&self) -> usize {
        self.dw.dim()
    }

    pub fn terminal_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least x_0")
    }

    /// `φ(X_H) + Σ_{j ≥ k} g_j·dt` for `k = 0..=H`.
    pub fn cost_to_go(&self) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut out = vec![0.0; self.steps() + 1];
        let mut acc = self.terminal_cost;
        out[self.steps()] = acc;
        for k in (0..self.steps()).rev() {
            acc += self.running_costs[k] * dt;
            out[k] = acc;
        }
        out
    }

    pub fn total_cost(&self) -> f64 {
        self.cost_to_go()[0]
    }
}

fn guard(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) && x.norm() <= DIVERGENCE_BOUND {
        Ok(())
    } else {
        Err(Error::SimulationDiverged { step })
    }
}

/// Euler–Maruyama on a white-box model:
/// `X_{k+1} = X_k + (F + G·u)·dt + σ(t_k, X_k)·dW_k`, with `σ` taken from
/// `scheme` (either `σ₀·I` or `σ₀·G`).
pub fn simulate_model_based<M, P, R>(
    model: &M,
    scheme: &NoiseScheme,
    policy: &P,
    cost: &CostSpec,
    grid: &TimeGrid,
    x0: &DVector<f64>,
    rng: &mut R,
) -> Result<Trajectory>
where
    M: ControlAffineModel + ?Sized,
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    let dim_w = scheme.dim_w(model.dim_x(), model.dim_u());
    let dw = sample_brownian(grid, dim_w, rng)?;
    simulate_model_based_with(model, scheme, policy, cost, grid, x0, dw)
}

/// [`simulate_model_based`] with caller-supplied increments.
pub fn simulate_model_based_with<M, P>(
    model: &M,
    scheme: &NoiseScheme,
    policy: &P,
    cost: &CostSpec,
    grid: &TimeGrid,
    x0: &DVector<f64>,
    dw: BrownianIncrements,
) -> Result<Trajectory>
where
    M: ControlAffineModel + ?Sized,
    P: Policy + ?Sized,
{
    check_dim("initial state", model.dim_x(), x0.len())?;
    check_dim("policy output", model.dim_u(), policy.dim_u())?;
    check_dim(
        "Brownian dimension",
        scheme.dim_w(model.dim_x(), model.dim_u()),
        dw.dim(),
    )?;
    check_dim("Brownian increments", grid.steps(), dw.len())?;
    guard(x0, 0)?;

    let dt = grid.dt();
    let h = grid.steps();
    let mut states = Vec::with_capacity(h + 1);
    let mut controls = Vec::with_capacity(h);
    let mut running_costs = Vec::with_capacity(h);
    let mut x = x0.clone();
    states.push(x.clone());
    for k in 0..h {
        let t = grid.node(k);
        let u = policy.act(t, &x);
        let g = model.gain(t, &x);
        running_costs.push(cost.running_cost(t, &x, &u)?);
        let dw_k = DVector::from_column_slice(dw.step(k));
        let noise = match scheme.mode {
            SamplingMode::ModelBased => dw_k * scheme.sigma0,
            SamplingMode::ModelFree => &g * dw_k * scheme.sigma0,
        };
        x = &x + (model.drift(t, &x) + &g * &u) * dt + noise;
        guard(&x, k + 1)?;
        controls.push(u);
        states.push(x.clone());
    }
    let terminal_cost = cost.terminal(&x);
    Ok(Trajectory {
        grid: *grid,
        states,
        dw,
        controls,
        running_costs,
        terminal_cost,
    })
}

/// Rollout through an opaque stepper with control-side exploration
/// `u + ξ_k`, `ξ_k = σ₀·dW_k/dt`. The learner keeps `dW_k` and the
/// unperturbed control.
pub fn simulate_model_free<E, P, R>(
    env: &mut E,
    sigma0: f64,
    policy: &P,
    cost: &CostSpec,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<Trajectory>
where
    E: BlackBoxEnv + ?Sized,
    P: Policy + ?Sized,
    R: Rng + ?Sized,
{
    let dw = sample_brownian(grid, env.dim_u(), rng)?;
    simulate_model_free_with(env, sigma0, policy, cost, grid, dw)
}

/// [`simulate_model_free`] with caller-supplied increments.
pub fn simulate_model_free_with<E, P>(
    env: &mut E,
    sigma0: f64,
    policy: &P,
    cost: &CostSpec,
    grid: &TimeGrid,
    dw: BrownianIncrements,
) -> Result<Trajectory>
where
    E: BlackBoxEnv + ?Sized,
    P: Policy + ?Sized,
{
    if !(sigma0.is_finite() && sigma0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("bad sigma0 {sigma0}")));
    }
    check_dim("policy output", env.dim_u(), policy.dim_u())?;
    check_dim("Brownian dimension", env.dim_u(), dw.dim())?;
    check_dim("Brownian increments", grid.steps(), dw.len())?;

    let dt = grid.dt();
    let h = grid.steps();
    let mut states = Vec::with_capacity(h + 1);
    let mut controls = Vec::with_capacity(h);
    let mut running_costs = Vec::with_capacity(h);
    let mut x = env.reset();
    check_dim("environment state", env.dim_x(), x.len())?;
    guard(&x, 0)?;
    states.push(x.clone());
    for k in 0..h {
        let t = grid.node(k);
        let u = policy.act(t, &x);
        running_costs.push(cost.running_cost(t, &x, &u)?);
        let applied = if sigma0 == 0.0 {
            u.clone()
        } else {
            &u + DVector::from_column_slice(dw.step(k)) * (sigma0 / dt)
        };
        x = env.step(&applied, dt);
        guard(&x, k + 1)?;
        controls.push(u);
        states.push(x.clone());
    }
    let terminal_cost = cost.terminal(&x);
    Ok(Trajectory {
        grid: *grid,
        states,
        dw,
        controls,
        running_costs,
        terminal_cost,
    })
}

fn first_error(results: Vec<Result<Trajectory>>) -> Result<Vec<Trajectory>> {
    results.into_iter().collect()
}

/// `count` model-based rollouts in parallel; rollout `i` uses stream
/// `(domain, first_index + i)`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_batch_model_based<M, P>(
    model: &M,
    scheme: &NoiseScheme,
    policy: &P,
    cost: &CostSpec,
    grid: &TimeGrid,
    x0: &DVector<f64>,
    streams: &SeedStreams,
    domain: StreamDomain,
    first_index: u64,
    count: usize,
) -> Result<Vec<Trajectory>>
where
    M: ControlAffineModel + ?Sized,
    P: Policy + ?Sized,
{
    let results = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(domain, first_index + i as u64);
            simulate_model_based(model, scheme, policy, cost, grid, x0, &mut rng)
        })
        .collect();
    first_error(results)
}

/// `count` model-free rollouts in parallel, each on its own clone of `env`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_batch_model_free<E, P>(
    env: &E,
    sigma0: f64,
    policy: &P,
    cost: &CostSpec,
    grid: &TimeGrid,
    streams: &SeedStreams,
    domain: StreamDomain,
    first_index: u64,
    count: usize,
) -> Result<Vec<Trajectory>>
where
    E: BlackBoxEnv + Clone + Sync,
    P: Policy + ?Sized,
{
    let results = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(domain, first_index + i as u64);
            let mut env = env.clone();
            simulate_model_free(&mut env, sigma0, policy, cost, grid, &mut rng)
        })
        .collect();
    first_error(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{pendulum_cost, CostSpec, PendulumModel};
    use crate::sde_core::{euler_env_from_model, LinearModel, SamplingMode, ZeroPolicy, FnPolicy};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn free_cost(n: usize, dim_u: usize) -> CostSpec {
        CostSpec::new(
            |x: &DVector<f64>| x.norm_squared(),
            move |_t, _x: &DVector<f64>| -(n as f64),
            DMatrix::identity(dim_u, dim_u),
        )
        .unwrap()
    }

    #[test]
    fn pure_brownian_shift() {
        let n = 3;
        let model = LinearModel::zero(n, 0);
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 1.0).unwrap();
        let grid = TimeGrid::new(0.5, 50).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let streams = SeedStreams::new(11);
        let traj = simulate_model_based(
            &model,
            &scheme,
            &ZeroPolicy { dim_u: 0 },
            &free_cost(n, 0),
            &grid,
            &x0,
            &mut streams.rng(StreamDomain::Rollout, 0),
        )
        .unwrap();
        assert_eq!(traj.states.len(), 51);
        assert_eq!(traj.controls.len(), 50);
        assert_eq!(traj.running_costs.len(), 50);
        assert_eq!(traj.states[0], x0);
        let mut w = x0.clone();
        for k in 0..50 {
            w += DVector::from_column_slice(traj.dw.step(k));
            assert!((&traj.states[k + 1] - &w).amax() < 1e-14);
        }
        assert!(traj.running_costs.iter().all(|&g| g == -3.0));
        assert_eq!(traj.terminal_cost, traj.states[50].norm_squared());
    }

    #[test]
    fn deterministic_pendulum_stays_at_rest() {
        let model = PendulumModel::default();
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let x0 = DVector::from_vec(vec![PI, 0.0]);
        let traj = simulate_model_based(
            &model,
            &scheme,
            &ZeroPolicy { dim_u: 1 },
            &pendulum_cost(),
            &grid,
            &x0,
            &mut SeedStreams::new(0).rng(StreamDomain::Rollout, 0),
        )
        .unwrap();
        for x in &traj.states {
            assert!((x[0] - PI).abs() < 1e-12 && x[1].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_model_free_matches_deterministic_rollout() {
        let model = PendulumModel::default();
        let x0 = DVector::from_vec(vec![PI - 0.3, 0.2]);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let policy = FnPolicy::new(1, |t, x: &DVector<f64>| DVector::from_vec(vec![-2.0 * x[0] + t]));
        let cost = pendulum_cost();
        let mut env = euler_env_from_model(model, x0.clone());
        let mut rng = SeedStreams::new(1).rng(StreamDomain::Rollout, 0);
        let a = simulate_model_free(&mut env, 0.0, &policy, &cost, &grid, &mut rng).unwrap();
        let scheme = NoiseScheme::new(SamplingMode::ModelFree, 0.0).unwrap();
        let b = simulate_model_based(&model, &scheme, &policy, &cost, &grid, &x0, &mut rng).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.controls, b.controls);
        assert_eq!(a.running_costs, b.running_costs);
    }

    #[test]
    fn model_free_records_unperturbed_control() {
        let model = PendulumModel::default();
        let x0 = DVector::from_vec(vec![PI, 0.0]);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let mut env = euler_env_from_model(model, x0.clone());
        let mut rng = SeedStreams::new(5).rng(StreamDomain::Rollout, 3);
        let traj = simulate_model_free(
            &mut env,
            1.414,
            &ZeroPolicy { dim_u: 1 },
            &pendulum_cost(),
            &grid,
            &mut rng,
        )
        .unwrap();
        assert_eq!(traj.states.len(), 101);
        assert_eq!(traj.states[0], x0);
        assert!(traj.controls.iter().all(|u| u[0] == 0.0));
        assert!(traj.states.iter().all(|x| x.iter().all(|v| v.is_finite())));
        // noise did move the state
        assert!((traj.terminal_state() - &x0).amax() > 1e-3);
        // costs are evaluated at u = 0
        for k in 0..100 {
            let x = &traj.states[k];
            let q = 1.01 * x[0] * x[0] + 0.01 * x[1] * x[1];
            assert!((traj.running_costs[k] - q).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let model = LinearModel::new(
            DMatrix::from_element(1, 1, 50.0),
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
        )
        .unwrap();
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let err = simulate_model_based(
            &model,
            &scheme,
            &ZeroPolicy { dim_u: 1 },
            &free_cost(1, 1),
            &grid,
            &DVector::from_vec(vec![1.0]),
            &mut SeedStreams::new(0).rng(StreamDomain::Rollout, 0),
        )
        .unwrap_err();
        // (1.5)^k > 1e6 first at k = 35
        assert!(matches!(err, Error::SimulationDiverged { step: 35 }), "{err:?}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = PendulumModel::default();
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let r = simulate_model_based(
            &model,
            &scheme,
            &ZeroPolicy { dim_u: 2 },
            &pendulum_cost(),
            &grid,
            &DVector::zeros(2),
            &mut SeedStreams::new(0).rng(StreamDomain::Rollout, 0),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn batches_are_reproducible() {
        let model = PendulumModel::default();
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 1.414).unwrap();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let x0 = DVector::from_vec(vec![PI, 0.0]);
        let streams = SeedStreams::new(99);
        let run = || {
            rollout_batch_model_based(
                &model,
                &scheme,
                &ZeroPolicy { dim_u: 1 },
                &pendulum_cost(),
                &grid,
                &x0,
                &streams,
                StreamDomain::Rollout,
                0,
                16,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.states, q.states);
            assert_eq!(p.dw, q.dw);
        }
        // sequential call on stream 7 matches batch entry 7
        let single = simulate_model_based(
            &model,
            &scheme,
            &ZeroPolicy { dim_u: 1 },
            &pendulum_cost(),
            &grid,
            &x0,
            &mut streams.rng(StreamDomain::Rollout, 7),
        )
        .unwrap();
        assert_eq!(single.states, a[7].states);
    }

    #[test]
    fn cost_to_go_sums_backwards() {
        let model = LinearModel::zero(1, 0);
        let scheme = NoiseScheme::new(SamplingMode::ModelBased, 1.0).unwrap();
        let grid = TimeGrid::new(0.5, 50).unwrap();
        let traj = simulate_model_based(
            &model,
            &scheme,
            &ZeroPolicy { dim_u: 0 },
            &free_cost(1, 0),
            &grid,
            &DVector::zeros(1),
            &mut SeedStreams::new(2).rng(StreamDomain::Rollout, 0),
        )
        .unwrap();
        let ctg = traj.cost_to_go();
        assert_eq!(ctg.len(), 51);
        assert_eq!(ctg[50], traj.terminal_cost);
        assert!((ctg[0] - (traj.terminal_cost - 0.5)).abs() < 1e-12);
    }
}
