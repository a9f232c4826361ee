use nalgebra::{DMatrix, DVector};

use crate::approximators::ParamFn;
use crate::error::{check_dim, Error, Result};
use crate::problems::CostSpec;
use crate::sde_core::{ControlAffineModel, NoiseScheme, SamplingMode};

/// `H(t, x, u, p) = Q(t, x) + ½ uᵀRu + ⟨p, F(t, x) + G(t, x)·u⟩`.
pub fn hamiltonian<M: ControlAffineModel + ?Sized>(
    t: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    p: &DVector<f64>,
    model: &M,
    cost: &CostSpec,
) -> Result<f64> {
    check_dim("hamiltonian state", model.dim_x(), x.len())?;
    check_dim("hamiltonian costate", model.dim_x(), p.len())?;
    check_dim("hamiltonian control", model.dim_u(), u.len())?;
    let dynamics = model.drift(t, x) + model.gain(t, x) * u;
    Ok(cost.running_cost(t, x, u)? + p.dot(&dynamics))
}

/// `argmin_u H(t, x, u, p) = −R⁻¹ G(t, x)ᵀ p`.
pub fn hamiltonian_argmin<M: ControlAffineModel + ?Sized>(
    t: f64,
    x: &DVector<f64>,
    p: &DVector<f64>,
    model: &M,
    cost: &CostSpec,
) -> Result<DVector<f64>> {
    check_dim("hamiltonian state", model.dim_x(), x.len())?;
    check_dim("hamiltonian costate", model.dim_x(), p.len())?;
    check_dim("control weight", model.dim_u(), cost.dim_u())?;
    Ok(-(cost.control_weight_inv() * model.gain(t, x).transpose() * p))
}

/// `Û = −R⁻¹ Υ(t, x)ᵀ z` for a given diffusion-coordinate value `z`.
///
/// Model-based sampling needs `G` to form `Υ = σ₀⁻¹G`; model-free sampling
/// uses `Υ = σ₀⁻¹I` and ignores `model`.
pub fn target_from_z(
    t: f64,
    x: &DVector<f64>,
    z: &DVector<f64>,
    scheme: &NoiseScheme,
    model: Option<&dyn ControlAffineModel>,
    cost: &CostSpec,
) -> Result<DVector<f64>> {
    if scheme.sigma0 == 0.0 {
        return Err(Error::InvalidArgument(
            "improvement target needs a positive noise level".into(),
        ));
    }
    let r_inv = cost.control_weight_inv();
    match scheme.mode {
        SamplingMode::ModelBased => {
            let model = model.ok_or_else(|| {
                Error::InvalidArgument("model-based improvement requires a model".into())
            })?;
            check_dim("z under model-based sampling", model.dim_x(), z.len())?;
            let upsilon = scheme.upsilon(&model.gain(t, x))?;
            check_dim("control weight", upsilon.ncols(), r_inv.nrows())?;
            Ok(-(r_inv * upsilon.transpose() * z))
        }
        SamplingMode::ModelFree => {
            check_dim("z under model-free sampling", r_inv.nrows(), z.len())?;
            Ok(-(r_inv * z) / scheme.sigma0)
        }
    }
}

/// [`target_from_z`] with `z` evaluated from a trained approximator.
pub fn improvement_target<P: ParamFn + ?Sized>(
    t: f64,
    x: &DVector<f64>,
    z: &P,
    scheme: &NoiseScheme,
    model: Option<&dyn ControlAffineModel>,
    cost: &CostSpec,
) -> Result<DVector<f64>> {
    check_dim("z input", 1 + x.len(), z.input_dim())?;
    let zv = DVector::from_vec(z.eval(t, x.as_slice()));
    target_from_z(t, x, &zv, scheme, model, cost)
}

/// Targets for every row of a batched `(t, x)` input matrix, given the
/// matching rows of `z` outputs.
pub(crate) fn targets_for_rows(
    inputs: &DMatrix<f64>,
    z_out: &DMatrix<f64>,
    scheme: &NoiseScheme,
    model: Option<&dyn ControlAffineModel>,
    cost: &CostSpec,
) -> Result<DMatrix<f64>> {
    let m = cost.dim_u();
    let mut out = DMatrix::zeros(inputs.nrows(), m);
    for r in 0..inputs.nrows() {
        let t = inputs[(r, 0)];
        let x = DVector::from_iterator(inputs.ncols() - 1, inputs.row(r).iter().skip(1).copied());
        let z = DVector::from_iterator(z_out.ncols(), z_out.row(r).iter().copied());
        let u = target_from_z(t, &x, &z, scheme, model, cost)?;
        out.row_mut(r).copy_from(&u.transpose());
    }
    Ok(out)
}
