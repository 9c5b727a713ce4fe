//! The discrete Hessian `H(v)`: the `Σ_h` field with
//! `(H(v), τ) = −(div τ, Dv) + ⟨Dv, τn⟩` for every `τ ∈ Σ_h`.

use crate::error::{Error, Result};
use crate::fe_space::{MatrixField, ScalarField};
use crate::forms::MixedOperators;

/// Stacked coefficients of `H(v)` for a raw `V_h` coefficient vector.
pub fn discrete_hessian_stacked(v: &[f64], ops: &MixedOperators) -> Vec<f64> {
    let rhs: Vec<f64> = ops.coupling_apply(v).iter().map(|x| -x).collect();
    ops.mass_solve(&rhs)
}

pub fn discrete_hessian(v: &ScalarField, ops: &MixedOperators) -> Result<MatrixField> {
    if v.space().num_dofs() != ops.space().num_dofs() {
        return Err(Error::DimensionMismatch(
            "scalar field and operators live on different spaces".into(),
        ));
    }
    let stacked = discrete_hessian_stacked(v.coefficients(), ops);
    MatrixField::from_stacked(ops.space().clone(), &stacked)
}

/// Residual of the defining equation `M η + (B − G) v = 0`, relative to `‖(B − G) v‖`.
pub fn hessian_equation_residual(v: &[f64], eta: &[f64], ops: &MixedOperators) -> f64 {
    let coupling = ops.coupling_apply(v);
    let m_eta = ops.mass.mul_vec(eta);
    let res = m_eta
        .iter()
        .zip(&coupling)
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        .sqrt();
    let scale = coupling.iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    res / scale
}

/// `max_i |(tr η, φ_i) + (Dv, Dφ_i)|` over interior DOFs `i`.
///
/// Vanishes (to round-off) whenever `η = H(v)`.
pub fn trace_identity_residual(v: &ScalarField, eta: &MatrixField, ops: &MixedOperators) -> f64 {
    let m11 = ops.scalar_mass.mul_vec(eta.component(0));
    let m22 = ops.scalar_mass.mul_vec(eta.component(2));
    let kv = ops.stiffness.mul_vec(v.coefficients());
    ops.space()
        .interior_dofs()
        .iter()
        .map(|&i| (m11[i] + m22[i] + kv[i]).abs())
        .fold(0.0, f64::max)
}
