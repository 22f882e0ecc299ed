//! Smooth part of the dual objective and primal recovery.

use crate::error::{Error, Result};
use crate::symmat::SymmetricMatrix;

fn shifted(lambda: &SymmetricMatrix, prior_precision: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    Error::check_dim(prior_precision.dim(), lambda.dim())?;
    Ok(prior_precision + lambda)
}

/// `J_S(Λ) = −log det(S⁻¹ + Λ) + tr(T̂ Λ)`.
pub fn dual_smooth_value(lambda: &SymmetricMatrix, prior_precision: &SymmetricMatrix, t_hat: &SymmetricMatrix) -> Result<f64> {
    Error::check_dim(lambda.dim(), t_hat.dim())?;
    let k = shifted(lambda, prior_precision)?;
    Ok(-k.log_det()? + t_hat.trace_product(lambda))
}

/// Matrix gradient `T̂ − (S⁻¹ + Λ)⁻¹`.
///
/// In lower-triangle coordinates an off-diagonal variable appears twice in
/// the trace terms, so its partial derivative is twice the entry returned.
pub fn dual_smooth_gradient(
    lambda: &SymmetricMatrix,
    prior_precision: &SymmetricMatrix,
    t_hat: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    Error::check_dim(lambda.dim(), t_hat.dim())?;
    let k = shifted(lambda, prior_precision)?;
    Ok(t_hat - &k.inverse()?)
}

/// `T_o = (S⁻¹ + Λ)⁻¹`.
pub fn primal_from_dual(lambda: &SymmetricMatrix, prior_precision: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    shifted(lambda, prior_precision)?.inverse()
}
