//! Differential operators on the periodic mesh: pseudo-spectral and 8th-order
//! finite-difference first derivatives, regularization operators, the
//! (near-)incompressibility projection, and spectral grid transfer.

mod fd8;
mod filters;
mod projection;
mod regularization;
mod spectral;

use serde::{Deserialize, Serialize};

pub use fd8::{fd8_derivative, fd8_divergence, fd8_gradient};
pub use filters::{high_pass, high_pass_vector, low_pass, low_pass_vector, prolong, prolong_vector, restrict, restrict_vector};
pub use projection::{
    apply_projection_metric, divergence_energy, project_body_force, projection_multiplier, IncompressibilityMode,
};
pub use regularization::{apply_inv_reg_operator, apply_inv_sqrt_reg_operator, apply_reg_operator, RegOperatorSpec};
pub use spectral::{spectral_derivative, spectral_divergence, spectral_gradient, spectral_laplacian};

use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::scalar::Real;

/// Discretization of first-order derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffScheme {
    Spectral,
    #[default]
    Fd8,
}

pub fn gradient<T: Real>(u: &ScalarField<T>, scheme: DiffScheme) -> Result<VectorField<T>> {
    match scheme {
        DiffScheme::Spectral => spectral_gradient(u),
        DiffScheme::Fd8 => fd8_gradient(u),
    }
}

pub fn divergence<T: Real>(v: &VectorField<T>, scheme: DiffScheme) -> Result<ScalarField<T>> {
    match scheme {
        DiffScheme::Spectral => spectral_divergence(v),
        DiffScheme::Fd8 => fd8_divergence(v),
    }
}

fn check_finite<T: Real>(u: &ScalarField<T>) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(crate::error::Error::NonFinite("operator input"))
    }
}
