//! Diffeomorphic image registration with stationary velocity fields.
//!
//! Two scalar images on a periodic grid are registered by finding a velocity
//! field `v` whose flow transports the template onto the reference while
//! keeping a Sobolev regularization small. The reduced-space problem is solved
//! with an inexact Gauss–Newton–Krylov method: semi-Lagrangian transport
//! solvers evaluate the state, adjoint and incremental equations; the Newton
//! system is solved matrix-free by preconditioned CG with spectral
//! preconditioners; an Armijo line search globalizes the iteration. On top sit
//! a determinant-constrained search for the regularization weight and warm
//! started parameter continuation.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the common instantiations.

pub mod continuation;
pub mod diffops;
pub mod distance;
pub mod error;
mod fft;
pub mod field;
pub mod grid;
pub mod io;
pub mod kkt;
pub mod metrics;
pub mod optimizer;
pub mod scalar;
pub mod transport;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use field::{l2_inner, time_integral, ScalarField, TensorField, TimeSeriesField, VectorField};
pub use grid::Grid;
pub use scalar::Real;

pub type ScalarField64 = ScalarField<f64>;
pub type ScalarField32 = ScalarField<f32>;
pub type VectorField64 = VectorField<f64>;
pub type VectorField32 = VectorField<f32>;
pub type TensorField64 = TensorField<f64>;
pub type TensorField32 = TensorField<f32>;
pub type TimeSeriesField64 = TimeSeriesField<f64>;
pub type TimeSeriesField32 = TimeSeriesField<f32>;
