use rayon::prelude::*;

use super::check_finite;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::scalar::Real;

const WEIGHTS: [f64; 4] = [672.0, -168.0, 32.0, -3.0];

/// Eighth-order centered first derivative along `axis` with periodic wrap.
///
/// Weights `(3, -32, 168, -672 | 672, -168, 32, -3) / (840 h)` are applied
/// along increasing coordinate. Since the coordinate decreases with the
/// storage index, the `+j h` neighbour lives at index `i - j`.
pub fn fd8_derivative<T: Real>(u: &ScalarField<T>, axis: usize) -> Result<ScalarField<T>> {
    check_finite(u)?;
    let grid = *u.grid();
    let n = grid.n(axis);
    if n < 9 {
        return Err(Error::Contract(format!("fd8 stencil needs n >= 9 along axis {axis}, got {n}")));
    }
    let stride = grid.strides()[axis];
    let inv = T::one() / (T::lit(840.0) * grid.spacing::<T>(axis));
    let w: [T; 4] = WEIGHTS.map(T::lit);
    let src = u.values();
    let out: Vec<T> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            let mut acc = T::zero();
            for (j, &wj) in w.iter().enumerate() {
                let j = j + 1;
                let plus = base + ((i + n - j) % n) * stride;
                let minus = base + ((i + j) % n) * stride;
                acc = acc + wj * (src[plus] - src[minus]);
            }
            acc * inv
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(grid, out))
}

pub fn fd8_gradient<T: Real>(u: &ScalarField<T>) -> Result<VectorField<T>> {
    let comps = (0..u.grid().dim()).map(|a| fd8_derivative(u, a)).collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

pub fn fd8_divergence<T: Real>(v: &VectorField<T>) -> Result<ScalarField<T>> {
    let mut acc = ScalarField::zeros(*v.grid());
    for (a, c) in v.components().iter().enumerate() {
        acc.axpy(T::one(), &fd8_derivative(c, a)?);
    }
    Ok(acc)
}
