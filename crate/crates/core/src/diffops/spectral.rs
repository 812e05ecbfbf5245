use rustfft::num_complex::Complex;

use super::check_finite;
use crate::error::Result;
use crate::fft::{self, odd_wavenumber, Spectrum};
use crate::field::{ScalarField, VectorField};
use crate::scalar::Real;

// The mesh coordinate decreases with the storage index, so a physical mode
// e^{-ikx} appears at FFT index +k and ∂/∂x acts as multiplication by -ik.
fn differentiate<T: Real>(s: &Spectrum<T>, axis: usize) -> Spectrum<T> {
    let mut out = s.clone();
    let n = s.grid.n(axis);
    out.for_each_mode(|_, ix, c| {
        let k = T::lit(odd_wavenumber(ix[axis], n) as f64);
        *c = Complex::new(k * c.im, -k * c.re);
    });
    out
}

/// Pseudo-spectral derivative along one axis.
pub fn spectral_derivative<T: Real>(u: &ScalarField<T>, axis: usize) -> Result<ScalarField<T>> {
    check_finite(u)?;
    Ok(fft::inverse(differentiate(&fft::forward(u), axis)))
}

/// Pseudo-spectral gradient; the Nyquist mode is zeroed.
pub fn spectral_gradient<T: Real>(u: &ScalarField<T>) -> Result<VectorField<T>> {
    check_finite(u)?;
    let s = fft::forward(u);
    let comps = (0..u.grid().dim()).map(|a| fft::inverse(differentiate(&s, a))).collect();
    VectorField::from_components(comps)
}

pub fn spectral_divergence<T: Real>(v: &VectorField<T>) -> Result<ScalarField<T>> {
    let grid = *v.grid();
    let mut acc: Option<Spectrum<T>> = None;
    for (a, c) in v.components().iter().enumerate() {
        check_finite(c)?;
        let d = differentiate(&fft::forward(c), a);
        acc = Some(match acc {
            None => d,
            Some(mut s) => {
                s.data.iter_mut().zip(&d.data).for_each(|(x, y)| *x = *x + *y);
                s
            }
        });
    }
    Ok(acc.map(fft::inverse).unwrap_or_else(|| ScalarField::zeros(grid)))
}

/// Pseudo-spectral Laplacian with symbol `-|k|²`.
pub fn spectral_laplacian<T: Real>(u: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_finite(u)?;
    let d = u.grid().dim();
    Ok(fft::apply_symbol(u, |k, _| -T::lit(k[..d].iter().map(|&x| (x * x) as f64).sum())))
}
