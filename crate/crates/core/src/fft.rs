//! Complex N-d FFT over a grid. Forward is unscaled, inverse is scaled by `1/∏n_a`.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::field::ScalarField;
use crate::grid::Grid;
use crate::scalar::Real;

type PlanCache = Mutex<HashMap<(TypeId, usize, bool), Box<dyn Any + Send + Sync>>>;

fn plan<T: Real>(n: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let key = (TypeId::of::<T>(), n, inverse);
    let mut map = CACHE.get_or_init(Default::default).lock().expect("fft plan cache poisoned");
    if let Some(p) = map.get(&key) {
        return p.downcast_ref::<Arc<dyn Fft<T>>>().expect("plan type").clone();
    }
    let mut planner = FftPlanner::<T>::new();
    let p = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    map.insert(key, Box::new(p.clone()));
    p
}

/// Fourier coefficients of a field, indexed like the field itself.
#[derive(Clone, Debug)]
pub(crate) struct Spectrum<T> {
    pub grid: Grid,
    pub data: Vec<Complex<T>>,
}

/// Signed wavenumber of FFT index `i` on an axis of size `n`, in `(-n/2, n/2]`.
#[inline]
pub(crate) fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Wavenumber with the Nyquist mode mapped to zero (used for odd derivatives).
#[inline]
pub(crate) fn odd_wavenumber(i: usize, n: usize) -> i64 {
    if i == n / 2 {
        0
    } else {
        wavenumber(i, n)
    }
}

fn transform_axis<T: Real>(grid: &Grid, data: &mut [Complex<T>], axis: usize, inverse: bool) {
    let n = grid.n(axis);
    let fft = plan::<T>(n, inverse);
    let stride = grid.strides()[axis];
    if stride == 1 {
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex::default(); fft.get_inplace_scratch_len()],
            |scratch, line| fft.process_with_scratch(line, scratch),
        );
        return;
    }
    let total = data.len();
    let starts: Vec<usize> = (0..total).filter(|&idx| grid.unravel(idx)[axis] == 0).collect();
    let lines: Vec<Vec<Complex<T>>> = starts
        .par_iter()
        .map_init(
            || vec![Complex::default(); fft.get_inplace_scratch_len()],
            |scratch, &s| {
                let mut line: Vec<Complex<T>> = (0..n).map(|k| data[s + k * stride]).collect();
                fft.process_with_scratch(&mut line, scratch);
                line
            },
        )
        .collect();
    for (&s, line) in starts.iter().zip(lines) {
        for (k, c) in line.into_iter().enumerate() {
            data[s + k * stride] = c;
        }
    }
}

pub(crate) fn forward<T: Real>(u: &ScalarField<T>) -> Spectrum<T> {
    let grid = *u.grid();
    let mut data: Vec<Complex<T>> = u.values().iter().map(|&x| Complex::new(x, T::zero())).collect();
    for a in 0..grid.dim() {
        transform_axis(&grid, &mut data, a, false);
    }
    Spectrum { grid, data }
}

/// Inverse transform; the imaginary part is discarded.
pub(crate) fn inverse<T: Real>(mut s: Spectrum<T>) -> ScalarField<T> {
    let grid = s.grid;
    for a in 0..grid.dim() {
        transform_axis(&grid, &mut s.data, a, true);
    }
    let scale = T::one() / T::from_usize_lossy(grid.len());
    let values = s.data.iter().map(|c| c.re * scale).collect();
    ScalarField::from_vec_unchecked(grid, values)
}

impl<T: Real> Spectrum<T> {
    /// Visits every mode with its signed per-axis wavenumbers.
    pub fn for_each_mode(&mut self, mut f: impl FnMut([i64; 3], [usize; 3], &mut Complex<T>)) {
        let grid = self.grid;
        for (idx, c) in self.data.iter_mut().enumerate() {
            let ix = grid.unravel(idx);
            let mut k = [0i64; 3];
            for a in 0..grid.dim() {
                k[a] = wavenumber(ix[a], grid.n(a));
            }
            f(k, ix, c);
        }
    }

    /// Multiplies every mode by a real symbol.
    pub fn scale_modes(&mut self, mut symbol: impl FnMut([i64; 3], [usize; 3]) -> T) {
        self.for_each_mode(|k, ix, c| *c = *c * symbol(k, ix));
    }
}

/// Applies a real per-mode multiplier to a scalar field.
pub(crate) fn apply_symbol<T: Real>(
    u: &ScalarField<T>,
    symbol: impl FnMut([i64; 3], [usize; 3]) -> T,
) -> ScalarField<T> {
    let mut s = forward(u);
    s.scale_modes(symbol);
    inverse(s)
}
