use rustfft::num_complex::Complex;

use crate::error::Result;
use crate::fft::{self, wavenumber, Spectrum};
use crate::field::{ScalarField, VectorField};
use crate::scalar::Real;

/// Low band: every axis satisfies `|k_a| < n_a / 4` (the coarse grid's
/// Nyquist-free modes). The high band is the exact complement.
#[inline]
pub(crate) fn in_low_band(k: [i64; 3], dims: &[usize]) -> bool {
    dims.iter().enumerate().all(|(a, &n)| k[a].unsigned_abs() < (n / 4) as u64)
}

pub fn low_pass<T: Real>(u: &ScalarField<T>) -> ScalarField<T> {
    let dims = u.grid().dims().to_vec();
    fft::apply_symbol(u, |k, _| if in_low_band(k, &dims) { T::one() } else { T::zero() })
}

pub fn high_pass<T: Real>(u: &ScalarField<T>) -> ScalarField<T> {
    let dims = u.grid().dims().to_vec();
    fft::apply_symbol(u, |k, _| if in_low_band(k, &dims) { T::zero() } else { T::one() })
}

// Coarse node i coincides with fine node 2i + 1, which shows up as a phase
// e^{±i k h_fine} per axis between the two spectra.
fn phase<T: Real>(k: [i64; 3], fine_h: &[f64], sign: f64) -> Complex<T> {
    let theta: f64 = fine_h.iter().enumerate().map(|(a, h)| k[a] as f64 * h).sum::<f64>() * sign;
    Complex::new(T::lit(theta.cos()), T::lit(theta.sin()))
}

/// Spectral restriction to half resolution: low band kept, amplitudes preserved.
pub fn restrict<T: Real>(u: &ScalarField<T>) -> Result<ScalarField<T>> {
    let fine = *u.grid();
    let coarse = fine.coarsen()?;
    let fine_h: Vec<f64> = (0..fine.dim()).map(|a| fine.spacing::<f64>(a)).collect();
    let s = fft::forward(u);
    let ratio = T::from_usize_lossy(coarse.len()) / T::from_usize_lossy(fine.len());
    let mut out = Spectrum { grid: coarse, data: vec![Complex::default(); coarse.len()] };
    out.for_each_mode(|k, _, c| {
        if !in_low_band(k, fine.dims()) {
            return;
        }
        let mut fix = [0usize; 3];
        for a in 0..fine.dim() {
            fix[a] = k[a].rem_euclid(fine.n(a) as i64) as usize;
        }
        *c = s.data[fine.ravel(&fix)] * phase::<T>(k, &fine_h, 1.0) * ratio;
    });
    Ok(fft::inverse(out))
}

/// Spectral prolongation to double resolution (zero-padded spectrum).
pub fn prolong<T: Real>(u: &ScalarField<T>) -> Result<ScalarField<T>> {
    let coarse = *u.grid();
    let fine = coarse.refine()?;
    let fine_h: Vec<f64> = (0..fine.dim()).map(|a| fine.spacing::<f64>(a)).collect();
    let s = fft::forward(u);
    let ratio = T::from_usize_lossy(fine.len()) / T::from_usize_lossy(coarse.len());
    let mut out = Spectrum { grid: fine, data: vec![Complex::default(); fine.len()] };
    for (cidx, &c) in s.data.iter().enumerate() {
        let cix = coarse.unravel(cidx);
        let mut k = [0i64; 3];
        for a in 0..coarse.dim() {
            k[a] = wavenumber(cix[a], coarse.n(a));
        }
        if !in_low_band(k, fine.dims()) {
            continue;
        }
        let mut fix = [0usize; 3];
        for a in 0..fine.dim() {
            fix[a] = k[a].rem_euclid(fine.n(a) as i64) as usize;
        }
        out.data[fine.ravel(&fix)] = c * phase::<T>(k, &fine_h, -1.0) * ratio;
    }
    Ok(fft::inverse(out))
}

fn per_component<T: Real>(
    v: &VectorField<T>,
    f: impl Fn(&ScalarField<T>) -> Result<ScalarField<T>>,
) -> Result<VectorField<T>> {
    VectorField::from_components(v.components().iter().map(f).collect::<Result<Vec<_>>>()?)
}

pub fn restrict_vector<T: Real>(v: &VectorField<T>) -> Result<VectorField<T>> {
    per_component(v, restrict)
}

pub fn prolong_vector<T: Real>(v: &VectorField<T>) -> Result<VectorField<T>> {
    per_component(v, prolong)
}

pub fn low_pass_vector<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    per_component(v, |c| Ok(low_pass(c))).expect("same grid")
}

pub fn high_pass_vector<T: Real>(v: &VectorField<T>) -> VectorField<T> {
    per_component(v, |c| Ok(high_pass(c))).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};

    fn band_limited(g: Grid) -> ScalarField<f64> {
        // all modes < n/4 = 4 on a 16-point axis
        ScalarField::from_fn(g, |x: &[f64]| (x[0] + 2.0 * x[1]).sin() + 0.3 * (3.0 * x[0]).cos() - 0.2 * (3.0 * x[1] - x[0]).sin() + 1.0)
    }

    #[test]
    fn prolong_restrict_reproduces_band_limited() {
        let g = Grid::new(&[16, 16], 1).unwrap();
        let u = band_limited(g);
        let back = prolong(&restrict(&u).unwrap()).unwrap();
        assert!(back.sub(&u).unwrap().max_abs() <= 1e-10);
        // restriction samples the same function on the coarse mesh
        let gc = g.coarsen().unwrap();
        let direct = band_limited(gc);
        assert!(restrict(&u).unwrap().sub(&direct).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn nyquist_band_is_filtered() {
        let g = Grid::new(&[16, 16], 1).unwrap();
        // k = 4 = n/4 is the coarse Nyquist and belongs to the high band
        let u = ScalarField::<f64>::from_fn(g, |x| (4.0 * x[0]).cos() + (7.0 * x[1]).sin());
        assert!(restrict(&u).unwrap().max_abs() <= 1e-12);
        assert!(low_pass(&u).max_abs() <= 1e-12);
    }

    #[test]
    fn restrict_matches_lowpass_then_subsample() {
        let g = Grid::new(&[16, 16], 1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let lp = low_pass(&noise);
        let gc = g.coarsen().unwrap();
        let mut sub = vec![0.0; gc.len()];
        for (ci, s) in sub.iter_mut().enumerate() {
            let cix = gc.unravel(ci);
            let fix = [2 * cix[0] + 1, 2 * cix[1] + 1, 0];
            *s = lp.values()[g.ravel(&fix)];
        }
        let oracle = ScalarField::new(gc, sub).unwrap();
        assert!(restrict(&noise).unwrap().sub(&oracle).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn filters_are_complementary() {
        let g = Grid::new(&[16, 8], 1).unwrap();
        let u = ScalarField::<f64>::from_fn(g, |x| (x[0] * 3.0).sin().exp() + x[1].cos().powi(3));
        let mut sum = low_pass(&u);
        sum.axpy(1.0, &high_pass(&u));
        assert!(sum.sub(&u).unwrap().max_abs() <= 1e-13);
        let low = ScalarField::<f64>::from_fn(g, |x| x[0].sin() + x[1].cos());
        assert!(high_pass(&low).max_abs() <= 1e-13);
    }

    #[test]
    fn low_band_mask_enumeration() {
        let dims = [16usize, 16];
        let mut count = 0;
        for i in 0..16 {
            for j in 0..16 {
                let k = [wavenumber(i, 16), wavenumber(j, 16), 0];
                let expect = k[0].abs() <= 3 && k[1].abs() <= 3;
                assert_eq!(in_low_band(k, &dims), expect);
                count += expect as usize;
            }
        }
        assert_eq!(count, 49);
        assert!(!in_low_band([4, 0, 0], &dims));
    }

    #[test]
    fn odd_dims_rejected() {
        let g = Grid::new(&[10, 16], 1).unwrap();
        assert!(restrict(&ScalarField::<f64>::zeros(g)).is_err());
    }
}
