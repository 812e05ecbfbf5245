use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::VectorField;
use crate::scalar::Real;

/// Sobolev regularization operator `L`, diagonal in Fourier space.
///
/// Seminorm symbol is `|k|^(2p)`; the full norm adds the identity, `1 + |k|^(2p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegOperatorSpec {
    pub order: u8,
    pub seminorm: bool,
}

impl Default for RegOperatorSpec {
    fn default() -> Self {
        Self { order: 1, seminorm: true }
    }
}

impl RegOperatorSpec {
    pub fn new(order: u8, seminorm: bool) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::Contract(format!("Sobolev order {order} not in 1..=3")));
        }
        Ok(Self { order, seminorm })
    }

    /// Symbol as a function of `|k|²`.
    pub fn symbol(&self, k2: f64) -> f64 {
        let s = k2.powi(self.order as i32);
        if self.seminorm {
            s
        } else {
            1.0 + s
        }
    }
}

fn k2_of(k: [i64; 3], d: usize) -> f64 {
    k[..d].iter().map(|&x| (x * x) as f64).sum()
}

fn apply_per_component<T: Real>(v: &VectorField<T>, symbol: impl Fn(f64) -> f64) -> VectorField<T> {
    let d = v.grid().dim();
    let comps = v
        .components()
        .iter()
        .map(|c| fft::apply_symbol(c, |k, _| T::lit(symbol(k2_of(k, d)))))
        .collect();
    VectorField::from_components(comps).expect("same grid")
}

/// `α L v`.
pub fn apply_reg_operator<T: Real>(v: &VectorField<T>, spec: &RegOperatorSpec, alpha: f64) -> VectorField<T> {
    apply_per_component(v, |k2| alpha * spec.symbol(k2))
}

/// `(α L)^{-1} b`; modes where the symbol vanishes are divided by `α` alone.
pub fn apply_inv_reg_operator<T: Real>(b: &VectorField<T>, spec: &RegOperatorSpec, alpha: f64) -> VectorField<T> {
    apply_per_component(b, |k2| {
        let s = spec.symbol(k2);
        1.0 / (alpha * if s == 0.0 { 1.0 } else { s })
    })
}

/// `(α L)^{-1/2} b` with the same kernel rule.
pub fn apply_inv_sqrt_reg_operator<T: Real>(
    b: &VectorField<T>,
    spec: &RegOperatorSpec,
    alpha: f64,
) -> VectorField<T> {
    apply_per_component(b, |k2| {
        let s = spec.symbol(k2);
        1.0 / (alpha * if s == 0.0 { 1.0 } else { s }).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::grid::Grid;
    use proptest::prelude::*;

    fn mode_field(g: Grid, kx: f64, ky: f64) -> VectorField<f64> {
        VectorField::from_fn(g, |x: &[f64]| {
            let p = (kx * x[0] + ky * x[1]).cos();
            [p, 0.5 * p, 0.0]
        })
    }

    #[test]
    fn h1_on_unit_mode() {
        let g = Grid::new(&[16, 16], 1).unwrap();
        let v = mode_field(g, 1.0, 0.0);
        let lv = apply_reg_operator(&v, &RegOperatorSpec::default(), 1.0);
        assert!(lv.sub(&v).unwrap().norm_inf() < 1e-12);
    }

    #[test]
    fn constant_in_kernel() {
        let g = Grid::new(&[16, 16], 1).unwrap();
        let v = VectorField::<f64>::constant(g, &[1.5, -2.0]);
        assert!(apply_reg_operator(&v, &RegOperatorSpec::default(), 0.3).norm_inf() < 1e-13);
        // kernel rule: divided by α only
        let inv = apply_inv_reg_operator(&v, &RegOperatorSpec::default(), 0.5);
        assert!(inv.sub(&v.scaled(2.0)).unwrap().norm_inf() < 1e-12);
    }

    #[test]
    fn biharmonic_symbol() {
        let g = Grid::new(&[16, 16], 1).unwrap();
        let v = mode_field(g, 2.0, 1.0);
        let spec = RegOperatorSpec::new(2, true).unwrap();
        let lv = apply_reg_operator(&v, &spec, 1.0);
        assert!(lv.sub(&v.scaled(25.0)).unwrap().norm_inf() < 1e-10);
    }

    #[test]
    fn inverse_scales_single_mode() {
        let g = Grid::new(&[16, 16], 1).unwrap();
        let v = mode_field(g, 2.0, 1.0);
        let inv = apply_inv_reg_operator(&v, &RegOperatorSpec::default(), 0.1);
        assert!(inv.sub(&v.scaled(1.0 / (0.1 * 5.0))).unwrap().norm_inf() < 1e-12);
        let half = apply_inv_sqrt_reg_operator(&apply_inv_sqrt_reg_operator(&v, &RegOperatorSpec::default(), 0.1), &RegOperatorSpec::default(), 0.1);
        assert!(half.sub(&inv).unwrap().norm_inf() < 1e-12);
    }

    #[test]
    fn order_out_of_range() {
        assert!(RegOperatorSpec::new(0, true).is_err());
        assert!(RegOperatorSpec::new(4, false).is_err());
    }

    fn field_from(g: Grid, vals: &[f64]) -> VectorField<f64> {
        let n = g.len();
        VectorField::from_components(vec![
            ScalarField::new(g, vals[..n].to_vec()).unwrap(),
            ScalarField::new(g, vals[n..2 * n].to_vec()).unwrap(),
        ])
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn self_adjoint_psd_and_invertible(
            a in proptest::collection::vec(-1.0f64..1.0, 128),
            b in proptest::collection::vec(-1.0f64..1.0, 128),
            order in 1u8..=3,
            seminorm in proptest::bool::ANY,
        ) {
            let g = Grid::new(&[8, 8], 1).unwrap();
            let spec = RegOperatorSpec::new(order, seminorm).unwrap();
            let v = field_from(g, &a);
            let w = field_from(g, &b);
            let lv = apply_reg_operator(&v, &spec, 0.7);
            let lw = apply_reg_operator(&w, &spec, 0.7);
            let x = lv.inner(&w).unwrap();
            let y = v.inner(&lw).unwrap();
            prop_assert!((x - y).abs() <= 1e-9 * (lv.norm_l2() * w.norm_l2()).max(1e-12));
            prop_assert!(lv.inner(&v).unwrap() >= -1e-9);

            // inverse pair off the kernel: remove the mean first
            let mut z = v.clone();
            for c in 0..2 {
                let m = z.component(c).mean();
                z.component_mut(c).values_mut().iter_mut().for_each(|x| *x -= m);
            }
            let back = apply_inv_reg_operator(&apply_reg_operator(&z, &spec, 0.7), &spec, 0.7);
            prop_assert!(back.sub(&z).unwrap().norm_inf() <= 1e-9);
        }
    }
}
