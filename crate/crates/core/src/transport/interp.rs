use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::scalar::Real;

/// Interpolation kernel for off-grid evaluation. All kernels wrap periodically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpMethod {
    Nearest,
    Linear,
    /// Tensor-product Lagrange polynomial on a `4^d` stencil.
    #[default]
    CubicLagrange,
}

impl InterpMethod {
    #[inline]
    pub fn stencil_width(self) -> usize {
        match self {
            Self::Nearest => 1,
            Self::Linear => 2,
            Self::CubicLagrange => 4,
        }
    }

    /// Returns the first stencil node and the weights for fractional index `s`.
    #[inline]
    fn weights<T: Real>(self, s: T) -> (i64, [T; 4]) {
        let z = T::zero();
        let one = T::one();
        match self {
            Self::Nearest => {
                let r = s.round();
                (r.to_i64().unwrap_or(0), [one, z, z, z])
            }
            Self::Linear => {
                let f = s.floor();
                let t = s - f;
                (f.to_i64().unwrap_or(0), [one - t, t, z, z])
            }
            Self::CubicLagrange => {
                let f = s.floor();
                let t = s - f;
                let two = T::lit(2.0);
                let six = T::lit(6.0);
                let (tm1, tm2, tp1) = (t - one, t - two, t + one);
                let w = [
                    -t * tm1 * tm2 / six,
                    tp1 * tm1 * tm2 / two,
                    -tp1 * t * tm2 / two,
                    tp1 * t * tm1 / six,
                ];
                (f.to_i64().unwrap_or(0) - 1, w)
            }
        }
    }
}

/// Precomputed stencils for a fixed set of query points on a source grid.
///
/// Building the plan costs about as much as one interpolation; applying it to
/// many fields (every time step, every vector component) is then a pure
/// gather-and-weight loop.
#[derive(Clone, Debug)]
pub struct InterpPlan<T> {
    source: Grid,
    target: Grid,
    method: InterpMethod,
    // per point, per axis, per tap: flat offset contribution (index * stride)
    offsets: Vec<u32>,
    weights: Vec<T>,
}

impl<T: Real> InterpPlan<T> {
    /// Plans evaluation of fields on `source` at `points` (one point per node
    /// of the points' grid). Coordinates may lie anywhere; they are wrapped.
    pub fn new(source: Grid, points: &VectorField<T>, method: InterpMethod) -> Result<Self> {
        if points.dim() != source.dim() {
            return Err(Error::Contract(format!(
                "{}-D points for a {}-D grid",
                points.dim(),
                source.dim()
            )));
        }
        if !points.is_finite() {
            return Err(Error::NonFinite("interpolation points"));
        }
        if source.len() > u32::MAX as usize {
            return Err(Error::InvalidGrid("grid too large for 32-bit stencil offsets".into()));
        }
        let d = source.dim();
        let width = method.stencil_width();
        let target = *points.grid();
        let strides = source.strides();
        let npts = target.len();
        let block = d * width;
        let mut offsets = vec![0u32; npts * block];
        let mut weights = vec![T::zero(); npts * block];
        offsets
            .par_chunks_mut(block)
            .zip(weights.par_chunks_mut(block))
            .enumerate()
            .for_each(|(p, (off, w))| {
                for a in 0..d {
                    let n = source.n(a) as i64;
                    let s = source.fractional_index(a, points.component(a).values()[p]);
                    let (first, wa) = method.weights(s);
                    for j in 0..width {
                        let i = (first + j as i64).rem_euclid(n) as usize;
                        off[a * width + j] = (i * strides[a]) as u32;
                        w[a * width + j] = wa[j];
                    }
                }
            });
        Ok(Self { source, target, method, offsets, weights })
    }

    #[inline]
    pub fn method(&self) -> InterpMethod {
        self.method
    }

    #[inline]
    pub fn target(&self) -> &Grid {
        &self.target
    }

    pub fn apply(&self, u: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.source.check_same(u.grid())?;
        let d = self.source.dim();
        let width = self.method.stencil_width();
        let block = d * width;
        let src = u.values();
        let mut out = vec![T::zero(); self.target.len()];
        out.par_iter_mut().enumerate().for_each(|(p, o)| {
            let off = &self.offsets[p * block..(p + 1) * block];
            let w = &self.weights[p * block..(p + 1) * block];
            let mut acc = T::zero();
            if d == 2 {
                for i in 0..width {
                    let mut row = T::zero();
                    let base = off[i] as usize;
                    for j in 0..width {
                        row = row + w[width + j] * src[base + off[width + j] as usize];
                    }
                    acc = acc + w[i] * row;
                }
            } else {
                for i in 0..width {
                    let mut plane = T::zero();
                    let bi = off[i] as usize;
                    for j in 0..width {
                        let bj = bi + off[width + j] as usize;
                        let mut row = T::zero();
                        for k in 0..width {
                            row = row + w[2 * width + k] * src[bj + off[2 * width + k] as usize];
                        }
                        plane = plane + w[width + j] * row;
                    }
                    acc = acc + w[i] * plane;
                }
            }
            *o = acc;
        });
        Ok(ScalarField::from_vec_unchecked(self.target, out))
    }

    pub fn apply_vector(&self, v: &VectorField<T>) -> Result<VectorField<T>> {
        VectorField::from_components(v.components().iter().map(|c| self.apply(c)).collect::<Result<Vec<_>>>()?)
    }
}

/// Evaluates the chosen interpolant of `u` at `points`.
pub fn interpolate<T: Real>(u: &ScalarField<T>, points: &VectorField<T>, method: InterpMethod) -> Result<ScalarField<T>> {
    InterpPlan::new(*u.grid(), points, method)?.apply(u)
}
