//! Value-semantic voxel containers and the quadrature primitives built on them.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

/// Real array of `∏ n_a` values in C order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid,
    data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Contract(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, data })
    }

    /// Skips the finiteness scan; used by kernels whose output is finite by construction.
    pub(crate) fn from_vec_unchecked(grid: Grid, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: Grid, c: T) -> Self {
        Self { grid, data: vec![c; grid.len()] }
    }

    /// Samples `f` at every mesh point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[T]) -> T) -> Self {
        let d = grid.dim();
        let data = (0..grid.len())
            .map(|i| {
                let x = grid.point::<T>(i);
                f(&x[..d])
            })
            .collect();
        Self { grid, data }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<T> {
        self.data
    }

    /// Same data, relabelled with a grid that differs only in `n_t`.
    pub fn with_grid(mut self, grid: Grid) -> Result<Self> {
        self.grid.check_same(&grid)?;
        self.grid = grid;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x = *x + a * y;
        }
    }

    pub fn scale(&mut self, a: T) {
        self.data.iter_mut().for_each(|x| *x = *x * a);
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `sqrt(⟨u, u⟩)` with cell-volume weights.
    pub fn norm_l2(&self) -> T {
        (dot(&self.data, &self.data) * self.grid.cell_volume::<T>()).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::from_usize_lossy(self.data.len())
    }
}

/// Discrete `L²(Ω)` inner product: `Σ a_l b_l · ∏ h_a`, summed sequentially.
pub fn l2_inner<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<T> {
    a.grid.check_same(&b.grid)?;
    Ok(dot(&a.data, &b.data) * a.grid.cell_volume::<T>())
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `d` scalar components on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    grid: Grid,
    comps: Vec<ScalarField<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn from_components(comps: Vec<ScalarField<T>>) -> Result<Self> {
        let grid = *comps.first().ok_or_else(|| Error::Contract("no components".into()))?.grid();
        if comps.len() != grid.dim() {
            return Err(Error::Contract(format!(
                "{} components on a {}-D grid",
                comps.len(),
                grid.dim()
            )));
        }
        for c in &comps {
            grid.check_same(c.grid())?;
        }
        let comps = comps.into_iter().map(|c| c.with_grid(grid)).collect::<Result<_>>()?;
        Ok(Self { grid, comps })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, comps: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect() }
    }

    pub fn constant(grid: Grid, c: &[T]) -> Self {
        Self { grid, comps: (0..grid.dim()).map(|a| ScalarField::constant(grid, c[a])).collect() }
    }

    /// Samples `f(x)` (returning at least `d` entries) at every mesh point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[T]) -> [T; 3]) -> Self {
        let d = grid.dim();
        let mut comps: Vec<Vec<T>> = vec![Vec::with_capacity(grid.len()); d];
        for i in 0..grid.len() {
            let x = grid.point::<T>(i);
            let v = f(&x[..d]);
            for a in 0..d {
                comps[a].push(v[a]);
            }
        }
        Self {
            grid,
            comps: comps.into_iter().map(|c| ScalarField::from_vec_unchecked(grid, c)).collect(),
        }
    }

    /// Same data, relabelled with a grid that differs only in `n_t`.
    pub fn with_grid(self, grid: Grid) -> Result<Self> {
        let comps = self.comps.into_iter().map(|c| c.with_grid(grid)).collect::<Result<_>>()?;
        Ok(Self { grid, comps })
    }

    /// Mesh point coordinates `x` as a vector field.
    pub fn coordinates(grid: Grid) -> Self {
        Self::from_fn(grid, |x| {
            let mut out = [T::zero(); 3];
            out[..x.len()].copy_from_slice(x);
            out
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn component(&self, a: usize) -> &ScalarField<T> {
        &self.comps[a]
    }

    #[inline]
    pub fn component_mut(&mut self, a: usize) -> &mut ScalarField<T> {
        &mut self.comps[a]
    }

    pub fn components(&self) -> &[ScalarField<T>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<ScalarField<T>> {
        self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    pub fn axpy(&mut self, a: T, other: &Self) {
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            x.axpy(a, y);
        }
    }

    pub fn scale(&mut self, a: T) {
        self.comps.iter_mut().for_each(|c| c.scale(a));
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mut out = self.clone();
        out.axpy(T::one(), other);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        Ok(out)
    }

    /// Sum of component-wise `l2_inner`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        let raw = self.comps.iter().zip(&other.comps).fold(T::zero(), |acc, (a, b)| acc + dot(a.values(), b.values()));
        Ok(raw * self.grid.cell_volume::<T>())
    }

    /// `L²` norm, `sqrt(⟨v, v⟩)`.
    pub fn norm_l2(&self) -> T {
        self.inner(self).map(T::sqrt).unwrap_or_else(|_| T::nan())
    }

    /// Max over voxels and components of `|v_a|`.
    pub fn norm_inf(&self) -> T {
        self.comps.iter().fold(T::zero(), |m, c| m.max(c.max_abs()))
    }

    /// Pointwise dot product with another vector field.
    pub fn pointwise_dot(&self, other: &Self) -> Result<ScalarField<T>> {
        self.grid.check_same(&other.grid)?;
        let mut out = vec![T::zero(); self.grid.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, &x), &y) in out.iter_mut().zip(a.values()).zip(b.values()) {
                *o = *o + x * y;
            }
        }
        Ok(ScalarField::from_vec_unchecked(self.grid, out))
    }

    /// `s · self` with a scalar field `s`.
    pub fn scaled_by_field(&self, s: &ScalarField<T>) -> Result<Self> {
        self.grid.check_same(s.grid())?;
        let comps = self
            .comps
            .iter()
            .map(|c| c.zip_map(s, |a, b| a * b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: self.grid, comps })
    }
}

/// `d × d` scalar entries on a shared grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<T> {
    grid: Grid,
    entries: Vec<ScalarField<T>>,
}

impl<T: Real> TensorField<T> {
    pub fn identity(grid: Grid) -> Self {
        let d = grid.dim();
        let entries = (0..d * d)
            .map(|k| ScalarField::constant(grid, if k / d == k % d { T::one() } else { T::zero() }))
            .collect();
        Self { grid, entries }
    }

    pub fn from_entries(grid: Grid, entries: Vec<ScalarField<T>>) -> Result<Self> {
        let d = grid.dim();
        if entries.len() != d * d {
            return Err(Error::Contract(format!("{} entries for a {d}x{d} tensor", entries.len())));
        }
        for e in &entries {
            grid.check_same(e.grid())?;
        }
        Ok(Self { grid, entries })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> &ScalarField<T> {
        &self.entries[i * self.grid.dim() + j]
    }

    pub fn entries(&self) -> &[ScalarField<T>] {
        &self.entries
    }

    /// Voxel-wise determinant.
    pub fn determinant(&self) -> ScalarField<T> {
        let n = self.grid.len();
        let e = |i: usize, j: usize, l: usize| self.entry(i, j).values()[l];
        let data = (0..n)
            .map(|l| match self.grid.dim() {
                2 => e(0, 0, l) * e(1, 1, l) - e(0, 1, l) * e(1, 0, l),
                _ => {
                    e(0, 0, l) * (e(1, 1, l) * e(2, 2, l) - e(1, 2, l) * e(2, 1, l))
                        - e(0, 1, l) * (e(1, 0, l) * e(2, 2, l) - e(1, 2, l) * e(2, 0, l))
                        + e(0, 2, l) * (e(1, 0, l) * e(2, 1, l) - e(1, 1, l) * e(2, 0, l))
                }
            })
            .collect();
        ScalarField::from_vec_unchecked(self.grid, data)
    }
}

/// A scalar field at the `n_t + 1` time points `t_j = j h_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesField<T> {
    grid: Grid,
    slices: Vec<ScalarField<T>>,
}

impl<T: Real> TimeSeriesField<T> {
    pub fn new(grid: Grid, slices: Vec<ScalarField<T>>) -> Result<Self> {
        if slices.len() != grid.nt() + 1 {
            return Err(Error::Contract(format!(
                "{} slices for n_t = {}",
                slices.len(),
                grid.nt()
            )));
        }
        for s in &slices {
            grid.check_same(s.grid())?;
        }
        Ok(Self { grid, slices })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn slice(&self, j: usize) -> &ScalarField<T> {
        &self.slices[j]
    }

    pub fn slices(&self) -> &[ScalarField<T>] {
        &self.slices
    }

    #[inline]
    pub fn first(&self) -> &ScalarField<T> {
        &self.slices[0]
    }

    #[inline]
    pub fn last(&self) -> &ScalarField<T> {
        &self.slices[self.slices.len() - 1]
    }
}

fn trapezoid_weights<T: Real>(count: usize) -> Result<Vec<T>> {
    if count < 2 {
        return Err(Error::Contract(format!("time integral needs >= 2 slices, got {count}")));
    }
    let ht = T::one() / T::from_usize_lossy(count - 1);
    let half = ht / T::lit(2.0);
    Ok((0..count).map(|j| if j == 0 || j == count - 1 { half } else { ht }).collect())
}

/// Trapezoidal rule over `[0, 1]` with weights `(h_t/2, h_t, …, h_t, h_t/2)`.
pub fn time_integral<T: Real>(slices: &[ScalarField<T>]) -> Result<ScalarField<T>> {
    let w = trapezoid_weights::<T>(slices.len())?;
    let grid = *slices[0].grid();
    let mut out = ScalarField::zeros(grid);
    for (s, &wj) in slices.iter().zip(&w) {
        grid.check_same(s.grid())?;
        out.axpy(wj, s);
    }
    Ok(out)
}

/// Trapezoidal rule applied to a sequence of vector fields.
pub fn time_integral_vector<T: Real>(slices: &[VectorField<T>]) -> Result<VectorField<T>> {
    let w = trapezoid_weights::<T>(slices.len())?;
    let grid = *slices[0].grid();
    let mut out = VectorField::zeros(grid);
    for (s, &wj) in slices.iter().zip(&w) {
        grid.check_same(s.grid())?;
        out.axpy(wj, s);
    }
    Ok(out)
}
