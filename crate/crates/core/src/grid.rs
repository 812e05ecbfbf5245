//! Periodic rectangular mesh on `[-π, π)^d` with a uniform pseudo-time mesh on `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mesh metadata. Every field is defined relative to exactly one grid.
///
/// Node `i` (zero-based) along axis `a` sits at `x = (n_a/2 - 1 - i) h_a`, i.e.
/// the one-based index `l = i + 1` maps to `(n_a/2 - l) h_a`. Coordinates
/// therefore *decrease* with the storage index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    dims: [usize; 3],
    d: usize,
    nt: usize,
}

impl Grid {
    pub fn new(dims: &[usize], nt: usize) -> Result<Self> {
        let d = dims.len();
        if d != 2 && d != 3 {
            return Err(Error::InvalidGrid(format!("dimensionality {d} not in {{2, 3}}")));
        }
        if let Some(&n) = dims.iter().find(|&&n| n < 8 || n % 2 != 0) {
            return Err(Error::InvalidGrid(format!("axis size {n} must be even and >= 8")));
        }
        if nt == 0 {
            return Err(Error::InvalidGrid("n_t must be >= 1".into()));
        }
        let mut all = [1usize; 3];
        all[..d].copy_from_slice(dims);
        Ok(Self { dims: all, d, nt })
    }

    /// Square/cubic grid helper.
    pub fn uniform(d: usize, n: usize, nt: usize) -> Result<Self> {
        Self::new(&vec![n; d], nt)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.d]
    }

    #[inline]
    pub fn n(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    /// Number of voxels.
    #[inline]
    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn with_nt(&self, nt: usize) -> Result<Self> {
        Self::new(self.dims(), nt)
    }

    /// `h_a = 2π / n_a`.
    #[inline]
    pub fn spacing<T: Real>(&self, axis: usize) -> T {
        T::TAU() / T::from_usize_lossy(self.dims[axis])
    }

    /// `h_t = 1 / n_t`.
    #[inline]
    pub fn time_step<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.nt)
    }

    /// Uniform quadrature weight `∏ h_a`.
    pub fn cell_volume<T: Real>(&self) -> T {
        (0..self.d).fold(T::one(), |acc, a| acc * self.spacing::<T>(a))
    }

    /// Row-major strides (last axis fastest). Unused axes have stride 0.
    pub fn strides(&self) -> [usize; 3] {
        match self.d {
            2 => [self.dims[1], 1, 0],
            _ => [self.dims[1] * self.dims[2], self.dims[2], 1],
        }
    }

    /// Splits a linear index into per-axis zero-based indices.
    #[inline]
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.d).rev() {
            out[a] = idx % self.dims[a];
            idx /= self.dims[a];
        }
        out
    }

    #[inline]
    pub fn ravel(&self, ix: &[usize; 3]) -> usize {
        let s = self.strides();
        (0..self.d).map(|a| ix[a] * s[a]).sum()
    }

    /// Coordinate of zero-based node `i` along `axis`.
    #[inline]
    pub fn node_coordinate<T: Real>(&self, axis: usize, i: usize) -> T {
        let n = self.dims[axis];
        (T::from_usize_lossy(n / 2) - T::one() - T::from_usize_lossy(i)) * self.spacing::<T>(axis)
    }

    /// Fractional zero-based index of coordinate `x` along `axis` (not wrapped).
    #[inline]
    pub fn fractional_index<T: Real>(&self, axis: usize, x: T) -> T {
        let n = self.dims[axis];
        T::from_usize_lossy(n / 2) - T::one() - x / self.spacing::<T>(axis)
    }

    /// Mesh point for the one-based multi-index `l` (`1 <= l_a <= n_a`).
    pub fn mesh_coordinates<T: Real>(&self, l: &[usize]) -> Result<[T; 3]> {
        if l.len() != self.d {
            return Err(Error::Contract(format!("multi-index has {} entries, grid is {}-D", l.len(), self.d)));
        }
        let mut x = [T::zero(); 3];
        for a in 0..self.d {
            if l[a] < 1 || l[a] > self.dims[a] {
                return Err(Error::Contract(format!("index {} out of range 1..={} on axis {a}", l[a], self.dims[a])));
            }
            x[a] = self.node_coordinate(a, l[a] - 1);
        }
        Ok(x)
    }

    /// Coordinates of the node with linear index `idx`.
    #[inline]
    pub fn point<T: Real>(&self, idx: usize) -> [T; 3] {
        let ix = self.unravel(idx);
        let mut x = [T::zero(); 3];
        for a in 0..self.d {
            x[a] = self.node_coordinate(a, ix[a]);
        }
        x
    }

    /// Half resolution along every axis.
    pub fn coarsen(&self) -> Result<Self> {
        if self.dims().iter().any(|n| n % 4 != 0) {
            return Err(Error::InvalidGrid(format!("dims {:?} not divisible by 4", self.dims())));
        }
        let dims: Vec<usize> = self.dims().iter().map(|n| n / 2).collect();
        Self::new(&dims, self.nt)
    }

    /// Double resolution along every axis.
    pub fn refine(&self) -> Result<Self> {
        let dims: Vec<usize> = self.dims().iter().map(|n| n * 2).collect();
        Self::new(&dims, self.nt)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}
