//! Semi-Lagrangian transport: interpolation kernels, RK2 characteristics and
//! the forward/backward solvers used by the reduced-space optimizer.
//!
//! Every solver marches along characteristics of a stationary velocity, so
//! the departure points (and their interpolation stencils) are computed once
//! per velocity and shared by all solves through a [`Trajectory`].

mod interp;

pub use interp::{interpolate, InterpMethod, InterpPlan};

use serde::{Deserialize, Serialize};

use crate::diffops::{divergence, gradient, DiffScheme};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, TimeSeriesField, VectorField};
use crate::grid::Grid;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub interp: InterpMethod,
    pub scheme: DiffScheme,
}

/// RK2 foot of the characteristic through every mesh point:
/// `ỹ = x − h_t v(x)`, `y = x − h_t/2 (v(x) + v(ỹ))`. Not wrapped.
pub fn departure_points<T: Real>(v: &VectorField<T>, ht: T, method: InterpMethod) -> Result<VectorField<T>> {
    if !v.is_finite() {
        return Err(Error::NonFinite("velocity"));
    }
    let grid = *v.grid();
    let x = VectorField::coordinates(grid);
    let mut pred = x.clone();
    pred.axpy(-ht, v);
    let v_pred = InterpPlan::new(grid, &pred, method)?.apply_vector(v)?;
    let mut y = x;
    y.axpy(-ht / T::lit(2.0), v);
    y.axpy(-ht / T::lit(2.0), &v_pred);
    Ok(y)
}

/// Departure points and interpolation plans for one stationary velocity.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    config: TransportConfig,
    velocity: VectorField<T>,
    div_v: ScalarField<T>,
    forward: VectorField<T>,
    backward: VectorField<T>,
    fwd_plan: InterpPlan<T>,
    bwd_plan: InterpPlan<T>,
}

impl<T: Real> Trajectory<T> {
    /// Uses the time step `1 / n_t` of the velocity's grid.
    pub fn new(v: &VectorField<T>, config: TransportConfig) -> Result<Self> {
        let grid = *v.grid();
        let ht = grid.time_step::<T>();
        let forward = departure_points(v, ht, config.interp)?;
        // backward-in-time solves follow the characteristics of -v
        let backward = departure_points(&v.scaled(-T::one()), ht, config.interp)?;
        let fwd_plan = InterpPlan::new(grid, &forward, config.interp)?;
        let bwd_plan = InterpPlan::new(grid, &backward, config.interp)?;
        Ok(Self {
            config,
            velocity: v.clone(),
            div_v: divergence(v, config.scheme)?,
            forward,
            backward,
            fwd_plan,
            bwd_plan,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.velocity.grid()
    }

    #[inline]
    pub fn nt(&self) -> usize {
        self.grid().nt()
    }

    #[inline]
    pub fn config(&self) -> TransportConfig {
        self.config
    }

    #[inline]
    pub fn velocity(&self) -> &VectorField<T> {
        &self.velocity
    }

    /// Departure points of step `j` (identical for every step since `v` is stationary).
    pub fn step_points(&self, j: usize) -> &VectorField<T> {
        debug_assert!(j < self.nt());
        &self.forward
    }

    pub fn backward_points(&self) -> &VectorField<T> {
        &self.backward
    }

    pub fn forward_plan(&self) -> &InterpPlan<T> {
        &self.fwd_plan
    }

    fn ht(&self) -> T {
        self.grid().time_step::<T>()
    }
}

/// Per-slice gradients `∇m(t_j)` on the regular mesh.
pub fn gradient_series<T: Real>(m: &TimeSeriesField<T>, scheme: DiffScheme) -> Result<Vec<VectorField<T>>> {
    m.slices().iter().map(|s| gradient(s, scheme)).collect()
}

/// `∂_t m + v·∇m = 0`, `m(0) = m0`.
pub fn solve_state<T: Real>(traj: &Trajectory<T>, m0: &ScalarField<T>) -> Result<TimeSeriesField<T>> {
    traj.grid().check_same(m0.grid())?;
    let mut slices = Vec::with_capacity(traj.nt() + 1);
    slices.push(m0.clone());
    for j in 0..traj.nt() {
        let next = traj.fwd_plan.apply(&slices[j])?;
        slices.push(next);
    }
    TimeSeriesField::new(*traj.grid(), slices)
}

/// `−∂_t λ − ∇·(λv) = 0` backward from `λ(1) = final`. In reversed time this is
/// transport along `−v` with source `λ ∇·v`.
pub fn solve_adjoint<T: Real>(traj: &Trajectory<T>, final_cond: &ScalarField<T>) -> Result<TimeSeriesField<T>> {
    march_backward(traj, final_cond, None)
}

/// Gauss–Newton incremental adjoint: the same continuity equation as the adjoint.
pub fn solve_inc_adjoint_gn<T: Real>(traj: &Trajectory<T>, final_cond: &ScalarField<T>) -> Result<TimeSeriesField<T>> {
    march_backward(traj, final_cond, None)
}

/// Backward continuity-equation solve with an optional additional source
/// sampled at every time point (reversed-time sign convention).
pub(crate) fn march_backward<T: Real>(
    traj: &Trajectory<T>,
    final_cond: &ScalarField<T>,
    extra: Option<&[ScalarField<T>]>,
) -> Result<TimeSeriesField<T>> {
    traj.grid().check_same(final_cond.grid())?;
    let nt = traj.nt();
    let ht = traj.ht();
    let half = ht / T::lit(2.0);
    let div = &traj.div_v;
    let mut slices = vec![ScalarField::zeros(*traj.grid()); nt + 1];
    slices[nt] = final_cond.clone();
    for k in (1..=nt).rev() {
        let lam = &slices[k];
        let mut src = lam.zip_map(div, |a, b| a * b)?;
        if let Some(e) = extra {
            src.axpy(T::one(), &e[k]);
        }
        let a = traj.bwd_plan.apply(lam)?;
        let b = traj.bwd_plan.apply(&src)?;
        let mut pred = a.clone();
        pred.axpy(ht, &b);
        let mut src_pred = pred.zip_map(div, |p, dv| p * dv)?;
        if let Some(e) = extra {
            src_pred.axpy(T::one(), &e[k - 1]);
        }
        let mut next = a;
        next.axpy(half, &b);
        next.axpy(half, &src_pred);
        slices[k - 1] = next;
    }
    TimeSeriesField::new(*traj.grid(), slices)
}

/// `∂_t m̃ + v·∇m̃ = −∇m·ṽ`, `m̃(0) = 0`, with `∇m(t_j)` given on the mesh.
pub fn solve_inc_state<T: Real>(
    traj: &Trajectory<T>,
    grad_m: &[VectorField<T>],
    vtilde: &VectorField<T>,
) -> Result<TimeSeriesField<T>> {
    let grid = *traj.grid();
    grid.check_same(vtilde.grid())?;
    let nt = traj.nt();
    if grad_m.len() != nt + 1 {
        return Err(Error::Contract(format!("{} gradient slices for n_t = {nt}", grad_m.len())));
    }
    let half = traj.ht() / T::lit(2.0);
    let source = |j: usize| -> Result<ScalarField<T>> {
        grid.check_same(grad_m[j].grid())?;
        Ok(grad_m[j].pointwise_dot(vtilde)?.scaled(-T::one()))
    };
    let mut slices = Vec::with_capacity(nt + 1);
    slices.push(ScalarField::zeros(grid));
    let mut f_prev = source(0)?;
    for j in 0..nt {
        // m̃(y) + h/2 f_j(y) in one interpolation
        let mut carried = slices[j].clone();
        carried.axpy(half, &f_prev);
        let mut next = traj.fwd_plan.apply(&carried)?;
        let f_next = source(j + 1)?;
        next.axpy(half, &f_next);
        slices.push(next);
        f_prev = f_next;
    }
    TimeSeriesField::new(grid, slices)
}

/// Deformation tensor `F(1)` from `∂_t F + (v·∇)F = (∇v) F`, `F(0) = I`.
pub fn solve_deformation_tensor<T: Real>(traj: &Trajectory<T>) -> Result<TensorField<T>> {
    let grid = *traj.grid();
    let d = grid.dim();
    let ht = traj.ht();
    let half = ht / T::lit(2.0);
    // jac[i*d + l] = ∂_l v_i
    let mut jac = Vec::with_capacity(d * d);
    for i in 0..d {
        jac.extend(gradient(traj.velocity.component(i), traj.config.scheme)?.into_components());
    }
    let source = |f: &[ScalarField<T>]| -> Result<Vec<ScalarField<T>>> {
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut s = ScalarField::zeros(grid);
                for l in 0..d {
                    s.axpy(T::one(), &jac[i * d + l].zip_map(&f[l * d + j], |a, b| a * b)?);
                }
                out.push(s);
            }
        }
        Ok(out)
    };
    let mut f = TensorField::identity(grid).entries().to_vec();
    for _ in 0..traj.nt() {
        let a = f.iter().map(|e| traj.fwd_plan.apply(e)).collect::<Result<Vec<_>>>()?;
        let b = source(&f)?.iter().map(|e| traj.fwd_plan.apply(e)).collect::<Result<Vec<_>>>()?;
        let pred: Vec<_> = a
            .iter()
            .zip(&b)
            .map(|(ai, bi)| {
                let mut p = ai.clone();
                p.axpy(ht, bi);
                p
            })
            .collect();
        let sp = source(&pred)?;
        f = a
            .into_iter()
            .zip(b.iter().zip(&sp))
            .map(|(mut ai, (bi, si))| {
                ai.axpy(half, bi);
                ai.axpy(half, si);
                ai
            })
            .collect();
    }
    TensorField::from_entries(grid, f)
}

/// Full-interval departure map `X(x)` with `m(1, x) = m0(X(x))`, composed from
/// the per-step maps by interpolating the running (periodic) displacement.
pub fn compose_trajectory<T: Real>(traj: &Trajectory<T>) -> Result<VectorField<T>> {
    let grid = *traj.grid();
    let x = VectorField::coordinates(grid);
    let step = traj.forward.sub(&x)?;
    let mut disp = VectorField::zeros(grid);
    for _ in 0..traj.nt() {
        disp = step.add(&traj.fwd_plan.apply_vector(&disp)?)?;
    }
    x.add(&disp)
}
