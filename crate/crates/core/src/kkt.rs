//! Reduced-space KKT quantities: objective, gradient, Gauss–Newton Hessian
//! matvec and the Newton-system preconditioners.

use std::cell::{Cell, OnceCell};

use serde::{Deserialize, Serialize};

use crate::diffops::{
    apply_inv_reg_operator, apply_inv_sqrt_reg_operator, apply_projection_metric, apply_reg_operator,
    divergence_energy, gradient, high_pass_vector, project_body_force, prolong_vector, restrict, restrict_vector,
    IncompressibilityMode, RegOperatorSpec,
};
use crate::distance::{adjoint_final, dist_value, incremental_final_gn, DistanceKind};
use crate::error::{Error, Result};
use crate::field::{time_integral_vector, ScalarField, TimeSeriesField, VectorField};
use crate::optimizer::{pcg, PcgStatus};
use crate::scalar::Real;
use crate::transport::{
    gradient_series, solve_adjoint, solve_inc_adjoint_gn, solve_inc_state, solve_state, Trajectory, TransportConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegConfig {
    pub alpha: f64,
    pub operator: RegOperatorSpec,
    pub incomp: IncompressibilityMode,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self { alpha: 1e-2, operator: RegOperatorSpec::default(), incomp: IncompressibilityMode::None }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Contract(format!("alpha must be > 0, got {}", self.alpha)));
        }
        self.incomp.validate()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// `P b`; identity when no incompressibility is imposed.
    pub fn project<T: Real>(&self, b: &VectorField<T>) -> VectorField<T> {
        match self.incomp {
            IncompressibilityMode::None => b.clone(),
            mode => project_body_force(b, &mode, self.alpha).expect("validated mode"),
        }
    }

    /// Inner product in which the projected gradient and Hessian are self-adjoint.
    pub fn inner<T: Real>(&self, a: &VectorField<T>, b: &VectorField<T>) -> T {
        let wb = apply_projection_metric(b, &self.incomp, self.alpha);
        a.inner(&wb).expect("same grid")
    }

    fn reg_term<T: Real>(&self, v: &VectorField<T>) -> VectorField<T> {
        apply_reg_operator(v, &self.operator, self.alpha)
    }
}

/// Images, distance and discretization for one registration.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    pub m0: ScalarField<T>,
    pub m1: ScalarField<T>,
    pub reg: RegConfig,
    pub distance: DistanceKind,
    pub transport: TransportConfig,
}

impl<T: Real> Problem<T> {
    pub fn new(m0: ScalarField<T>, m1: ScalarField<T>, reg: RegConfig, distance: DistanceKind) -> Result<Self> {
        m0.grid().check_same(m1.grid())?;
        if m0.grid().nt() != m1.grid().nt() {
            return Err(Error::GridMismatch);
        }
        if !m0.is_finite() || !m1.is_finite() {
            return Err(Error::NonFinite("input images"));
        }
        reg.validate()?;
        Ok(Self { m0, m1, reg, distance, transport: TransportConfig::default() })
    }

    pub fn with_transport(mut self, transport: TransportConfig) -> Self {
        self.transport = transport;
        self
    }

    pub fn with_reg(&self, reg: RegConfig) -> Self {
        Self { reg, ..self.clone() }
    }

    pub fn grid(&self) -> &crate::grid::Grid {
        self.m0.grid()
    }
}

/// Work counters shared by every state of one solve.
#[derive(Debug, Default)]
pub struct Counters {
    matvecs: Cell<usize>,
    pde_solves: Cell<usize>,
    precond_fallbacks: Cell<usize>,
}

impl Counters {
    pub fn matvecs(&self) -> usize {
        self.matvecs.get()
    }

    pub fn pde_solves(&self) -> usize {
        self.pde_solves.get()
    }

    pub fn precond_fallbacks(&self) -> usize {
        self.precond_fallbacks.get()
    }

    fn add_pde(&self, n: usize) {
        self.pde_solves.set(self.pde_solves.get() + n);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub distance: f64,
    /// `α/2 ⟨Lv, v⟩`
    pub regularization: f64,
    /// Near-incompressible divergence energy (zero otherwise).
    pub divergence: f64,
}

impl ObjectiveBreakdown {
    /// Reported objective `dist + α/2⟨Lv, v⟩`.
    pub fn objective(&self) -> f64 {
        self.distance + self.regularization
    }

    /// Function whose `P`-preconditioned gradient is the projected reduced
    /// gradient; drives the line search.
    pub fn merit(&self) -> f64 {
        self.objective() + self.divergence
    }
}

fn breakdown<T: Real>(problem: &Problem<T>, v: &VectorField<T>, m_final: &ScalarField<T>) -> Result<ObjectiveBreakdown> {
    let reg = &problem.reg;
    let distance = dist_value(m_final, &problem.m1, problem.distance)?.to_f64_lossy();
    let regularization = reg.reg_term(v).inner(v)?.to_f64_lossy() / 2.0;
    let divergence = divergence_energy(v, &reg.incomp, reg.alpha, &reg.operator).to_f64_lossy();
    Ok(ObjectiveBreakdown { distance, regularization, divergence })
}

/// Objective at `v`; costs one state solve.
pub fn evaluate_objective<T: Real>(problem: &Problem<T>, v: &VectorField<T>, counters: &Counters) -> Result<ObjectiveBreakdown> {
    let traj = Trajectory::new(v, problem.transport)?;
    let m = solve_state(&traj, &problem.m0)?;
    counters.add_pde(1);
    breakdown(problem, v, m.last())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondVariant {
    /// `(αL)^{-1}`
    Regularization,
    /// Inner solve with the zero-velocity Hessian built from the current `m(1)`.
    #[default]
    H0,
    /// Coarse-grid solve of the smoothed low band of `H₀`, identity on the high band.
    H0TwoLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecondKind {
    pub variant: PrecondVariant,
    /// Inner tolerance relative to the outer PCG tolerance.
    pub inner_tol_factor: f64,
    pub inner_max_iter: usize,
}

impl Default for PrecondKind {
    fn default() -> Self {
        Self::new(PrecondVariant::default())
    }
}

impl PrecondKind {
    pub fn new(variant: PrecondVariant) -> Self {
        Self { variant, inner_tol_factor: 0.1, inner_max_iter: 50 }
    }
}

struct CoarseData<T> {
    grad_m: VectorField<T>,
}

/// State, adjoint and gradient slices consistent with one velocity.
pub struct KktState<'p, T: Real> {
    problem: &'p Problem<T>,
    counters: &'p Counters,
    v: VectorField<T>,
    traj: Trajectory<T>,
    m: TimeSeriesField<T>,
    grad_m: Vec<VectorField<T>>,
    lambda: Option<TimeSeriesField<T>>,
    coarse: OnceCell<CoarseData<T>>,
}

impl<'p, T: Real> KktState<'p, T> {
    /// Solves the state equation (one PDE solve).
    pub fn new(problem: &'p Problem<T>, counters: &'p Counters, v: VectorField<T>) -> Result<Self> {
        problem.grid().check_same(v.grid())?;
        let v = v.with_grid(*problem.grid())?;
        let traj = Trajectory::new(&v, problem.transport)?;
        let m = solve_state(&traj, &problem.m0)?;
        counters.add_pde(1);
        let grad_m = gradient_series(&m, problem.transport.scheme)?;
        Ok(Self { problem, counters, v, traj, m, grad_m, lambda: None, coarse: OnceCell::new() })
    }

    /// State plus adjoint (two PDE solves); ready for gradient evaluation.
    pub fn with_adjoint(problem: &'p Problem<T>, counters: &'p Counters, v: VectorField<T>) -> Result<Self> {
        let mut s = Self::new(problem, counters, v)?;
        s.solve_adjoint()?;
        Ok(s)
    }

    pub fn solve_adjoint(&mut self) -> Result<()> {
        let fin = adjoint_final(self.m.last(), &self.problem.m1, self.problem.distance)?;
        self.lambda = Some(solve_adjoint(&self.traj, &fin)?);
        self.counters.add_pde(1);
        Ok(())
    }

    pub fn problem(&self) -> &'p Problem<T> {
        self.problem
    }

    pub fn counters(&self) -> &'p Counters {
        self.counters
    }

    pub fn velocity(&self) -> &VectorField<T> {
        &self.v
    }

    pub fn trajectory(&self) -> &Trajectory<T> {
        &self.traj
    }

    pub fn state(&self) -> &TimeSeriesField<T> {
        &self.m
    }

    pub fn adjoint(&self) -> Option<&TimeSeriesField<T>> {
        self.lambda.as_ref()
    }

    pub fn objective(&self) -> Result<ObjectiveBreakdown> {
        breakdown(self.problem, &self.v, self.m.last())
    }

    /// `g = αLv + P ∫₀¹ λ ∇m dt`.
    pub fn evaluate_gradient(&self) -> Result<VectorField<T>> {
        let lam = self.lambda.as_ref().ok_or(Error::StaleState("adjoint not solved for the current velocity"))?;
        let body = self.body_force(lam)?;
        let mut g = self.problem.reg.reg_term(&self.v);
        g.axpy(T::one(), &self.problem.reg.project(&body));
        Ok(g)
    }

    fn body_force(&self, lam: &TimeSeriesField<T>) -> Result<VectorField<T>> {
        let terms = self
            .grad_m
            .iter()
            .zip(lam.slices())
            .map(|(gm, l)| gm.scaled_by_field(l))
            .collect::<Result<Vec<_>>>()?;
        time_integral_vector(&terms)
    }

    /// Gauss–Newton matvec `αLṽ + P ∫₀¹ λ̃ ∇m dt` (two PDE solves).
    pub fn hessian_matvec_gn(&self, vt: &VectorField<T>) -> Result<VectorField<T>> {
        let p = self.problem;
        let mt = solve_inc_state(&self.traj, &self.grad_m, vt)?;
        let fin = incremental_final_gn(mt.last(), self.m.last(), &p.m1, p.distance)?;
        let lt = solve_inc_adjoint_gn(&self.traj, &fin)?;
        self.counters.add_pde(2);
        self.counters.matvecs.set(self.counters.matvecs.get() + 1);
        let mut h = p.reg.reg_term(vt);
        h.axpy(T::one(), &p.reg.project(&self.body_force(&lt)?));
        Ok(h)
    }

    /// `H₀ s = αLs + P[(∇m(1)·s) ∇m(1)]` (no PDE solves).
    pub fn h0_matvec(&self, s: &VectorField<T>) -> Result<VectorField<T>> {
        h0_apply(&self.problem.reg, self.final_gradient(), s)
    }

    fn final_gradient(&self) -> &VectorField<T> {
        &self.grad_m[self.grad_m.len() - 1]
    }

    /// Applies the preconditioner; `eta` is the outer relative PCG tolerance.
    /// The flag reports a fallback to the regularization preconditioner.
    pub fn apply_precond(&self, r: &VectorField<T>, kind: &PrecondKind, eta: f64) -> Result<(VectorField<T>, bool)> {
        let reg = &self.problem.reg;
        let inv_reg = |x: &VectorField<T>| apply_inv_reg_operator(x, &reg.operator, reg.alpha);
        let inner_tol = T::lit(kind.inner_tol_factor * eta);
        let out = match kind.variant {
            PrecondVariant::Regularization => return Ok((inv_reg(r), false)),
            PrecondVariant::H0 => {
                let res = pcg(
                    r,
                    |x| self.h0_matvec(x),
                    |x| Ok(inv_reg(x)),
                    |a, b| reg.inner(a, b),
                    inner_tol,
                    kind.inner_max_iter,
                )?;
                (res.status != PcgStatus::NegativeCurvature).then_some(res.x)
            }
            PrecondVariant::H0TwoLevel => self.two_level(r, inner_tol, kind.inner_max_iter)?,
        };
        match out {
            Some(s) if s.is_finite() => Ok((s, false)),
            _ => {
                self.counters.precond_fallbacks.set(self.counters.precond_fallbacks.get() + 1);
                Ok((inv_reg(r), true))
            }
        }
    }

    fn coarse(&self) -> Result<&CoarseData<T>> {
        if let Some(c) = self.coarse.get() {
            return Ok(c);
        }
        let mc = restrict(self.m.last())?;
        let grad_m = gradient(&mc, self.problem.transport.scheme)?;
        let _ = self.coarse.set(CoarseData { grad_m });
        Ok(self.coarse.get().expect("just set"))
    }

    /// `H_reg^{-1/2} [Q_P M̃_L^{-1} Q_R F_L + F_H] H_reg^{-1/2} r` with
    /// `M̃_L = I + H_reg^{-1/2} P D H_reg^{-1/2}` on the half-resolution grid.
    fn two_level(&self, r: &VectorField<T>, tol: T, max_iter: usize) -> Result<Option<VectorField<T>>> {
        let reg = &self.problem.reg;
        let coarse = self.coarse()?;
        // grid-agnostic: the same calls act on the fine and the coarse grid
        let smooth = |x: &VectorField<T>| apply_inv_sqrt_reg_operator(x, &reg.operator, reg.alpha);
        let w = smooth(r);
        let wc = restrict_vector(&w)?;
        let res = pcg(
            &wc,
            |x| {
                let y = smooth(x);
                let mut out = smooth(&reg.project(&data_term(&coarse.grad_m, &y)?));
                out.axpy(T::one(), x);
                Ok(out)
            },
            |x| Ok(x.clone()),
            |a, b| reg.inner(a, b),
            tol,
            max_iter,
        )?;
        if res.status == PcgStatus::NegativeCurvature {
            return Ok(None);
        }
        let mut s = prolong_vector(&res.x)?;
        s.axpy(T::one(), &high_pass_vector(&w));
        Ok(Some(smooth(&s)))
    }
}

/// `(∇m·s) ∇m`
fn data_term<T: Real>(grad_m: &VectorField<T>, s: &VectorField<T>) -> Result<VectorField<T>> {
    grad_m.scaled_by_field(&grad_m.pointwise_dot(s)?)
}

fn h0_apply<T: Real>(reg: &RegConfig, grad_m: &VectorField<T>, s: &VectorField<T>) -> Result<VectorField<T>> {
    let mut out = reg.reg_term(s);
    out.axpy(T::one(), &reg.project(&data_term(grad_m, s)?));
    Ok(out)
}
