//! Inexact Gauss–Newton–Krylov solver: outer Newton loop with Armijo line
//! search, inner preconditioned CG for the Newton step.

use std::cell::Cell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distance::dist_value;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::kkt::{evaluate_objective, Counters, KktState, PrecondKind, PrecondVariant, Problem};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcgStatus {
    Converged,
    MaxIterations,
    NegativeCurvature,
}

#[derive(Clone, Debug)]
pub struct PcgOutcome<T> {
    pub x: VectorField<T>,
    pub iterations: usize,
    /// `‖r‖₂ / ‖b‖₂` of the returned iterate.
    pub relres: f64,
    pub status: PcgStatus,
}

/// Preconditioned CG for `A x = b` from `x⁰ = 0` in the inner product
/// `inner`; stops once `‖r‖₂ ≤ tol ‖b‖₂`.
///
/// Non-positive curvature returns the previous iterate (the preconditioned
/// right-hand side if it happens immediately). Running out of iterations
/// returns the iterate with the smallest residual.
pub fn pcg<T: Real>(
    b: &VectorField<T>,
    mut apply_a: impl FnMut(&VectorField<T>) -> Result<VectorField<T>>,
    mut apply_m: impl FnMut(&VectorField<T>) -> Result<VectorField<T>>,
    inner: impl Fn(&VectorField<T>, &VectorField<T>) -> T,
    tol: T,
    max_iter: usize,
) -> Result<PcgOutcome<T>> {
    let grid = *b.grid();
    let bnorm = b.norm_l2();
    let mut x = VectorField::zeros(grid);
    if bnorm == T::zero() {
        return Ok(PcgOutcome { x, iterations: 0, relres: 0.0, status: PcgStatus::Converged });
    }
    let mut r = b.clone();
    let mut z = apply_m(&r)?;
    let mut p = z.clone();
    let mut rz = inner(&r, &z);
    let mut best = (x.clone(), T::one());
    for k in 0..max_iter {
        let s = apply_a(&p)?;
        let kappa = inner(&p, &s);
        if !(kappa > T::zero()) || !(rz > T::zero()) {
            let (x, relres) = if k == 0 { (z, f64::NAN) } else { (x, r.norm_l2().to_f64_lossy() / bnorm.to_f64_lossy()) };
            return Ok(PcgOutcome { x, iterations: k, relres, status: PcgStatus::NegativeCurvature });
        }
        let step = rz / kappa;
        x.axpy(step, &p);
        r.axpy(-step, &s);
        let rel = r.norm_l2() / bnorm;
        if rel <= tol {
            return Ok(PcgOutcome { x, iterations: k + 1, relres: rel.to_f64_lossy(), status: PcgStatus::Converged });
        }
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        z = apply_m(&r)?;
        let rz_new = inner(&r, &z);
        p.scale(rz_new / rz);
        p.axpy(T::one(), &z);
        rz = rz_new;
    }
    Ok(PcgOutcome { x: best.0, iterations: max_iter, relres: best.1.to_f64_lossy(), status: PcgStatus::MaxIterations })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingMode {
    #[default]
    Superlinear,
    Quadratic,
}

/// `η = min(1/2, √‖g‖∞)` or `min(1/2, ‖g‖∞)`.
pub fn forcing_tolerance(gnorm_inf: f64, mode: ForcingMode) -> f64 {
    match mode {
        ForcingMode::Superlinear => gnorm_inf.sqrt().min(0.5),
        ForcingMode::Quadratic => gnorm_inf.min(0.5),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Relative reduction of `‖g‖∞`.
    pub eps_opt: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub forcing: ForcingMode,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub pcg_max_iter: usize,
    pub precond: PrecondKind,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            eps_opt: 5e-2,
            abs_tol: 1e-6,
            max_iter: 50,
            forcing: ForcingMode::Superlinear,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 20,
            pcg_max_iter: 500,
            precond: PrecondKind::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_opt, self.abs_tol, self.armijo_c1];
        if positive.iter().any(|t| !(*t > 0.0)) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Contract("optimizer tolerances must be positive, backtracking factor in (0, 1)".into()));
        }
        if self.pcg_max_iter == 0 {
            return Err(Error::Contract("PCG needs at least one iteration".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoOutcome {
    pub step: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Largest `γ ∈ {1, ρ, ρ², …}` with `f(γ) ≤ f0 + c₁ γ slope`.
pub fn armijo(
    f0: f64,
    slope: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
    c1: f64,
    factor: f64,
    max_backtracks: usize,
) -> Result<ArmijoOutcome> {
    if !(slope < 0.0) {
        return Err(Error::Contract(format!("not a descent direction: slope {slope}")));
    }
    let mut step = 1.0;
    for k in 0..=max_backtracks {
        let value = f(step)?;
        if value <= f0 + c1 * step * slope {
            return Ok(ArmijoOutcome { step, value, evaluations: k + 1 });
        }
        step *= factor;
    }
    Err(Error::LineSearchFailed(max_backtracks))
}

#[derive(Clone, Debug)]
pub struct NewtonStep<T> {
    pub direction: VectorField<T>,
    pub iterations: usize,
    pub relres: f64,
    pub status: PcgStatus,
    pub precond_fallback: bool,
}

/// Solves `H ṽ = −g` to relative residual `eta`.
pub fn pcg_newton_step<T: Real>(
    state: &KktState<'_, T>,
    g: &VectorField<T>,
    kind: &PrecondKind,
    eta: f64,
    max_iter: usize,
) -> Result<NewtonStep<T>> {
    let reg = state.problem().reg;
    let fallback = Cell::new(false);
    let out = pcg(
        &g.scaled(-T::one()),
        |x| state.hessian_matvec_gn(x),
        |r| {
            let (z, fb) = state.apply_precond(r, kind, eta)?;
            fallback.set(fallback.get() || fb);
            Ok(z)
        },
        |a, b| reg.inner(a, b),
        T::lit(eta),
        max_iter,
    )?;
    Ok(NewtonStep {
        direction: out.x,
        iterations: out.iterations,
        relres: out.relres,
        status: out.status,
        precond_fallback: fallback.get(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

/// Which stopping rule ended a converged run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// `‖g‖∞ ≤ abs_tol`
    Absolute,
    /// `‖g‖∞ ≤ ε_opt ‖g⁽⁰⁾‖∞`
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub objective: f64,
    pub merit: f64,
    pub mismatch: f64,
    pub gnorm_inf: f64,
    pub gnorm_l2: f64,
    /// Step length accepted to reach this iterate (0 for the initial guess).
    pub step: f64,
    pub pcg_iterations: usize,
    pub pcg_relres: f64,
    pub pcg_status: Option<PcgStatus>,
    pub forcing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub stop_rule: Option<StopRule>,
    pub iterations: usize,
    pub matvecs: usize,
    pub pde_solves: usize,
    pub line_search_evals: usize,
    pub precond_fallbacks: usize,
    pub alpha: f64,
    pub precision: String,
    /// `dist(m(1), m₁) / dist(m₀, m₁)`; 0 when the inputs already agree.
    pub mismatch: f64,
    pub mismatch_degenerate: bool,
    /// `‖g‖∞ / ‖g⁽⁰⁾‖∞`
    pub gradient: f64,
    pub gnorm_inf_initial: f64,
    pub gnorm_inf_final: f64,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub runtime: f64,
    pub trace: Vec<IterationTrace>,
}

impl SolveReport {
    /// Copy with wall-clock fields cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { runtime: 0.0, ..self.clone() }
    }
}

/// Relative mismatch with the `0/0` guard; returns `(value, degenerate)`.
pub(crate) fn mismatch_ratio(dist: f64, dist0: f64) -> (f64, bool) {
    if dist0 > 0.0 {
        (dist / dist0, false)
    } else {
        (0.0, true)
    }
}

/// Runs the Newton–Krylov loop from `v0` (zero if `None`).
pub fn register<T: Real>(
    problem: &Problem<T>,
    config: &OptimizerConfig,
    v0: Option<VectorField<T>>,
) -> Result<(VectorField<T>, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let grid = *problem.grid();
    let counters = Counters::default();
    let reg = problem.reg;
    let dist0 = dist_value(&problem.m0, &problem.m1, problem.distance)?.to_f64_lossy();

    let mut state = KktState::with_adjoint(problem, &counters, v0.unwrap_or_else(|| VectorField::zeros(grid)))?;
    let mut g = state.evaluate_gradient()?;
    let mut obj = state.objective()?;
    let g0 = g.norm_inf().to_f64_lossy();
    let obj0 = obj.objective();
    let mut trace = vec![IterationTrace {
        iteration: 0,
        objective: obj.objective(),
        merit: obj.merit(),
        mismatch: mismatch_ratio(obj.distance, dist0).0,
        gnorm_inf: g0,
        gnorm_l2: g.norm_l2().to_f64_lossy(),
        step: 0.0,
        pcg_iterations: 0,
        pcg_relres: 0.0,
        pcg_status: None,
        forcing: 0.0,
    }];
    let mut line_search_evals = 0;
    let mut iterations = 0;
    let (status, stop_rule) = loop {
        let gn = g.norm_inf().to_f64_lossy();
        if gn <= config.abs_tol {
            break (SolveStatus::Converged, Some(StopRule::Absolute));
        }
        if gn <= config.eps_opt * g0 {
            break (SolveStatus::Converged, Some(StopRule::Relative));
        }
        if iterations >= config.max_iter {
            break (SolveStatus::MaxIterations, None);
        }
        let eta = forcing_tolerance(gn, config.forcing);
        let step = pcg_newton_step(&state, &g, &config.precond, eta, config.pcg_max_iter)?;
        let mut dir = step.direction;
        let mut slope = reg.inner(&g, &dir).to_f64_lossy();
        if !(slope < 0.0) {
            // Only reachable through an inexact preconditioner; fall back to
            // the preconditioned steepest-descent direction.
            dir = state.apply_precond(&g, &PrecondKind::new(PrecondVariant::Regularization), eta)?.0;
            dir.scale(-T::one());
            slope = reg.inner(&g, &dir).to_f64_lossy();
        }
        let v = state.velocity().clone();
        let f0 = obj.merit();
        let ls = armijo(
            f0,
            slope,
            |gamma| {
                let mut trial = v.clone();
                trial.axpy(T::lit(gamma), &dir);
                line_search_evals += 1;
                Ok(evaluate_objective(problem, &trial, &counters)?.merit())
            },
            config.armijo_c1,
            config.backtrack,
            config.max_backtracks,
        );
        let ls = match ls {
            Ok(ls) => ls,
            Err(Error::LineSearchFailed(_)) => break (SolveStatus::LineSearchFailed, None),
            Err(e) => return Err(e),
        };
        let mut v_next = v;
        v_next.axpy(T::lit(ls.step), &dir);
        state = KktState::with_adjoint(problem, &counters, v_next)?;
        g = state.evaluate_gradient()?;
        let next = state.objective()?;
        assert!(next.merit() <= f0, "objective increased across an accepted step");
        obj = next;
        iterations += 1;
        trace.push(IterationTrace {
            iteration: iterations,
            objective: obj.objective(),
            merit: obj.merit(),
            mismatch: mismatch_ratio(obj.distance, dist0).0,
            gnorm_inf: g.norm_inf().to_f64_lossy(),
            gnorm_l2: g.norm_l2().to_f64_lossy(),
            step: ls.step,
            pcg_iterations: step.iterations,
            pcg_relres: step.relres,
            pcg_status: Some(step.status),
            forcing: eta,
        });
    };
    let (mismatch, mismatch_degenerate) = mismatch_ratio(obj.distance, dist0);
    let gn = g.norm_inf().to_f64_lossy();
    let report = SolveReport {
        status,
        stop_rule,
        iterations,
        matvecs: counters.matvecs(),
        pde_solves: counters.pde_solves(),
        line_search_evals,
        precond_fallbacks: counters.precond_fallbacks(),
        alpha: reg.alpha,
        precision: T::NAME.to_string(),
        mismatch,
        mismatch_degenerate,
        gradient: if g0 > 0.0 { gn / g0 } else { 0.0 },
        gnorm_inf_initial: g0,
        gnorm_inf_final: gn,
        objective_initial: obj0,
        objective_final: obj.objective(),
        runtime: start.elapsed().as_secs_f64(),
        trace,
    };
    debug_assert_eq!(report.pde_solves, 2 * (iterations + 1) + 2 * report.matvecs + line_search_evals);
    Ok((state.velocity().clone(), report))
}

#[cfg(test)]
mod tests;
