//! Choice of the regularization weight: a decade sweep plus bisection under
//! determinant bounds, and warm-started parameter continuation.

use serde::{Deserialize, Serialize};

use crate::diffops::IncompressibilityMode;
use crate::distance::dist_value;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::kkt::{evaluate_objective, Counters, Problem};
use crate::optimizer::{register, OptimizerConfig, SolveReport};
use crate::scalar::Real;
use crate::transport::{solve_deformation_tensor, Trajectory, TransportConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Admissible band `eps_det < det f(1) < 1/eps_det`.
    pub eps_det: f64,
    pub alpha0: f64,
    pub decade: f64,
    /// Number of bisection steps inside the bracketing decade.
    pub depth: usize,
    /// Penalty weight used throughout when the near-incompressible mode is on.
    pub beta: f64,
    pub alpha_floor: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { eps_det: 0.1, alpha0: 1.0, decade: 10.0, depth: 6, beta: 1e-4, alpha_floor: 1e-6 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_det > 0.0 && self.eps_det < 1.0) {
            return Err(Error::Contract(format!("eps_det must lie in (0, 1), got {}", self.eps_det)));
        }
        if !(self.alpha0 > 0.0 && self.decade > 1.0 && self.alpha_floor > 0.0 && self.alpha_floor <= self.alpha0) {
            return Err(Error::Contract("search needs alpha0 >= alpha_floor > 0 and decade > 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetBounds {
    pub ok: bool,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Checks `eps_det < det f(1) < 1/eps_det` at every voxel.
pub fn det_bounds_ok<T: Real>(v: &VectorField<T>, eps_det: f64, transport: TransportConfig) -> Result<DetBounds> {
    let det = solve_deformation_tensor(&Trajectory::new(v, transport)?)?.determinant();
    let vals = det.values();
    let min = det.min_value().to_f64_lossy();
    let max = det.max_value().to_f64_lossy();
    let mean = vals.iter().map(|d| d.to_f64_lossy()).sum::<f64>() / vals.len() as f64;
    let ok = vals.iter().all(|d| {
        let d = d.to_f64_lossy();
        d > eps_det && d < 1.0 / eps_det
    });
    Ok(DetBounds { ok, min, max, mean })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialPhase {
    Decade,
    Bisection,
}

/// One row of the search log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alpha: f64,
    pub phase: TrialPhase,
    pub passed: bool,
    pub det_min: f64,
    pub det_max: f64,
    pub det_mean: f64,
    pub mismatch: f64,
    pub iterations: usize,
    /// α of the trial whose velocity seeded this one (empty for a cold start).
    pub warm_from: Option<f64>,
    /// Objective at the initial guess, and at `v = 0`.
    pub objective_start: f64,
    pub objective_zero: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Found,
    /// Bounds already violated at the starting α.
    FailedAtStart,
    /// Bounds never violated down to the α floor.
    ReachedFloor,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome<T> {
    pub status: SearchStatus,
    /// Smallest passing α (absent when the first trial fails).
    pub alpha: Option<f64>,
    pub velocity: Option<VectorField<T>>,
    pub report: Option<SolveReport>,
    pub trials: Vec<TrialRecord>,
    /// Deviations from a monotone pass/fail pattern in α, or warm starts
    /// that had to be discarded.
    pub anomalies: Vec<String>,
}

struct Passing<T> {
    alpha: f64,
    v: VectorField<T>,
    report: SolveReport,
}

fn run_trial<T: Real>(
    base: &Problem<T>,
    opt: &OptimizerConfig,
    search: &SearchConfig,
    alpha: f64,
    phase: TrialPhase,
    warm: Option<&Passing<T>>,
    anomalies: &mut Vec<String>,
) -> Result<(TrialRecord, VectorField<T>, SolveReport)> {
    let mut reg = base.reg.with_alpha(alpha);
    if let IncompressibilityMode::NearIncompressible { .. } = reg.incomp {
        reg.incomp = IncompressibilityMode::NearIncompressible { beta: search.beta };
    }
    let problem = base.with_reg(reg);
    let scratch = Counters::default();
    let objective_zero = dist_value(&problem.m0, &problem.m1, problem.distance)?.to_f64_lossy();
    let mut warm_from = warm.map(|w| w.alpha);
    let mut v0 = warm.map(|w| w.v.clone());
    let mut objective_start = objective_zero;
    if let Some(v) = &v0 {
        objective_start = evaluate_objective(&problem, v, &scratch)?.merit();
        if objective_start > objective_zero {
            anomalies.push(format!(
                "alpha {alpha:e}: warm start from {:e} raised the initial objective ({objective_start:e} > {objective_zero:e}); cold start used",
                warm_from.unwrap_or(f64::NAN)
            ));
            v0 = None;
            warm_from = None;
            objective_start = objective_zero;
        }
    }
    let (v, report) = register(&problem, opt, v0)?;
    let det = det_bounds_ok(&v, search.eps_det, problem.transport)?;
    let rec = TrialRecord {
        alpha,
        phase,
        passed: det.ok,
        det_min: det.min,
        det_max: det.max,
        det_mean: det.mean,
        mismatch: report.mismatch,
        iterations: report.iterations,
        warm_from,
        objective_start,
        objective_zero,
    };
    Ok((rec, v, report))
}

/// Decade sweep from `alpha0` until the determinant bounds fail, then a
/// fixed-depth linear bisection of the bracketing interval. Every trial is
/// warm-started from the smallest passing α found so far.
pub fn search_alpha<T: Real>(problem: &Problem<T>, opt: &OptimizerConfig, search: &SearchConfig) -> Result<SearchOutcome<T>> {
    search.validate()?;
    if dist_value(&problem.m0, &problem.m1, problem.distance)?.to_f64_lossy() == 0.0 {
        // nothing to register: the zero velocity is optimal for every α
        let mut anomalies = Vec::new();
        let (rec, v, report) =
            run_trial(problem, opt, search, search.alpha0, TrialPhase::Decade, None, &mut anomalies)?;
        return Ok(SearchOutcome {
            status: SearchStatus::Found,
            alpha: Some(search.alpha0),
            velocity: Some(v),
            report: Some(report),
            trials: vec![rec],
            anomalies,
        });
    }
    let mut trials = Vec::new();
    let mut anomalies = Vec::new();
    let mut pass: Option<Passing<T>> = None;
    let mut fail: Option<f64> = None;
    let mut k = 0i32;
    loop {
        let alpha = search.alpha0 / search.decade.powi(k);
        if alpha < search.alpha_floor * (1.0 - 1e-12) {
            break;
        }
        let (rec, v, report) = run_trial(problem, opt, search, alpha, TrialPhase::Decade, pass.as_ref(), &mut anomalies)?;
        let ok = rec.passed;
        trials.push(rec);
        if ok {
            pass = Some(Passing { alpha, v, report });
        } else {
            fail = Some(alpha);
            break;
        }
        k += 1;
    }
    let Some(mut best) = pass else {
        return Ok(SearchOutcome {
            status: SearchStatus::FailedAtStart,
            alpha: None,
            velocity: None,
            report: None,
            trials,
            anomalies,
        });
    };
    let status = match fail {
        None => SearchStatus::ReachedFloor,
        Some(mut lo) => {
            for _ in 0..search.depth {
                let mid = 0.5 * (lo + best.alpha);
                let (rec, v, report) =
                    run_trial(problem, opt, search, mid, TrialPhase::Bisection, Some(&best), &mut anomalies)?;
                let ok = rec.passed;
                trials.push(rec);
                if ok {
                    best = Passing { alpha: mid, v, report };
                } else {
                    lo = mid;
                }
            }
            SearchStatus::Found
        }
    };
    anomalies.extend(monotonicity_anomalies(&trials));
    Ok(SearchOutcome {
        status,
        alpha: Some(best.alpha),
        velocity: Some(best.v),
        report: Some(best.report),
        trials,
        anomalies,
    })
}

/// Pass/fail labels sorted by α must switch at most once (fail below, pass above).
pub fn monotonicity_anomalies(trials: &[TrialRecord]) -> Vec<String> {
    let mut sorted: Vec<_> = trials.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    sorted
        .windows(2)
        .filter(|w| w[0].passed && !w[1].passed)
        .map(|w| format!("alpha {:e} passes but larger alpha {:e} fails", w[0].alpha, w[1].alpha))
        .collect()
}

/// `1, 0.1, …, 10^{⌊log₁₀ α⌋}`, then `α` itself when it is not a power of ten.
pub fn continuation_schedule(alpha_target: f64) -> Result<Vec<f64>> {
    if !(alpha_target > 0.0 && alpha_target <= 1.0) {
        return Err(Error::Contract(format!("continuation target must lie in (0, 1], got {alpha_target}")));
    }
    let last = alpha_target.log10().floor() as i32;
    let mut out: Vec<f64> = (0..=-last).map(|k| 10f64.powi(-k)).collect();
    let tail = *out.last().expect("non-empty");
    if ((tail - alpha_target) / alpha_target).abs() > 1e-12 {
        out.push(alpha_target);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub alpha: f64,
    pub iterations: usize,
    pub matvecs: usize,
    pub mismatch: f64,
}

/// Warm-started cascade of solves ending at `alpha_target`. The returned report
/// is the final stage's report with work counters and runtime summed over all
/// stages and the traces concatenated.
pub fn continuation_solve<T: Real>(
    problem: &Problem<T>,
    opt: &OptimizerConfig,
    alpha_target: f64,
) -> Result<(VectorField<T>, SolveReport, Vec<StageSummary>)> {
    let mut v: Option<VectorField<T>> = None;
    let mut total: Option<SolveReport> = None;
    let mut stages = Vec::new();
    for alpha in continuation_schedule(alpha_target)? {
        let p = problem.with_reg(problem.reg.with_alpha(alpha));
        let (vs, rep) = register(&p, opt, v.take())?;
        stages.push(StageSummary { alpha, iterations: rep.iterations, matvecs: rep.matvecs, mismatch: rep.mismatch });
        total = Some(match total {
            None => rep,
            Some(acc) => {
                let mut trace = acc.trace;
                trace.extend(rep.trace.iter().cloned());
                SolveReport {
                    iterations: acc.iterations + rep.iterations,
                    matvecs: acc.matvecs + rep.matvecs,
                    pde_solves: acc.pde_solves + rep.pde_solves,
                    line_search_evals: acc.line_search_evals + rep.line_search_evals,
                    precond_fallbacks: acc.precond_fallbacks + rep.precond_fallbacks,
                    runtime: acc.runtime + rep.runtime,
                    trace,
                    ..rep
                }
            }
        });
        v = Some(vs);
    }
    Ok((v.expect("at least one stage"), total.expect("at least one stage"), stages))
}
