use super::*;
use crate::distance::DistanceKind;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::kkt::{PrecondVariant, RegConfig};
use crate::testutil::{pair, random_band_limited, swirl};

#[test]
fn forcing_sequence_values() {
    assert!((forcing_tolerance(0.04, ForcingMode::Superlinear) - 0.2).abs() <= 1e-15);
    assert_eq!(forcing_tolerance(1.0, ForcingMode::Superlinear), 0.5);
    assert_eq!(forcing_tolerance(1.0, ForcingMode::Quadratic), 0.5);
    assert_eq!(forcing_tolerance(1e-6, ForcingMode::Quadratic), 1e-6);
}

#[test]
fn armijo_on_a_quadratic_model() {
    // J(v) = ½‖v‖² at v = (3, -4): g = v
    let v = [3.0f64, -4.0];
    let j = |w: [f64; 2]| 0.5 * (w[0] * w[0] + w[1] * w[1]);
    let f0 = j(v);
    for scale in [1.0, 100.0] {
        let d = [-scale * v[0], -scale * v[1]];
        let slope = v[0] * d[0] + v[1] * d[1];
        let out = armijo(f0, slope, |s| Ok(j([v[0] + s * d[0], v[1] + s * d[1]])), 1e-4, 0.5, 20).unwrap();
        if scale == 1.0 {
            assert_eq!(out.step, 1.0);
            assert_eq!(out.evaluations, 1);
        } else {
            assert!(out.step < 1.0);
            // explicit arithmetic: J(v + s d) = ½(1 − 100 s)² ‖v‖²
            assert!((out.value - 0.5 * (1.0 - 100.0 * out.step).powi(2) * 25.0).abs() <= 1e-12);
        }
        assert!(out.value <= f0 + 1e-4 * out.step * slope);
    }
    assert!(matches!(armijo(f0, 25.0, |_| Ok(0.0), 1e-4, 0.5, 20), Err(Error::Contract(_))));
    assert!(matches!(armijo(f0, -25.0, |_| Ok(f0 + 1.0), 1e-4, 0.5, 3), Err(Error::LineSearchFailed(3))));
}

fn diag_problem(g: Grid) -> (VectorField<f64>, impl Fn(&VectorField<f64>) -> VectorField<f64>) {
    let d = VectorField::from_fn(g, |x: &[f64]| [2.0 + x[0].sin(), 1.5 + (x[1] * 2.0).cos(), 0.0]);
    let apply = move |x: &VectorField<f64>| {
        VectorField::from_components(
            (0..2).map(|a| x.component(a).zip_map(d.component(a), |u, w| u * w).unwrap()).collect(),
        )
        .unwrap()
    };
    (random_band_limited(g, 3, 1), apply)
}

#[test]
fn pcg_solves_spd_systems() {
    let g = Grid::new(&[16, 16], 1).unwrap();
    let (b, apply) = diag_problem(g);
    let out = pcg(&b, |x| Ok(apply(x)), |x| Ok(x.clone()), |a, c| a.inner(c).unwrap(), 1e-10, 500).unwrap();
    assert_eq!(out.status, PcgStatus::Converged);
    assert!(apply(&out.x).sub(&b).unwrap().norm_l2() <= 1e-10 * b.norm_l2());
    // exact preconditioner: one iteration
    let (b2, apply2) = diag_problem(g);
    let exact = pcg(
        &b2,
        |x| Ok(apply2(x)),
        |x| {
            let one = VectorField::constant(g, &[1.0, 1.0]);
            let d = apply2(&one);
            Ok(VectorField::from_components(
                (0..2).map(|a| x.component(a).zip_map(d.component(a), |u, w| u / w).unwrap()).collect(),
            )
            .unwrap())
        },
        |a, c| a.inner(c).unwrap(),
        1e-10,
        500,
    )
    .unwrap();
    assert_eq!(exact.iterations, 1);
}

#[test]
fn pcg_edge_cases() {
    let g = Grid::new(&[8, 8], 1).unwrap();
    let zero = pcg(&VectorField::<f64>::zeros(g), |x| Ok(x.clone()), |x| Ok(x.clone()), |a, c| a.inner(c).unwrap(), 0.1, 10)
        .unwrap();
    assert_eq!((zero.iterations, zero.x.norm_inf()), (0, 0.0));
    let b = random_band_limited(g, 2, 3);
    let neg = pcg(&b, |x| Ok(x.scaled(-1.0)), |x| Ok(x.scaled(2.0)), |a, c| a.inner(c).unwrap(), 0.1, 10).unwrap();
    assert_eq!(neg.status, PcgStatus::NegativeCurvature);
    assert_eq!(neg.iterations, 0);
    assert!(neg.x.sub(&b.scaled(2.0)).unwrap().norm_inf() == 0.0);
    let (b, apply) = diag_problem(g);
    let capped = pcg(&b, |x| Ok(apply(x)), |x| Ok(x.clone()), |a, c| a.inner(c).unwrap(), 1e-14, 2).unwrap();
    assert_eq!((capped.status, capped.iterations), (PcgStatus::MaxIterations, 2));
}

#[test]
fn newton_step_with_flat_images_takes_one_iteration() {
    let g = Grid::new(&[32, 32], 4).unwrap();
    let flat = ScalarField::constant(g, 0.4);
    let p = Problem::new(flat.clone(), flat, RegConfig::default(), DistanceKind::Ssd).unwrap();
    let c = Counters::default();
    let s = KktState::with_adjoint(&p, &c, swirl(g, 0.3)).unwrap();
    let grad = s.evaluate_gradient().unwrap();
    let step = pcg_newton_step(&s, &grad, &PrecondKind::new(PrecondVariant::Regularization), 1e-8, 50).unwrap();
    assert_eq!(step.iterations, 1);
    // H = αL, g = αLv ⇒ ṽ = −v
    assert!(step.direction.add(&swirl(g, 0.3)).unwrap().norm_inf() <= 1e-10);
    let zero = pcg_newton_step(&s, &VectorField::zeros(g), &PrecondKind::default(), 0.1, 50).unwrap();
    assert_eq!(zero.iterations, 0);
}

#[test]
fn identical_images_short_circuit() {
    let g = Grid::new(&[32, 32], 4).unwrap();
    let m = ScalarField::from_fn(g, crate::testutil::blob);
    let p = Problem::new(m.clone(), m, RegConfig::default(), DistanceKind::Ssd).unwrap();
    let (v, rep) = register(&p, &OptimizerConfig::default(), None).unwrap();
    assert_eq!(v.norm_inf(), 0.0);
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.status, SolveStatus::Converged);
    assert_eq!(rep.stop_rule, Some(StopRule::Absolute));
    assert!(rep.mismatch_degenerate);
}

fn synthetic() -> Problem<f64> {
    let (m0, m1) = pair(32, 4, |g| swirl(g, 0.6));
    Problem::new(m0, m1, RegConfig::default().with_alpha(1e-2), DistanceKind::Ssd).unwrap()
}

#[test]
fn registration_reduces_mismatch() {
    let p = synthetic();
    let cfg = OptimizerConfig::default();
    let (_, rep) = register(&p, &cfg, None).unwrap();
    assert_eq!(rep.status, SolveStatus::Converged);
    assert!(rep.mismatch <= 0.1, "{}", rep.mismatch);
    assert!(rep.iterations <= 25);
    assert!(rep.gradient <= cfg.eps_opt);
    assert!(rep.trace.windows(2).all(|w| w[1].merit <= w[0].merit));
    assert_eq!(rep.pde_solves, 2 * (rep.iterations + 1) + 2 * rep.matvecs + rep.line_search_evals);
    assert_eq!(rep.trace.len(), rep.iterations + 1);
}

#[test]
fn registration_is_deterministic() {
    let p = synthetic();
    let cfg = OptimizerConfig { precond: PrecondKind::new(PrecondVariant::Regularization), ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (v1, r1) = pool.install(|| register(&p, &cfg, None)).unwrap();
    let (v2, r2) = pool.install(|| register(&p, &cfg, None)).unwrap();
    assert_eq!(v1, v2);
    assert_eq!(r1.without_timing(), r2.without_timing());
}

#[test]
fn warm_start_from_solution_converges_immediately() {
    let p = synthetic();
    let cfg = OptimizerConfig::default();
    let (v, rep) = register(&p, &cfg, None).unwrap();
    let (_, again) = register(&p, &OptimizerConfig { eps_opt: 0.5, ..cfg }, Some(v)).unwrap();
    assert!(again.objective_initial <= rep.objective_initial);
    assert!(again.iterations <= 2);
}

#[test]
fn invalid_config_rejected() {
    let p = synthetic();
    let cfg = OptimizerConfig { backtrack: 1.5, ..Default::default() };
    assert!(register(&p, &cfg, None).is_err());
}
