//! Shared fixtures for unit tests.

use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::transport::{solve_state, Trajectory, TransportConfig};

pub fn blob(x: &[f64]) -> f64 {
    let b1 = (2.0 * ((x[0] - 0.5).cos() - 1.0) + 2.0 * ((x[1] + 0.4).cos() - 1.0)).exp();
    let b2 = 0.6 * (3.0 * ((x[0] + 1.2).cos() - 1.0) + 1.5 * ((x[1] - 1.0).cos() - 1.0)).exp();
    b1 + b2
}

pub fn swirl(g: Grid, a: f64) -> VectorField<f64> {
    VectorField::from_fn(g, |x: &[f64]| [a * x[0].sin() * x[1].cos(), -a * x[0].cos() * x[1].sin(), 0.0])
}

pub fn smooth_velocity(g: Grid, a: f64) -> VectorField<f64> {
    VectorField::from_fn(g, |x: &[f64]| {
        [a * (0.6 * x[0].sin() + 0.4 * x[1].cos()), a * (0.5 * (x[1] + 0.5).sin() - 0.3 * x[0].cos()), 0.0]
    })
}

/// Template and the template transported by `v_true` (finer time stepping).
pub fn pair(n: usize, nt: usize, v_true: impl Fn(Grid) -> VectorField<f64>) -> (ScalarField<f64>, ScalarField<f64>) {
    let g = Grid::new(&[n, n], nt).unwrap();
    let m0 = ScalarField::from_fn(g, blob);
    let fine = g.with_nt(16).unwrap();
    let traj = Trajectory::new(&v_true(fine), TransportConfig::default()).unwrap();
    let m1 = solve_state(&traj, &m0.clone().with_grid(fine).unwrap()).unwrap().last().clone();
    (m0, m1.with_grid(g).unwrap())
}

/// Band-limited random vector field (modes with |k_a| <= kmax).
pub fn random_band_limited(g: Grid, kmax: i32, seed: u64) -> VectorField<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for _ in 0..g.dim() {
        let mut comp = Vec::new();
        for k0 in -kmax..=kmax {
            for k1 in -kmax..=kmax {
                comp.push((k0 as f64, k1 as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3)));
            }
        }
        modes.push(comp);
    }
    VectorField::from_fn(g, |x: &[f64]| {
        let mut out = [0.0; 3];
        for (a, comp) in modes.iter().enumerate() {
            out[a] = comp.iter().map(|(k0, k1, amp, ph)| amp * (k0 * x[0] + k1 * x[1] + ph).cos()).sum::<f64>()
                / comp.len() as f64;
        }
        out
    })
}

/// `v = −a sin(x)` per component: contracts around the origin, expands around ±π.
pub fn compressive(g: Grid, a: f64) -> VectorField<f64> {
    VectorField::from_fn(g, |x: &[f64]| [-a * x[0].sin(), -a * x[1].sin(), 0.0])
}
