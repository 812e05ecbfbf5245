//! Synthetic registration problems with known velocities.
//!
//! The template is a seeded sum of periodic bumps. The reference is obtained by
//! tracing characteristics of the analytic velocity backwards with RK4 (64 steps)
//! and evaluating the analytic template at their feet, so it carries no
//! interpolation error.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::scalar::Real;

const RK4_STEPS: usize = 64;
/// Amplitude of the compressive case: the per-axis stretch spans `e^{±1.5}`.
pub const COMPRESS_AMPLITUDE: f64 = 1.5;
pub const SWIRL_AMPLITUDE: f64 = 0.8;
pub const ROTATION_RATE: f64 = 0.5;
pub const TRANSLATION_LENGTH: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Translation,
    Rotation,
    Swirl,
    Compress,
}

impl SynthKind {
    pub const ALL: [SynthKind; 4] = [SynthKind::Translation, SynthKind::Rotation, SynthKind::Swirl, SynthKind::Compress];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Translation => "translation",
            SynthKind::Rotation => "rotation",
            SynthKind::Swirl => "swirl",
            SynthKind::Compress => "compress",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown synthetic case {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct SynthCase<T> {
    pub kind: SynthKind,
    pub m0: ScalarField<T>,
    pub m1: ScalarField<T>,
    pub v_true: VectorField<T>,
}

struct Bump {
    center: [f64; 3],
    kappa: f64,
    amp: f64,
}

/// Analytic velocity of each case.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticVelocity {
    kind: SynthKind,
    shift: [f64; 3],
}

impl AnalyticVelocity {
    pub fn new(kind: SynthKind, d: usize, seed: u64) -> Self {
        let mut shift = [0.0; 3];
        if kind == SynthKind::Translation {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7472_616e);
            let mut dir = [0.0; 3];
            for x in dir.iter_mut().take(d) {
                *x = rng.gen_range(-1.0..1.0);
            }
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            for a in 0..d {
                shift[a] = TRANSLATION_LENGTH * dir[a] / norm;
            }
        }
        Self { kind, shift }
    }

    pub fn eval(&self, x: &[f64]) -> [f64; 3] {
        let mut v = [0.0; 3];
        match self.kind {
            SynthKind::Translation => v = self.shift,
            SynthKind::Rotation => {
                v[0] = -ROTATION_RATE * x[1].sin();
                v[1] = ROTATION_RATE * x[0].sin();
            }
            SynthKind::Swirl => {
                v[0] = SWIRL_AMPLITUDE * x[0].sin() * x[1].cos();
                v[1] = -SWIRL_AMPLITUDE * x[0].cos() * x[1].sin();
            }
            SynthKind::Compress => {
                for (a, xa) in x.iter().enumerate() {
                    v[a] = -COMPRESS_AMPLITUDE * xa.sin();
                }
            }
        }
        v
    }

    /// Foot of the characteristic through `x` at `t = 1`, traced back to `t = 0`.
    pub fn departure(&self, x: &[f64]) -> [f64; 3] {
        let d = x.len();
        let h = 1.0 / RK4_STEPS as f64;
        let mut y = [0.0; 3];
        y[..d].copy_from_slice(x);
        let f = |p: &[f64; 3]| {
            let v = self.eval(&p[..d]);
            [-v[0], -v[1], -v[2]]
        };
        let axpy = |p: &[f64; 3], s: f64, k: &[f64; 3]| [p[0] + s * k[0], p[1] + s * k[1], p[2] + s * k[2]];
        for _ in 0..RK4_STEPS {
            let k1 = f(&y);
            let k2 = f(&axpy(&y, h / 2.0, &k1));
            let k3 = f(&axpy(&y, h / 2.0, &k2));
            let k4 = f(&axpy(&y, h, &k3));
            for a in 0..d {
                y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
        }
        y
    }
}

fn bumps(d: usize, seed: u64) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5)
        .map(|_| {
            let mut center = [0.0; 3];
            for c in center.iter_mut().take(d) {
                *c = rng.gen_range(-1.8..1.8);
            }
            Bump { center, kappa: rng.gen_range(1.5..3.5), amp: rng.gen_range(0.4..1.0) }
        })
        .collect()
}

fn template_value(bumps: &[Bump], x: &[f64]) -> f64 {
    bumps
        .iter()
        .map(|b| b.amp * x.iter().zip(&b.center).map(|(xa, ca)| b.kappa * ((xa - ca).cos() - 1.0)).sum::<f64>().exp())
        .sum()
}

/// Builds `(m0, m1, v_true)` on an `n^d` grid with `nt` time steps.
///
/// Both images share one affine rescaling that maps `m0` onto `[0, 1]`.
pub fn synth_case<T: Real>(kind: SynthKind, n: usize, d: usize, nt: usize, seed: u64) -> Result<SynthCase<T>> {
    if n < 32 || !n.is_power_of_two() {
        return Err(Error::Contract(format!("synthetic cases need n a power of two >= 32, got {n}")));
    }
    let grid = Grid::uniform(d, n, nt)?;
    let b = bumps(d, seed);
    let vel = AnalyticVelocity::new(kind, d, seed);
    let raw0: Vec<f64> = (0..grid.len()).map(|i| template_value(&b, &grid.point::<f64>(i)[..d])).collect();
    let raw1: Vec<f64> = (0..grid.len())
        .map(|i| template_value(&b, &vel.departure(&grid.point::<f64>(i)[..d])[..d]))
        .collect();
    let lo = raw0.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = |x: f64| T::lit((x - lo) / (hi - lo));
    let m0 = ScalarField::new(grid, raw0.into_iter().map(scale).collect())?;
    let m1 = ScalarField::new(grid, raw1.into_iter().map(scale).collect())?;
    let v_true = VectorField::from_fn(grid, |x: &[T]| {
        let p: Vec<f64> = x.iter().map(|s| s.to_f64_lossy()).collect();
        vel.eval(&p).map(T::lit)
    });
    Ok(SynthCase { kind, m0, m1, v_true })
}
