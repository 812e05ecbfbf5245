use serde::{Deserialize, Serialize};

use super::RegOperatorSpec;
use crate::error::{Error, Result};
use crate::fft::{self, odd_wavenumber, wavenumber};
use crate::field::VectorField;
use crate::scalar::Real;

/// Constraint on the divergence of the velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum IncompressibilityMode {
    #[default]
    None,
    Incompressible,
    /// Soft penalty on `w = ∇·v` with weight `beta > 0`.
    NearIncompressible { beta: f64 },
}

impl IncompressibilityMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::NearIncompressible { beta } if !(beta > 0.0 && beta.is_finite()) => {
                Err(Error::Contract(format!("near-incompressible beta must be > 0, got {beta}")))
            }
            _ => Ok(()),
        }
    }
}

/// Scalar multiplier `μ(|k|²)` of the longitudinal part removed by the projection.
///
/// Near-incompressible: `μ = (α (β((-Δ)^{-1} + id))^{-1} + id)^{-1}`, evaluated
/// left to right as `1 / (α / (β (1/|k|² + 1)) + 1)`. Incompressible: `μ = 1`.
/// The zero mode always gets `0`.
pub fn projection_multiplier(k2: f64, mode: &IncompressibilityMode, alpha: f64) -> f64 {
    if k2 == 0.0 {
        return 0.0;
    }
    match *mode {
        IncompressibilityMode::None => 0.0,
        IncompressibilityMode::Incompressible => 1.0,
        IncompressibilityMode::NearIncompressible { beta } => {
            let inner = beta * (1.0 / k2 + 1.0);
            1.0 / (alpha / inner + 1.0)
        }
    }
}

/// Applies `b ↦ a(k)·b + c(k)·Π b` mode by mode, where `Π = k kᵀ/|k|²` uses
/// Nyquist-free wavenumbers (so it is the exact composition of the spectral
/// gradient, inverse Laplacian and divergence). `coef(|k̃|², |k|²)` returns `(a, c)`.
fn apply_longitudinal<T: Real>(b: &VectorField<T>, coef: impl Fn(f64, f64) -> (f64, f64)) -> VectorField<T> {
    let grid = *b.grid();
    let d = grid.dim();
    let mut specs: Vec<_> = b.components().iter().map(fft::forward).collect();
    for idx in 0..grid.len() {
        let ix = grid.unravel(idx);
        let mut kt = [0.0f64; 3];
        let mut s_full = 0.0;
        for a in 0..d {
            kt[a] = odd_wavenumber(ix[a], grid.n(a)) as f64;
            let k = wavenumber(ix[a], grid.n(a)) as f64;
            s_full += k * k;
        }
        let s = kt[..d].iter().map(|k| k * k).sum::<f64>();
        if s == 0.0 {
            let (id_w, _) = coef(0.0, s_full);
            for sp in specs.iter_mut() {
                sp.data[idx] = sp.data[idx] * T::lit(id_w);
            }
            continue;
        }
        let (id_w, long_w) = coef(s, s_full);
        let mut dot = rustfft::num_complex::Complex::new(T::zero(), T::zero());
        for a in 0..d {
            dot = dot + specs[a].data[idx] * T::lit(kt[a]);
        }
        let scale = T::lit(long_w / s);
        for a in 0..d {
            let c = specs[a].data[idx];
            specs[a].data[idx] = c * T::lit(id_w) + dot * (T::lit(kt[a]) * scale);
        }
    }
    VectorField::from_components(specs.into_iter().map(fft::inverse).collect()).expect("same grid")
}

/// Removes (a multiple of) the longitudinal part of a body force:
/// `b - ∇ μ Δ^{-1} ∇·b`.
pub fn project_body_force<T: Real>(
    b: &VectorField<T>,
    mode: &IncompressibilityMode,
    alpha: f64,
) -> Result<VectorField<T>> {
    mode.validate()?;
    if *mode == IncompressibilityMode::None {
        return Err(Error::Contract("projection requested with incompressibility mode none".into()));
    }
    Ok(apply_longitudinal(b, |s, _| (1.0, -projection_multiplier(s, mode, alpha))))
}

/// Inner-product weight under which the projected gradient and Hessian are
/// self-adjoint: `P^{-1} = id + μ/(1-μ) Π` for the near-incompressible mode,
/// identity otherwise (the incompressible iterates live in the range of `P`).
pub fn apply_projection_metric<T: Real>(
    b: &VectorField<T>,
    mode: &IncompressibilityMode,
    alpha: f64,
) -> VectorField<T> {
    match mode {
        IncompressibilityMode::NearIncompressible { .. } => apply_longitudinal(b, |s, _| {
            if s == 0.0 {
                return (1.0, 0.0);
            }
            let mu = projection_multiplier(s, mode, alpha);
            (1.0, mu / (1.0 - mu))
        }),
        _ => b.clone(),
    }
}

/// Penalty energy `½⟨G v, v⟩` whose gradient `G v` satisfies
/// `P(αLv + Gv) = αLv`, i.e. the projected reduced gradient is the
/// `P`-preconditioned gradient of `dist + α/2⟨Lv,v⟩ + ½⟨Gv,v⟩`.
/// For the H¹ seminorm `G = β(|k|² + 1)Π`, which is
/// `β⟨((-Δ)^{-1} + id) ∇·v, ∇·v⟩`.
pub fn divergence_energy<T: Real>(
    v: &VectorField<T>,
    mode: &IncompressibilityMode,
    alpha: f64,
    spec: &RegOperatorSpec,
) -> T {
    if !matches!(mode, IncompressibilityMode::NearIncompressible { .. }) {
        return T::zero();
    }
    let gv = apply_longitudinal(v, |s, s_full| {
        if s == 0.0 {
            return (0.0, 0.0);
        }
        let mu = projection_multiplier(s, mode, alpha);
        (0.0, alpha * spec.symbol(s_full) * mu / (1.0 - mu))
    });
    gv.inner(v).expect("same grid") / T::lit(2.0)
}
