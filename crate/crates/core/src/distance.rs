//! Image similarity: value, adjoint final condition `λ(1) = −∂dist/∂m(1)` and
//! the Gauss–Newton incremental final condition `λ̃(1) = −∂²dist/∂m(1)² m̃(1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{l2_inner, ScalarField};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    /// `½‖m(1) − m₁‖²`
    #[default]
    Ssd,
    /// `1 − ⟨m(1), m₁⟩² / (‖m₁‖² ‖m(1)‖²)`, no mean subtraction.
    Ncc,
}

struct NccTerms<T> {
    a: T,
    b: T,
    c: T,
}

fn ncc_terms<T: Real>(m: &ScalarField<T>, mref: &ScalarField<T>) -> Result<NccTerms<T>> {
    let a = l2_inner(m, mref)?;
    let b = l2_inner(mref, mref)?;
    let c = l2_inner(m, m)?;
    if b <= T::zero() || c <= T::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok(NccTerms { a, b, c })
}

pub fn dist_value<T: Real>(m: &ScalarField<T>, mref: &ScalarField<T>, kind: DistanceKind) -> Result<T> {
    match kind {
        DistanceKind::Ssd => {
            let r = m.sub(mref)?;
            Ok(l2_inner(&r, &r)? / T::lit(2.0))
        }
        DistanceKind::Ncc => {
            let NccTerms { a, b, c } = ncc_terms(m, mref)?;
            // clamp rounding below zero for identical images
            Ok((T::one() - a * a / (b * c)).max(T::zero()))
        }
    }
}

pub fn adjoint_final<T: Real>(m: &ScalarField<T>, mref: &ScalarField<T>, kind: DistanceKind) -> Result<ScalarField<T>> {
    match kind {
        DistanceKind::Ssd => mref.sub(m),
        DistanceKind::Ncc => {
            let NccTerms { a, b, c } = ncc_terms(m, mref)?;
            let s = T::lit(2.0) * a / (b * c);
            let r = a / c;
            mref.zip_map(m, |m1, mi| s * (m1 - r * mi))
        }
    }
}

pub fn incremental_final_gn<T: Real>(
    mtilde: &ScalarField<T>,
    m: &ScalarField<T>,
    mref: &ScalarField<T>,
    kind: DistanceKind,
) -> Result<ScalarField<T>> {
    m.grid().check_same(mtilde.grid())?;
    match kind {
        DistanceKind::Ssd => Ok(mtilde.scaled(-T::one())),
        DistanceKind::Ncc => {
            let NccTerms { a, b, c } = ncc_terms(m, mref)?;
            let p = l2_inner(mref, mtilde)?;
            let r = l2_inner(m, mtilde)?;
            let two = T::lit(2.0);
            let c2 = c * c;
            let q1 = two / b * (p / c - two * a * r / c2);
            let q2 = two / b * (two * a * p / c2 - T::lit(4.0) * a * a * r / (c2 * c));
            let q3 = two / b * (a * a / c2);
            let mut out = mref.scaled(q1);
            out.axpy(-q2, m);
            out.axpy(-q3, mtilde);
            Ok(out)
        }
    }
}
