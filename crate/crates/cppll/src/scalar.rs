//! Floating-point scalar abstraction for the numeric core.
//!
//! Every algorithm in this crate is written against the [`Scalar`] trait so
//! the same code runs in `f32` or `f64`. Defaults, documented tolerances, and
//! the test suite all assume `f64`; `f32` trades accuracy for speed and is
//! only appropriate for coarse sweeps.

/// Floating-point number usable as the state/parameter scalar.
///
/// A thin alias-trait over [`num_traits::Float`] plus literal conversion and
/// the auto-traits needed for parallel sweeps. Implemented for `f32`/`f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lifts an `f64` literal into the scalar type.
///
/// # Panics
/// Panics if the value is not representable, which cannot happen for the
/// finite literals this crate uses with `f32`/`f64`.
#[inline]
pub(crate) fn lit<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("finite literal must convert to the scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(lit::<f64>(1.5e-12), 1.5e-12);
        assert_eq!(lit::<f32>(0.25), 0.25f32);
    }
}
