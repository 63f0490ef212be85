//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every `Real` can represent (a rounding of) any finite `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine-epsilon scaled slack used by exact-arithmetic style comparisons.
    #[inline]
    fn roundoff() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Rounds `x / step` to the nearest integer, returning `None` when the ratio is not
/// within `rel_tol` of an integer. The tolerance never drops below the type's roundoff,
/// so `f32` grids like `3 / 0.004` still align.
pub(crate) fn integer_ratio<T: Real>(x: T, step: T, rel_tol: f64) -> Option<usize> {
    if step <= T::zero() || x < T::zero() {
        return None;
    }
    let q = (x / step).as_f64();
    let n = q.round();
    let tol = rel_tol.max(T::roundoff().as_f64());
    if (q - n).abs() <= tol * n.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}
