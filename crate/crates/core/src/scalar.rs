use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`. Special functions are evaluated in `f64`
/// and cast back, so `f32` instantiations trade accuracy for memory only in
/// the streaming state.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// Tolerance scale used by the iterative solvers.
    fn solver_tolerance() -> Self;
}

impl Real for f64 {
    fn solver_tolerance() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn solver_tolerance() -> Self {
        64.0 * f32::EPSILON
    }
}
