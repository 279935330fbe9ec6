//! Scalar abstraction for the numeric kernels.
//!
//! Geometry, measures, transport bounds and the closed-form constants are
//! generic over [`Real`]; `f32` and `f64` both qualify. The Monte Carlo
//! harness and everything serialized to disk is pinned to `f64`.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable in every kernel of this crate.
///
/// A blanket-style trait alias over the `num_traits` capabilities we rely on,
/// plus the thread-safety bounds required by the parallel harness.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`, rounding if necessary.
    ///
    /// Panics on values outside the target type's range, which cannot happen
    /// for the finite constants this crate feeds it.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant convertible to scalar type")
    }

    /// Converts `self` to `f64`, rounding if necessary.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Converts a `usize` count into `Self`.
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count convertible to scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
