//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the geometry, calibration and registration code is
/// generic over. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(base, factor * epsilon)`: a tolerance that degrades gracefully
    /// when the scalar type cannot resolve `base`.
    #[inline]
    fn tol(base: f64, factor: f64) -> Self {
        let eps = Self::epsilon().as_f64();
        Self::lit(base.max(factor * eps))
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_floored_by_precision() {
        assert_eq!(<f64 as Real>::tol(1e-9, 100.0), 1e-9);
        assert!(<f32 as Real>::tol(1e-9, 100.0) > 1e-6);
    }
}
