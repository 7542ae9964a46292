//! Scalar abstraction shared by every numeric module.
//!
//! All linear algebra is written against [`Real`], which is implemented for
//! `f32` and `f64`. Random variate generation always happens in double
//! precision and is converted into the working type at the boundary.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Smallest value used as a floor for quantities that must stay strictly
    /// positive (variances, GIG arguments).
    fn tiny() -> Self;

    /// Largest finite value used as a ceiling for the same quantities.
    fn huge() -> Self;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("every Real converts to f64")
    }

    #[inline]
    fn is_finite_real(self) -> bool {
        self.as_f64().is_finite()
    }

    /// Clamp into `[tiny, huge]`, mapping NaN to `tiny`.
    #[inline]
    fn clamp_positive(self) -> Self {
        let x = self.as_f64();
        if !(x >= Self::tiny().as_f64()) {
            Self::tiny()
        } else if x > Self::huge().as_f64() {
            Self::huge()
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn tiny() -> Self {
        1e-300
    }
    fn huge() -> Self {
        1e300
    }
}

impl Real for f32 {
    fn tiny() -> Self {
        1e-37
    }
    fn huge() -> Self {
        1e37
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(<f64 as Real>::of(0.25).as_f64(), 0.25);
        assert_eq!(<f32 as Real>::of(0.25).as_f64(), 0.25);
    }

    #[test]
    fn clamp_positive_handles_nan_and_zero() {
        assert_eq!(f64::NAN.clamp_positive(), 1e-300);
        assert_eq!(0.0f64.clamp_positive(), 1e-300);
        assert_eq!(f64::INFINITY.clamp_positive(), 1e300);
        assert_eq!(0.5f32.clamp_positive(), 0.5);
    }
}
