//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type the solver can be instantiated with.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; every supported type can represent it (possibly rounded).
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `|u|^e` with fast paths for the exponents used by the registered scenarios.
    #[inline]
    fn abs_pow(self, e: Self) -> Self {
        let a = self.abs();
        if e == Self::zero() {
            Self::one()
        } else if e == Self::one() {
            a
        } else if e == Self::lit(2.0) {
            a * a
        } else {
            a.powf(e)
        }
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_pow_fast_paths_agree_with_powf() {
        for &u in &[-3.5_f64, -1.0, 0.0, 0.25, 2.0] {
            for &e in &[0.0_f64, 1.0, 2.0, 1.5] {
                let reference = if e == 0.0 { 1.0 } else { u.abs().powf(e) };
                assert!((u.abs_pow(e) - reference).abs() <= 1e-15 * reference.max(1.0));
            }
        }
    }
}
