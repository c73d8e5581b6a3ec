//! Floating-point abstraction the numerical kernels are generic over.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type for all real-valued computation: `f32` or `f64`.
///
/// Everything numerical in this crate (rates, tilts, eigenvalues, costs,
/// probabilities) is parameterized over this trait; concrete aliases for the
/// common instantiations live at the crate root.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Widens to `f64` (used for diagnostics and integer rounding).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equal-length slices.
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Max-norm of a slice; zero for the empty slice.
pub(crate) fn inf_norm<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// `⟨alpha, u⟩` where `u` is an integer displacement.
pub(crate) fn dot_int<T: Scalar>(alpha: &[T], u: &[i64]) -> T {
    debug_assert_eq!(alpha.len(), u.len());
    alpha
        .iter()
        .zip(u)
        .map(|(&a, &z)| a * T::of(z as f64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(0.25), 0.25f32);
        assert_eq!(2.0f64.as_f64(), 2.0);
    }

    #[test]
    fn norms_and_dots() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, -1.0]), 1.0);
        assert_eq!(inf_norm(&[-3.0, 2.0]), 3.0);
        assert_eq!(inf_norm::<f64>(&[]), 0.0);
        assert_eq!(dot_int(&[0.5, 1.0], &[2, -1]), 0.0);
    }
}
