//! Scalar abstraction for the numerical kernels.
//!
//! Everything downstream of the configuration layer (grids, relaxation,
//! interpolation, crystal minimization, mode analysis) is generic over a
//! floating-point scalar so the same code runs in `f32` or `f64`.
//! Physical inputs (geometry, voltages, species) stay `f64`; they are
//! converted once at the boundary with [`lit`].

use std::fmt::{Display, LowerExp};
use std::iter::Sum;

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the numerical kernels.
///
/// `nalgebra::RealField` supplies the transcendental functions and linear
/// algebra support; `FromPrimitive`/`ToPrimitive` move literals across the
/// `f64` configuration boundary.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + Sum + Display + LowerExp
{
    /// Lossless-enough conversion back to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Real for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + Sum + Display + LowerExp
{
}

/// Converts an `f64` literal or configuration value into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        let x: f64 = lit(1.25);
        assert_eq!(x, 1.25);
        let y: f32 = lit(0.5);
        assert_eq!(y, 0.5f32);
        assert_eq!(count::<f64>(29), 29.0);
    }
}
