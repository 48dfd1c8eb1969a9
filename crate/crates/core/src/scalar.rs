//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All algorithms are written against [`Scalar`], which is implemented for
//! `f32` and `f64`. Tolerances are part of the trait because the LP and
//! separation routines need thresholds that track the precision of the
//! underlying type.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Numerical tolerances used by the simplex solver and the separators.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T> {
    /// Smallest admissible pivot magnitude.
    pub pivot: T,
    /// Primal feasibility tolerance.
    pub feasibility: T,
    /// Reduced-cost (dual feasibility) tolerance.
    pub reduced_cost: T,
    /// Integrality tolerance for binaries.
    pub integrality: T,
}

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    fn tolerances() -> Tolerances<Self>;

    /// Converts an `f64`; out-of-range magnitudes saturate to infinity.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| {
            if v > 0.0 {
                Self::infinity()
            } else if v < 0.0 {
                Self::neg_infinity()
            } else {
                Self::nan()
            }
        })
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn tolerances() -> Tolerances<Self> {
        Tolerances {
            pivot: 1e-9,
            feasibility: 1e-7,
            reduced_cost: 1e-7,
            integrality: 1e-6,
        }
    }
}

impl Scalar for f32 {
    fn tolerances() -> Tolerances<Self> {
        Tolerances {
            pivot: 1e-5,
            feasibility: 1e-4,
            reduced_cost: 1e-4,
            integrality: 1e-3,
        }
    }
}
