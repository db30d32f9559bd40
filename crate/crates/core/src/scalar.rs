//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Geometry, rendering and optimization are written once against [`Real`]
//! and instantiated for `f64` (gradient checks, analysis) and `f32`
//! (training loops).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for the two supported widths.
    #[inline(always)]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }

    #[inline(always)]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap()
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap()
    }

    #[inline(always)]
    fn as_f32(self) -> f32 {
        self.to_f32().unwrap()
    }

    #[inline(always)]
    fn sigmoid(self) -> Self {
        Self::one() / (Self::one() + (-self).exp())
    }

    #[inline(always)]
    fn logit(self) -> Self {
        (self / (Self::one() - self)).ln()
    }
}

impl Real for f32 {}
impl Real for f64 {}
