//! Floating-point abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable by the linear algebra, distance and network code.
///
/// Implemented for `f32` and `f64`. File formats and reports are always
/// 64-bit; `f32` is there for memory-bound feature sets.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(floor, c * epsilon)`: a tolerance that is `floor` in `f64` and
    /// degrades gracefully for narrower types.
    fn tol(floor: f64, eps_multiple: f64) -> Self {
        let scaled = Self::epsilon() * Self::lit(eps_multiple);
        scaled.max(Self::lit(floor))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
