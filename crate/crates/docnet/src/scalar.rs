//! Scalar abstraction for the numeric kernels.
//!
//! Dense/sparse matrices, the autodiff tape, the encoders, and the analysis
//! routines are generic over [`Scalar`] so the same code runs in `f32` or
//! `f64`. Training uses `f64`; embedding files store `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable by every numeric kernel in this crate.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for literals and accumulated statistics.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any float scalar")
    }

    /// Lossless widening to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
