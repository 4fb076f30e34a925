//! Scalar abstraction for the whole engine.
//!
//! Every height, time, rate, area and volume in the crate is generic over
//! [`Real`], so the engine runs on `f32` or `f64` (the crate root re-exports
//! `f64` aliases, which is what the CLI uses).

use std::fmt;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used throughout the engine.
pub trait Real: Float + FromPrimitive + fmt::Debug + fmt::Display + Default + 'static {
    /// Shorthand for converting an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Shorthand for converting a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Total-order comparison for finite scalars (heights are pairwise distinct
/// and finite, so `partial_cmp` never fails on terrain data).
#[inline]
pub fn cmp_real<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).expect("non-finite scalar in ordering")
}
