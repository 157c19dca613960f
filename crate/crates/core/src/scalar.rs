//! Floating-point element type shared by every kernel.
//!
//! Weights are stored as `f32` in PRGW files and models are evaluated in `f32`
//! by default. Gradient checks need `f64`, so every kernel is generic over
//! [`Real`] and models convert between the two with `GeneratorModel::cast`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + rustfft::FftNum
    + Sum
    + Default
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn to(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn to(self) -> f64 {
        self
    }
}
