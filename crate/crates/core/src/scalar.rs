//! Scalar abstraction shared by inference and differentiation.
//!
//! Every forward computation in this crate (quaternion kinematics, the two
//! subnets, the segment loss) is written once against [`Scalar`]. Running it
//! with `f32`/`f64` is plain inference; running it with [`crate::autodiff::Var`]
//! records a tape for reverse-mode gradients.

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{Float, Num, NumAssignOps};

/// Arithmetic needed by the differentiable forward paths.
pub trait Scalar: Copy + Debug + PartialOrd + Num + NumAssignOps + Neg<Output = Self> {
    /// Lifts a constant.
    fn from_f64(v: f64) -> Self;

    /// Primal value as `f64`.
    fn value(self) -> f64;

    fn square_root(self) -> Self;

    fn finite(self) -> bool {
        self.value().is_finite()
    }

    /// `bias + Σ weights[i] * inputs[i]`, accumulated left to right.
    ///
    /// Tape variables override this with a single fused node.
    fn dot(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        debug_assert_eq!(weights.len(), inputs.len());
        let mut acc = bias;
        for (&w, &x) in weights.iter().zip(inputs) {
            acc += w * x;
        }
        acc
    }
}

/// Floating-point scalars: [`Scalar`] plus the transcendental functions used
/// by metrics and conversions (never differentiated).
pub trait Real: Scalar + Float {}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn square_root(self) -> Self {
        f64::sqrt(self)
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn value(self) -> f64 {
        self as f64
    }

    #[inline]
    fn square_root(self) -> Self {
        f32::sqrt(self)
    }
}

impl Real for f32 {}
impl Real for f64 {}
