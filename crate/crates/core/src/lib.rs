//! Calibration and denoising of tri-axial MEMS gyroscopes with a
//! 195-parameter network.
//!
//! The pipeline is: raw rates → calibration subnet (two affine blocks joined
//! by a PReLU with a residual path) → per-axis sliding-window denoiser
//! (three 1-D convolutions) → strapdown quaternion integration. Training
//! scores only the attitude reached at the end of each segment, so sparse
//! reference attitudes are enough.
//!
//! Core math is generic over [`Scalar`]; the aliases below fix the common
//! instantiations.

pub mod autodiff;
pub mod data;
pub mod metrics;
pub mod net;
pub mod quat;
pub mod scalar;
pub mod sim;
pub mod train;

pub use autodiff::{value_and_grad, Var};
pub use metrics::AttitudeTrack;
pub use net::{CalibNetParams, DenoiseNetParams, LbnParams, WeightSet};
pub use quat::{Quat, RotMat};
pub use scalar::{Real, Scalar};

pub type Quatf = Quat<f32>;
pub type Quatd = Quat<f64>;
pub type RotMatd = RotMat<f64>;
pub type CalibNet = CalibNetParams<f64>;
pub type CalibNetf = CalibNetParams<f32>;
pub type DenoiseNet = DenoiseNetParams<f64>;
pub type DenoiseNetf = DenoiseNetParams<f32>;
