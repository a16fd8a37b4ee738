//! Forward passes of the calibration subnet and the per-axis denoising subnet.
//!
//! Parameter containers are generic over the scalar so the same structs hold
//! `f64` training state, `f32` deployment weights and tape variables.

mod calib;
mod denoise;
pub mod weights;

use thiserror::Error;

pub use calib::{calib_forward, effective_affine, lbn_forward, prelu, CalibNetParams, LbnParams};
pub use denoise::{
    denoise_forward, denoise_sequence, denoise_sequence_axes, leaky_relu, ConvLayer, DenoiseNetParams, LAYER_SHAPES,
    LEAKY_SLOPE, RECEPTIVE_FIELD,
};
pub use weights::{export_weights, import_weights, read_weights, write_weights, WeightFormatError, WeightSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("window of {len} samples is shorter than the receptive field ({needed})")]
    WindowTooShort { len: usize, needed: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("sequence of {len} samples is shorter than the window ({window})")]
    SequenceTooShort { len: usize, window: usize },
}

/// Exact trainable scalar count of a parameter container.
pub trait ParamCount {
    fn param_count(&self) -> usize;
}

pub fn param_count<P: ParamCount + ?Sized>(net: &P) -> usize {
    net.param_count()
}

impl<T> ParamCount for CalibNetParams<T> {
    fn param_count(&self) -> usize {
        CalibNetParams::<T>::COUNT
    }
}

impl<T> ParamCount for DenoiseNetParams<T> {
    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

impl<T> ParamCount for WeightSet<T> {
    fn param_count(&self) -> usize {
        self.calib.param_count() + self.denoise.as_ref().map_or(0, |d| d.param_count())
    }
}

/// Window, segment length and time-step policy shared by training and
/// application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    /// Denoising window `N` in samples.
    pub window: usize,
    /// Loss segment length `M` in samples.
    pub segment_len: usize,
    pub dt_policy: DtPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// Step from consecutive timestamps.
    Timestamps,
    /// Fixed step `1 / rate_hz`.
    Nominal { rate_hz: f64 },
}

impl DtPolicy {
    /// Rewrites a stream's timestamps in place; `Nominal` keeps the first
    /// timestamp and spaces the rest by `1 / rate_hz`.
    pub fn retime(&self, timestamps: &mut [f64]) {
        if let DtPolicy::Nominal { rate_hz } = *self {
            if let Some(&t0) = timestamps.first() {
                for (k, t) in timestamps.iter_mut().enumerate() {
                    *t = t0 + k as f64 / rate_hz;
                }
            }
        }
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            window: 50,
            segment_len: 400,
            dt_policy: DtPolicy::Timestamps,
        }
    }
}

impl NetConfig {
    pub fn is_valid(&self) -> bool {
        let rate_ok = match self.dt_policy {
            DtPolicy::Timestamps => true,
            DtPolicy::Nominal { rate_hz } => rate_hz > 0.0 && rate_hz.is_finite(),
        };
        self.window >= 1 && self.window <= self.segment_len && rate_ok
    }
}
