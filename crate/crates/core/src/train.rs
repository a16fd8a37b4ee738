//! Segment loss, AdamW and the two-phase training loops.
//!
//! Phase one fits the calibration subnet alone; phase two freezes it and fits
//! the denoiser. Both phases use the full-batch mean segment loss, evaluated
//! in a fixed segment order, and one optimizer step per epoch.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::autodiff::{value_and_grad, TapeError, ValueGrad, Var};
use crate::data::{ReferenceKind, Segment};
use crate::net::{calib_forward, denoise_sequence, CalibNetParams, DenoiseNetParams, NetError, RECEPTIVE_FIELD};
use crate::quat::{integrate_step, quat_diff, quat_from_euler, quat_to_euler, Quat, QuatError, Vec3};
use crate::scalar::Scalar;
use crate::Quatd;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("segment has {samples} samples but {timestamps} timestamps")]
    LengthMismatch { samples: usize, timestamps: usize },
    #[error("segment start index {start} outside a segment of {len} samples")]
    BadStart { start: usize, len: usize },
    #[error("non-finite timestamp at segment index {0}")]
    NonFiniteTimestamp(usize),
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64, trace: Vec<f64> },
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("{params} parameters but {grads} gradients")]
    ShapeMismatch { params: usize, grads: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Quat(#[from] QuatError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

/// Yaw of `q` substituted into the roll and pitch of `tilt`.
fn with_yaw_of(tilt: Quatd, q: Quatd) -> Quatd {
    let r = quat_to_euler(tilt);
    let y = quat_to_euler(q);
    quat_from_euler(r.roll.to_radians(), r.pitch.to_radians(), y.yaw.to_radians())
}

/// End-point loss `q_end ⊖ q̂` of one segment.
///
/// All samples from `seg.start` to the second to last are calibrated,
/// optionally denoised with window `n` (samples before index `n − 1` pass
/// through), and integrated from `q_start` with the actual timestamp steps,
/// so the estimate lands on the last timestamp. A tilt-only end reference
/// takes its yaw from the estimate; that substitution carries no gradient.
pub fn loss_segment<T: Scalar>(
    calib: &CalibNetParams<T>,
    denoise: Option<&DenoiseNetParams<T>>,
    seg: &Segment,
    n: usize,
) -> Result<T, TrainError> {
    let len = seg.len();
    if seg.timestamps.len() != len {
        return Err(TrainError::LengthMismatch {
            samples: len,
            timestamps: seg.timestamps.len(),
        });
    }
    if seg.start >= len {
        return Err(TrainError::BadStart { start: seg.start, len });
    }
    if let Some(k) = seg.timestamps[seg.start..].iter().position(|t| !t.is_finite()) {
        return Err(TrainError::NonFiniteTimestamp(seg.start + k));
    }
    let start = seg.start;
    let last = len - 1;
    let lift = |v: Vec3<f64>| v.map(T::from_f64);

    let rates: Vec<Vec3<T>> = match denoise {
        None => (start..last).map(|k| calib_forward(calib, lift(seg.samples[k]))).collect(),
        Some(p) => {
            if n < RECEPTIVE_FIELD {
                return Err(NetError::WindowTooShort {
                    len: n,
                    needed: RECEPTIVE_FIELD,
                }
                .into());
            }
            // first denoised index and the earliest calibrated sample it needs
            let k0 = start.max(n - 1);
            let lo = start.min(k0 + 1 - RECEPTIVE_FIELD);
            let cal: Vec<Vec3<T>> = (lo..last).map(|k| calib_forward(calib, lift(seg.samples[k]))).collect();
            let mut rates: Vec<Vec3<T>> = (start..last.min(k0)).map(|k| cal[k - lo]).collect();
            if k0 < last {
                let from = k0 + 1 - RECEPTIVE_FIELD - lo;
                let mut axes = Vec::with_capacity(3);
                for axis in 0..3 {
                    let column: Vec<T> = cal[from..].iter().map(|s| s[axis]).collect();
                    let out = denoise_sequence(p, &column, RECEPTIVE_FIELD)?;
                    axes.push(out);
                }
                let skip = RECEPTIVE_FIELD - 1;
                rates.extend((skip..axes[0].len()).map(|j| [axes[0][j], axes[1][j], axes[2][j]]));
            }
            rates
        }
    };

    let mut q: Quat<T> = seg.q_start.map(T::from_f64);
    for (i, w) in rates.into_iter().enumerate() {
        let k = start + i;
        let dt = seg.timestamps[k + 1] - seg.timestamps[k];
        q = integrate_step(q, w, T::from_f64(dt))?;
    }
    let reference = match seg.end_kind {
        ReferenceKind::Full => seg.q_end,
        ReferenceKind::TiltOnly => with_yaw_of(seg.q_end, q.values()),
    };
    Ok(quat_diff(reference.map(T::from_f64), q)?)
}

/// Mean loss over `segments` and its gradient with respect to `params`,
/// accumulated segment by segment in order. `loss` builds one segment loss
/// from tape leaves.
pub fn mean_loss_and_grad<F>(params: &[f64], segments: &[Segment], mut loss: F) -> Result<ValueGrad, TrainError>
where
    F: FnMut(&[Var], &Segment) -> Result<Var, TrainError>,
{
    if segments.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut total = ValueGrad {
        value: 0.0,
        grad: vec![0.0; params.len()],
    };
    for seg in segments {
        let r = value_and_grad(params, |p| loss(p, seg))?;
        total.value += r.value;
        for (g, d) in total.grad.iter_mut().zip(&r.grad) {
            *g += d;
        }
    }
    let scale = 1.0 / segments.len() as f64;
    total.value *= scale;
    total.grad.iter_mut().for_each(|g| *g *= scale);
    Ok(total)
}

/// Mean phase-one loss and gradient with respect to the 27 calibration
/// parameters (canonical order).
pub fn calib_loss_and_grad(calib: &CalibNetParams<f64>, segments: &[Segment]) -> Result<ValueGrad, TrainError> {
    mean_loss_and_grad(&calib.to_vec(), segments, |p, seg| {
        let c = CalibNetParams::from_slice(p)?;
        loss_segment(&c, None, seg, 1)
    })
}

/// Mean phase-two loss and gradient with respect to the 168 denoiser
/// parameters; the calibration enters as constants.
pub fn denoise_loss_and_grad(
    calib: &CalibNetParams<f64>,
    denoise: &DenoiseNetParams<f64>,
    segments: &[Segment],
    n: usize,
) -> Result<ValueGrad, TrainError> {
    let frozen = calib.map(Var::constant);
    mean_loss_and_grad(&denoise.to_vec(), segments, |p, seg| {
        let d = DenoiseNetParams::from_slice(p)?;
        loss_segment(&frozen, Some(&d), seg, n)
    })
}

/// Mean loss without gradients.
pub fn mean_loss(
    calib: &CalibNetParams<f64>,
    denoise: Option<&DenoiseNetParams<f64>>,
    segments: &[Segment],
    n: usize,
) -> Result<f64, TrainError> {
    if segments.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut total = 0.0;
    for seg in segments {
        total += loss_segment(calib, denoise, seg, n)?;
    }
    Ok(total / segments.len() as f64)
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamWState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One decoupled-weight-decay Adam step. Nothing is modified when any
/// gradient is non-finite; the error names its index.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamWState, lr: f64, wd: f64) -> Result<(), TrainError> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(TrainError::ShapeMismatch {
            params: params.len(),
            grads: grads.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient(format!("#{i}")));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (i, theta) in params.iter_mut().enumerate() {
        let g = grads[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        *theta -= lr * (m_hat / (v_hat.sqrt() + EPSILON) + wd * *theta);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Calibration,
    Denoiser,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Denoising window.
    pub n: usize,
    /// Segment length for fixed-length segmentation.
    pub m: usize,
    /// Seeds the denoiser initialization.
    pub seed: u64,
    pub phase: Phase,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr: 0.01,
            weight_decay: 0.0,
            n: 50,
            m: 400,
            seed: 0,
            phase: Phase::Calibration,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.n == 0 || self.n > self.m {
            return bad("need 1 ≤ N ≤ M");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be non-negative");
        }
        Ok(())
    }
}

/// Trained parameters with the per-epoch mean loss (before each step) and
/// the mean loss after the final step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<P> {
    pub params: P,
    pub trace: Vec<f64>,
    pub final_loss: f64,
}

/// Loss above this multiple of the first epoch's loss aborts training.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

fn run_loop(
    mut params: Vec<f64>,
    names: &[String],
    cfg: &TrainConfig,
    mut grad: impl FnMut(&[f64]) -> Result<ValueGrad, TrainError>,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    cfg.validate()?;
    let mut state = AdamWState::new(params.len());
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let r = grad(&params)?;
        let initial = trace.first().copied().unwrap_or(r.value);
        trace.push(r.value);
        if !r.value.is_finite() || r.value > DIVERGENCE_FACTOR * initial {
            return Err(TrainError::Divergence {
                epoch,
                loss: r.value,
                trace,
            });
        }
        progress(epoch, r.value);
        adamw_step(&mut params, &r.grad, &mut state, cfg.lr, cfg.weight_decay).map_err(|e| match e {
            TrainError::NonFiniteGradient(i) => {
                let index: usize = i.trim_start_matches('#').parse().unwrap_or(usize::MAX);
                TrainError::NonFiniteGradient(names.get(index).cloned().unwrap_or(i))
            }
            other => other,
        })?;
    }
    Ok((params, trace))
}

/// Phase one: fits the calibration subnet alone, integrating each segment
/// from its own start index.
pub fn train_calibration(
    segments: &[Segment],
    cfg: &TrainConfig,
    init: &CalibNetParams<f64>,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainOutcome<CalibNetParams<f64>>, TrainError> {
    if segments.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (params, trace) = run_loop(
        init.to_vec(),
        &CalibNetParams::<f64>::names(),
        cfg,
        |p| calib_loss_and_grad(&CalibNetParams::from_slice(p)?, segments),
        progress,
    )?;
    let params = CalibNetParams::from_slice(&params)?;
    let final_loss = mean_loss(&params, None, segments, 1)?;
    Ok(TrainOutcome {
        params,
        trace,
        final_loss,
    })
}

/// Phase two: fits the denoiser with window `cfg.n` behind a frozen
/// calibration subnet.
pub fn train_denoiser(
    calib: &CalibNetParams<f64>,
    segments: &[Segment],
    cfg: &TrainConfig,
    init: &DenoiseNetParams<f64>,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainOutcome<DenoiseNetParams<f64>>, TrainError> {
    if segments.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (params, trace) = run_loop(
        init.to_vec(),
        &DenoiseNetParams::<f64>::names(),
        cfg,
        |p| denoise_loss_and_grad(calib, &DenoiseNetParams::from_slice(p)?, segments, cfg.n),
        progress,
    )?;
    let params = DenoiseNetParams::from_slice(&params)?;
    let final_loss = mean_loss(calib, Some(&params), segments, cfg.n)?;
    Ok(TrainOutcome {
        params,
        trace,
        final_loss,
    })
}

/// `epoch,loss` CSV.
pub fn format_loss_trace(trace: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in trace.iter().enumerate() {
        writeln!(out, "{epoch},{loss}").expect("string write");
    }
    out
}

pub fn write_loss_trace(path: impl AsRef<Path>, trace: &[f64]) -> std::io::Result<()> {
    fs::write(path, format_loss_trace(trace))
}
