//! Recording ingestion (EuRoC CSV, turntable logs), reference alignment and
//! segmentation into loss windows.

mod euroc;
mod segment;
mod turntable;

use std::path::PathBuf;

use thiserror::Error;

use crate::quat::{QuatError, Vec3};
use crate::Quatd;

pub use euroc::{euroc_files, load_euroc};
pub use segment::{align_reference, segment, segment_between_references, Segment, SegmentDataset};
pub use turntable::{format_turntable_log, gravity_references, load_turntable_log, write_turntable_log, LoadOptions};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file {0}")]
    Missing(PathBuf),
    #[error("{path}: row {row}: {message}")]
    Malformed { path: PathBuf, row: usize, message: String },
    #[error("{0}: no data rows")]
    Empty(PathBuf),
    #[error("{path}: row {row}: timestamp {t} does not increase")]
    NonMonotonic { path: PathBuf, row: usize, t: f64 },
    #[error("{path}: row {row}: reference quaternion norm {norm} outside 1 ± 1e-3")]
    BadQuaternion { path: PathBuf, row: usize, norm: f64 },
    #[error("target time {t} outside reference span [{first}, {last}]")]
    Extrapolation { t: f64, first: f64, last: f64 },
    #[error("sequence carries no reference attitudes")]
    NoReferences,
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error(transparent)]
    Quat(#[from] QuatError),
}

/// How much of a reference attitude is trustworthy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Full 3-D attitude (motion capture, turntable zero position, simulator).
    Full,
    /// Roll and pitch from gravity; yaw is arbitrary.
    TiltOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub t: f64,
    pub q: Quatd,
    pub kind: ReferenceKind,
}

/// Timestamped raw angular-rate samples with sparse reference attitudes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GyroSequence {
    /// Seconds, strictly increasing.
    pub timestamps: Vec<f64>,
    /// Raw readings, one per timestamp.
    pub samples: Vec<Vec3<f64>>,
    /// Specific force in m/s² where recorded; same length as `samples` or empty.
    pub accel: Vec<Option<Vec3<f64>>>,
    /// Sorted by time.
    pub references: Vec<Reference>,
}

impl GyroSequence {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.samples.len() != self.timestamps.len() {
            return Err(format!(
                "{} samples but {} timestamps",
                self.samples.len(),
                self.timestamps.len()
            ));
        }
        if !self.accel.is_empty() && self.accel.len() != self.samples.len() {
            return Err("accelerometer column length mismatch".into());
        }
        if let Some(k) = self.timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(format!("timestamp {} does not increase", k + 1));
        }
        if self.references.windows(2).any(|w| w[1].t < w[0].t) {
            return Err("references are not sorted".into());
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Mean sampling interval.
    pub fn mean_period(&self) -> f64 {
        if self.len() < 2 {
            0.0
        } else {
            self.duration() / (self.len() - 1) as f64
        }
    }
}

fn check_monotonic(path: &std::path::Path, timestamps: &[f64], row_of: impl Fn(usize) -> usize) -> Result<(), DataError> {
    if let Some(k) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(DataError::NonMonotonic {
            path: path.to_path_buf(),
            row: row_of(k + 1),
            t: timestamps[k + 1],
        });
    }
    Ok(())
}

/// Accepts quaternions within 1e-3 of unit norm. Those further than 1e-12
/// from unit are renormalized; the rest are kept bit-for-bit.
fn checked_reference(path: &std::path::Path, row: usize, q: Quatd) -> Result<Quatd, DataError> {
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-3 {
        return Err(DataError::BadQuaternion {
            path: path.to_path_buf(),
            row,
            norm,
        });
    }
    if (norm - 1.0).abs() <= 1e-12 {
        return Ok(q);
    }
    Ok(q.normalize()?)
}
