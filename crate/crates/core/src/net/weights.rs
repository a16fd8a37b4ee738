//! Binary weight container for deployment.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "TGCN"            4 bytes magic
//! version           u16
//! calib count       u32, always 27
//! calib values      count × f32
//! denoise count     u32, 168 or 0 when no denoiser is present
//! denoise values    count × f32
//! ```
//!
//! Values follow the canonical orders of [`CalibNetParams::to_vec`] and
//! [`DenoiseNetParams::to_vec`].

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{CalibNetParams, DenoiseNetParams};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"TGCN";
pub const FORMAT_VERSION: u16 = 1;
/// Magic plus version.
pub const HEADER_LEN: usize = 6;
/// One u32 count per section.
pub const FRAMING_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum WeightFormatError {
    #[error("bad magic {0:?}, expected \"TGCN\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("truncated payload: needed {needed} bytes, found {available}")]
    Truncated { needed: usize, available: usize },
    #[error("non-finite value in {section} at index {index}")]
    NonFinite { section: &'static str, index: usize },
    #[error("{section} section holds {found} values, expected {expected}")]
    CountMismatch {
        section: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Calibration weights and optional denoiser weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<T> {
    pub calib: CalibNetParams<T>,
    pub denoise: Option<DenoiseNetParams<T>>,
}

impl<T: Scalar> WeightSet<T> {
    pub fn cast<U: Scalar>(&self) -> WeightSet<U> {
        WeightSet {
            calib: self.calib.map(|c| U::from_f64(c.value())),
            denoise: self.denoise.as_ref().map(|d| d.map(|c| U::from_f64(c.value()))),
        }
    }
}

fn check_finite(section: &'static str, values: &[f32]) -> Result<(), WeightFormatError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(WeightFormatError::NonFinite { section, index }),
        None => Ok(()),
    }
}

/// Serializes 32-bit weights.
pub fn write_weights(set: &WeightSet<f32>) -> Result<Vec<u8>, WeightFormatError> {
    let calib = set.calib.to_vec();
    let denoise = set.denoise.as_ref().map(|d| d.to_vec()).unwrap_or_default();
    check_finite("calib", &calib)?;
    check_finite("denoise", &denoise)?;
    let mut out = Vec::with_capacity(HEADER_LEN + FRAMING_LEN + 4 * (calib.len() + denoise.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for section in [&calib, &denoise] {
        out.extend_from_slice(&(section.len() as u32).to_le_bytes());
        for v in section.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightFormatError> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(WeightFormatError::Truncated {
                needed: end,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightFormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn section(&mut self, section: &'static str) -> Result<Vec<f32>, WeightFormatError> {
        let count = self.u32()? as usize;
        let raw = self.take(count.checked_mul(4).ok_or(WeightFormatError::Truncated {
            needed: usize::MAX,
            available: self.bytes.len(),
        })?)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        check_finite(section, &values)?;
        Ok(values)
    }
}

pub fn read_weights(bytes: &[u8]) -> Result<WeightSet<f32>, WeightFormatError> {
    let mut r = Reader { bytes, at: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(WeightFormatError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
    if version != FORMAT_VERSION {
        return Err(WeightFormatError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let calib = r.section("calib")?;
    let calib = CalibNetParams::from_slice(&calib).map_err(|_| WeightFormatError::CountMismatch {
        section: "calib",
        expected: CalibNetParams::<f32>::COUNT,
        found: calib.len(),
    })?;
    let denoise = r.section("denoise")?;
    let denoise = match denoise.len() {
        0 => None,
        n => Some(
            DenoiseNetParams::from_slice(&denoise).map_err(|_| WeightFormatError::CountMismatch {
                section: "denoise",
                expected: DenoiseNetParams::<f32>::COUNT,
                found: n,
            })?,
        ),
    };
    if r.at != bytes.len() {
        return Err(WeightFormatError::TrailingBytes(bytes.len() - r.at));
    }
    Ok(WeightSet { calib, denoise })
}

/// Rounds to 32-bit and writes the container to `path`.
pub fn export_weights<T: Scalar>(set: &WeightSet<T>, path: impl AsRef<Path>) -> Result<(), WeightFormatError> {
    let bytes = write_weights(&set.cast::<f32>())?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn import_weights(path: impl AsRef<Path>) -> Result<WeightSet<f32>, WeightFormatError> {
    read_weights(&fs::read(path)?)
}
