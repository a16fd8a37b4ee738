//! Turntable log CSV: `t_s,gx,gy,gz[,ax,ay,az][,ref_qw,ref_qx,ref_qy,ref_qz]`.
//!
//! Reference columns are filled only on rows that carry a reference; other
//! rows leave them empty. The same holds for the accelerometer columns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{check_monotonic, checked_reference, DataError, GyroSequence, Reference, ReferenceKind};
use crate::quat::{quat_from_gravity, Vec3};
use crate::Quatd;

const GYRO_COLS: [&str; 4] = ["t_s", "gx", "gy", "gz"];
const ACCEL_COLS: [&str; 3] = ["ax", "ay", "az"];
const REF_COLS: [&str; 4] = ["ref_qw", "ref_qx", "ref_qy", "ref_qz"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// When the log has accelerometer columns but no reference columns, attach
    /// a tilt-only reference at the midpoint of every static run.
    pub synthesize_gravity_refs: bool,
    /// Raw rate norm (rad/s) below which a row counts as static.
    pub static_rate_threshold: f64,
    /// Shortest static run that yields a reference.
    pub min_static_samples: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            synthesize_gravity_refs: false,
            static_rate_threshold: 0.1,
            min_static_samples: 20,
        }
    }
}

struct Layout {
    accel: Option<usize>,
    reference: Option<usize>,
}

fn layout(path: &Path, header: &StringRecord) -> Result<Layout, DataError> {
    let names: Vec<&str> = header.iter().collect();
    let bad = |message: String| DataError::Malformed {
        path: path.to_path_buf(),
        row: 1,
        message,
    };
    if names.len() < 4 || names[..4] != GYRO_COLS {
        return Err(bad(format!("header must start with t_s,gx,gy,gz, found {names:?}")));
    }
    let group = |cols: &[&str]| -> Result<Option<usize>, DataError> {
        match names.iter().position(|n| *n == cols[0]) {
            None => Ok(None),
            Some(at) if names.get(at..at + cols.len()) == Some(cols) => Ok(Some(at)),
            Some(_) => Err(bad(format!("columns {cols:?} must appear together and in order"))),
        }
    };
    let accel = group(&ACCEL_COLS)?;
    let reference = group(&REF_COLS)?;
    let expected = 4 + accel.map_or(0, |_| 3) + reference.map_or(0, |_| 4);
    if names.len() != expected {
        return Err(bad(format!("unexpected columns in header {names:?}")));
    }
    Ok(Layout { accel, reference })
}

/// Parses an all-or-nothing group of numeric columns.
fn optional_group<const K: usize>(path: &Path, line: usize, rec: &StringRecord, at: usize) -> Result<Option<[f64; K]>, DataError> {
    let fields: Vec<&str> = (at..at + K).map(|i| rec.get(i).unwrap_or("")).collect();
    if fields.iter().all(|f| f.is_empty()) {
        return Ok(None);
    }
    let mut out = [0.0; K];
    for (k, f) in fields.iter().enumerate() {
        out[k] = parse_finite(path, line, f, at + k)?;
    }
    Ok(Some(out))
}

fn parse_finite(path: &Path, line: usize, raw: &str, col: usize) -> Result<f64, DataError> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::Malformed {
            path: path.to_path_buf(),
            row: line,
            message: format!("column {}: cannot parse {raw:?} as a finite number", col + 1),
        }),
    }
}

pub fn load_turntable_log(path: impl AsRef<Path>, opts: LoadOptions) -> Result<GyroSequence, DataError> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| {
        let row = e.position().map_or(0, |p| p.line() as usize);
        match e.into_kind() {
            csv::ErrorKind::Io(source) => DataError::Io {
                path: path.to_path_buf(),
                source,
            },
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => DataError::Malformed {
                path: path.to_path_buf(),
                row,
                message: format!("expected {expected_len} fields, found {len}"),
            },
            other => DataError::Malformed {
                path: path.to_path_buf(),
                row,
                message: format!("{other:?}"),
            },
        }
    };
    if !path.is_file() {
        return Err(DataError::Missing(path.to_path_buf()));
    }
    let mut reader = ReaderBuilder::new().trim(Trim::All).from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let layout = layout(path, &header)?;

    let mut seq = GyroSequence::default();
    let mut lines = Vec::new();
    for record in reader.records() {
        let rec = record.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = parse_finite(path, line, rec.get(k).unwrap_or(""), k)?;
        }
        seq.timestamps.push(v[0]);
        seq.samples.push([v[1], v[2], v[3]]);
        if let Some(at) = layout.accel {
            seq.accel.push(optional_group::<3>(path, line, &rec, at)?);
        }
        if let Some(at) = layout.reference {
            if let Some(q) = optional_group::<4>(path, line, &rec, at)? {
                let q = checked_reference(path, line, Quatd::from_array(q))?;
                seq.references.push(Reference {
                    t: v[0],
                    q,
                    kind: ReferenceKind::Full,
                });
            }
        }
        lines.push(line);
    }
    if seq.is_empty() {
        return Err(DataError::Empty(path.to_path_buf()));
    }
    check_monotonic(path, &seq.timestamps, |k| lines[k])?;

    if opts.synthesize_gravity_refs && layout.reference.is_none() && layout.accel.is_some() {
        seq.references = gravity_references(&seq, &opts);
    }
    Ok(seq)
}

/// Tilt-only references at the midpoints of static runs. A row is static
/// when its raw rate norm is below the threshold and its accelerometer
/// reading is present and within the quasi-static band.
pub fn gravity_references(seq: &GyroSequence, opts: &LoadOptions) -> Vec<Reference> {
    let is_static = |k: usize| {
        let w = seq.samples[k];
        let rate = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        rate < opts.static_rate_threshold && matches!(seq.accel.get(k), Some(Some(a)) if quat_from_gravity(*a).is_ok())
    };
    let mut refs = Vec::new();
    let mut k = 0;
    while k < seq.len() {
        if !is_static(k) {
            k += 1;
            continue;
        }
        let start = k;
        while k < seq.len() && is_static(k) {
            k += 1;
        }
        if k - start < opts.min_static_samples.max(1) {
            continue;
        }
        let mut mean: Vec3<f64> = [0.0; 3];
        for a in seq.accel[start..k].iter().flatten() {
            for (m, c) in mean.iter_mut().zip(a) {
                *m += c;
            }
        }
        let n = (k - start) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        if let Ok(q) = quat_from_gravity(mean) {
            refs.push(Reference {
                t: seq.timestamps[(start + k - 1) / 2],
                q,
                kind: ReferenceKind::TiltOnly,
            });
        }
    }
    refs
}

/// Serializes a sequence in the turntable schema.
///
/// Numbers use the shortest representation that parses back to the same
/// bits, so a load/write cycle reproduces every consumed value exactly.
/// Tilt-only references are derived data and are not written; full
/// references must sit on sample timestamps.
pub fn format_turntable_log(seq: &GyroSequence) -> Result<String, DataError> {
    seq.validate().map_err(DataError::InvalidSegmentation)?;
    let with_accel = seq.accel.iter().any(Option::is_some);
    let full: Vec<&Reference> = seq.references.iter().filter(|r| r.kind == ReferenceKind::Full).collect();
    let with_refs = !full.is_empty();

    let mut header: Vec<&str> = GYRO_COLS.to_vec();
    if with_accel {
        header.extend(ACCEL_COLS);
    }
    if with_refs {
        header.extend(REF_COLS);
    }
    let mut out = header.join(",");
    out.push('\n');

    let mut next_ref = full.iter().peekable();
    for (k, (&t, w)) in seq.timestamps.iter().zip(&seq.samples).enumerate() {
        write!(out, "{t},{},{},{}", w[0], w[1], w[2]).expect("string write");
        if with_accel {
            match seq.accel.get(k).copied().flatten() {
                Some(a) => write!(out, ",{},{},{}", a[0], a[1], a[2]).expect("string write"),
                None => out.push_str(",,,"),
            }
        }
        if with_refs {
            match next_ref.peek() {
                Some(r) if r.t.to_bits() == t.to_bits() => {
                    let q = r.q;
                    write!(out, ",{},{},{},{}", q.w, q.x, q.y, q.z).expect("string write");
                    next_ref.next();
                }
                _ => out.push_str(",,,,"),
            }
        }
        out.push('\n');
    }
    if let Some(r) = next_ref.next() {
        return Err(DataError::InvalidSegmentation(format!(
            "reference at t={} does not coincide with a sample timestamp",
            r.t
        )));
    }
    Ok(out)
}

pub fn write_turntable_log(path: impl AsRef<Path>, seq: &GyroSequence) -> Result<(), DataError> {
    let path = path.as_ref();
    let text = format_turntable_log(seq)?;
    fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::quat_from_euler;
    use proptest::prelude::*;

    fn load_str(text: &str, opts: LoadOptions) -> Result<GyroSequence, DataError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        fs::write(&p, text).unwrap();
        load_turntable_log(&p, opts)
    }

    #[test]
    fn reference_rows_attach() {
        let text = "t_s,gx,gy,gz,ref_qw,ref_qx,ref_qy,ref_qz\n0,0.1,0.2,0.3,1,0,0,0\n0.005,0,0,0,,,,\n0.01,0,0,0,0,0,0,1\n";
        let seq = load_str(text, LoadOptions::default()).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.samples[0], [0.1, 0.2, 0.3]);
        assert_eq!(seq.references.len(), 2);
        assert_eq!(seq.references[1].t, 0.01);
        assert_eq!(seq.references[1].q, Quatd::new(0.0, 0.0, 0.0, 1.0));
        assert!(seq.accel.is_empty());
    }

    #[test]
    fn crlf_accepted() {
        let text = "t_s,gx,gy,gz\r\n0,1,2,3\r\n1,4,5,6\r\n";
        let seq = load_str(text, LoadOptions::default()).unwrap();
        assert_eq!(seq.samples, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    }

    #[test]
    fn errors() {
        let opts = LoadOptions::default();
        assert!(matches!(load_str("t_s,gx,gy,gz\n", opts), Err(DataError::Empty(_))));
        assert!(matches!(
            load_str("t_s,gx,gy,gz\n0,1,2,3\n0,1,2,3\n", opts),
            Err(DataError::NonMonotonic { row: 3, .. })
        ));
        assert!(matches!(
            load_str("t_s,gx,gy,gz\n0,1,x,3\n", opts),
            Err(DataError::Malformed { row: 2, .. })
        ));
        assert!(matches!(
            load_str("t_s,gx,gy,gz\n0,1,2\n", opts),
            Err(DataError::Malformed { row: 2, .. })
        ));
        assert!(matches!(
            load_str("time,gx,gy,gz\n0,1,2,3\n", opts),
            Err(DataError::Malformed { row: 1, .. })
        ));
        assert!(matches!(
            load_str("t_s,gx,gy,gz,ref_qw,ref_qx,ref_qy,ref_qz\n0,0,0,0,1,0,0,\n", opts),
            Err(DataError::Malformed { row: 2, .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_turntable_log(dir.path().join("absent.csv"), opts),
            Err(DataError::Missing(_))
        ));
    }

    fn static_run_log(q: Quatd) -> String {
        let g = q.conjugate().rotate([0.0, 0.0, -crate::quat::GRAVITY]);
        let mut s = String::from("t_s,gx,gy,gz,ax,ay,az\n");
        for k in 0..200 {
            let t = k as f64 * 0.005;
            let moving = (60..140).contains(&k);
            let w = if moving { 1.0 } else { 0.001 };
            if moving {
                writeln!(s, "{t},{w},0,0,,,").unwrap();
            } else {
                writeln!(s, "{t},{w},0,0,{},{},{}", g[0], g[1], g[2]).unwrap();
            }
        }
        s
    }

    #[test]
    fn gravity_references_are_tilt_only() {
        let q = quat_from_euler(0.2, -0.1, 0.0);
        let text = static_run_log(q);
        let plain = load_str(&text, LoadOptions::default()).unwrap();
        assert!(plain.references.is_empty());
        let seq = load_str(
            &text,
            LoadOptions {
                synthesize_gravity_refs: true,
                ..LoadOptions::default()
            },
        )
        .unwrap();
        assert_eq!(seq.references.len(), 2);
        for r in &seq.references {
            assert_eq!(r.kind, ReferenceKind::TiltOnly);
            assert!(crate::quat::quat_diff(r.q, q).unwrap() < 1e-12);
        }
        assert_eq!(seq.references[0].t, seq.timestamps[29]);
        assert_eq!(seq.references[1].t, seq.timestamps[169]);
    }

    #[test]
    fn off_grid_reference_refused_on_write() {
        let seq = GyroSequence {
            timestamps: vec![0.0, 1.0],
            samples: vec![[0.0; 3]; 2],
            accel: vec![],
            references: vec![Reference {
                t: 0.5,
                q: Quatd::identity(),
                kind: ReferenceKind::Full,
            }],
        };
        assert!(format_turntable_log(&seq).is_err());
    }

    proptest! {
        #[test]
        fn load_write_load_is_bit_exact(
            rows in proptest::collection::vec((0.0001f64..0.02, proptest::array::uniform3(-40.0f64..40.0), proptest::option::of(proptest::array::uniform3(-20.0f64..20.0)), any::<bool>()), 1..40),
            axis in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            let mut text = String::from("t_s,gx,gy,gz,ax,ay,az,ref_qw,ref_qx,ref_qy,ref_qz\n");
            let q = crate::quat::quat_from_rotvec(axis);
            let mut t = 1000.0 / 3.0;
            for (dt, w, a, has_ref) in &rows {
                t += dt;
                write!(text, "{t},{},{},{}", w[0], w[1], w[2]).unwrap();
                match a {
                    Some(a) => write!(text, ",{},{},{}", a[0], a[1], a[2]).unwrap(),
                    None => text.push_str(",,,"),
                }
                if *has_ref {
                    write!(text, ",{},{},{},{}", q.w, q.x, q.y, q.z).unwrap();
                } else {
                    text.push_str(",,,,");
                }
                text.push('\n');
            }
            let first = load_str(&text, LoadOptions::default()).unwrap();
            let rewritten = format_turntable_log(&first).unwrap();
            let second = load_str(&rewritten, LoadOptions::default()).unwrap();
            let bits = |s: &GyroSequence| {
                let mut v: Vec<u64> = Vec::new();
                for (k, t) in s.timestamps.iter().enumerate() {
                    v.push(t.to_bits());
                    v.extend(s.samples[k].iter().map(|c| c.to_bits()));
                    if let Some(a) = s.accel.get(k).copied().flatten() {
                        v.extend(a.iter().map(|c| c.to_bits()));
                    }
                }
                for r in &s.references {
                    v.push(r.t.to_bits());
                    v.extend(r.q.to_array().iter().map(|c| c.to_bits()));
                }
                v
            };
            prop_assert_eq!(bits(&first), bits(&second));
            let present = |s: &GyroSequence| (0..s.len()).map(|k| s.accel.get(k).copied().flatten().is_some()).collect::<Vec<_>>();
            prop_assert_eq!(present(&first), present(&second));
            if rows.iter().all(|r| r.2.is_some()) && rows.iter().any(|r| r.3) {
                prop_assert_eq!(rewritten, text);
            }
        }
    }
}
