//! EuRoC MAV CSV layout.
//!
//! A sequence directory holds `mav0/imu0/data.csv` and
//! `mav0/state_groundtruth_estimate0/data.csv` (the `mav0/` level may be
//! omitted). Timestamps are integer nanoseconds; `#` lines are comments.

use std::fs;
use std::path::{Path, PathBuf};

use csv::StringRecord;

use super::{check_monotonic, checked_reference, DataError, GyroSequence, Reference, ReferenceKind};
use crate::Quatd;

const IMU_FILE: &str = "imu0/data.csv";
const TRUTH_FILE: &str = "state_groundtruth_estimate0/data.csv";

fn locate(dir: &Path, rel: &str) -> Result<PathBuf, DataError> {
    for base in [dir.join("mav0"), dir.to_path_buf()] {
        let p = base.join(rel);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(DataError::Missing(dir.join("mav0").join(rel)))
}

/// Paths of the IMU and ground-truth CSVs inside a sequence directory.
pub fn euroc_files(dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf), DataError> {
    let dir = dir.as_ref();
    Ok((locate(dir, IMU_FILE)?, locate(dir, TRUTH_FILE)?))
}

/// Converts integer nanoseconds without passing the full count through f64.
pub(crate) fn ns_to_seconds(ns: i64) -> f64 {
    let whole = ns.div_euclid(1_000_000_000);
    let frac = ns.rem_euclid(1_000_000_000);
    whole as f64 + frac as f64 * 1e-9
}

/// Data rows with their 1-based physical line numbers; `#` comment lines,
/// blank lines and a non-numeric header on line 1 are skipped.
pub(crate) fn read_rows(path: &Path) -> Result<Vec<(usize, StringRecord)>, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let record: StringRecord = line.split(',').map(str::trim).collect();
        if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        rows.push((i + 1, record));
    }
    if rows.is_empty() {
        return Err(DataError::Empty(path.to_path_buf()));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &StringRecord, i: usize) -> Result<T, DataError> {
    let raw = rec.get(i).ok_or_else(|| DataError::Malformed {
        path: path.to_path_buf(),
        row: line,
        message: format!("expected at least {} columns, found {}", i + 1, rec.len()),
    })?;
    raw.parse().map_err(|_| DataError::Malformed {
        path: path.to_path_buf(),
        row: line,
        message: format!("column {}: cannot parse {raw:?}", i + 1),
    })
}

/// Loads gyro rates (rad/s), accelerometer readings and ground-truth attitudes.
pub fn load_euroc(dir: impl AsRef<Path>) -> Result<GyroSequence, DataError> {
    let (imu_path, truth_path) = euroc_files(dir)?;

    let rows = read_rows(&imu_path)?;
    let mut seq = GyroSequence::default();
    let mut lines = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let ns: i64 = field(&imu_path, *line, rec, 0)?;
        let mut v = [0.0f64; 6];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = field(&imu_path, *line, rec, k + 1)?;
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(DataError::Malformed {
                path: imu_path.clone(),
                row: *line,
                message: "non-finite reading".into(),
            });
        }
        seq.timestamps.push(ns_to_seconds(ns));
        seq.samples.push([v[0], v[1], v[2]]);
        seq.accel.push(Some([v[3], v[4], v[5]]));
        lines.push(*line);
    }
    check_monotonic(&imu_path, &seq.timestamps, |k| lines[k])?;

    let rows = read_rows(&truth_path)?;
    let mut truth_t = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let ns: i64 = field(&truth_path, *line, rec, 0)?;
        let mut q = [0.0; 4];
        for (k, slot) in q.iter_mut().enumerate() {
            *slot = field(&truth_path, *line, rec, 4 + k)?;
        }
        let q = checked_reference(&truth_path, *line, Quatd::from_array(q))?;
        let t = ns_to_seconds(ns);
        truth_t.push(t);
        seq.references.push(Reference {
            t,
            q,
            kind: ReferenceKind::Full,
        });
    }
    let truth_lines: Vec<usize> = rows.iter().map(|(l, _)| *l).collect();
    check_monotonic(&truth_path, &truth_t, |k| truth_lines[k])?;
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_dataset(imu: &str, truth: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let imu_dir = dir.path().join("mav0/imu0");
        let gt_dir = dir.path().join("mav0/state_groundtruth_estimate0");
        fs::create_dir_all(&imu_dir).unwrap();
        fs::create_dir_all(&gt_dir).unwrap();
        fs::write(imu_dir.join("data.csv"), imu).unwrap();
        fs::write(gt_dir.join("data.csv"), truth).unwrap();
        dir
    }

    const IMU_HEADER: &str = "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n";
    const GT_HEADER: &str = "#timestamp, p_RS_R_x [m], p_RS_R_y [m], p_RS_R_z [m], q_RS_w [], q_RS_x [], q_RS_y [], q_RS_z []\n";

    #[test]
    fn field_mapping() {
        let imu = format!(
            "{IMU_HEADER}1403636579758555392,-0.1,0.2,0.03,9.0,0.1,-0.2\n1403636579763555584,0.0,0.0,0.0,9.0,0.1,-0.2\n"
        );
        let gt = format!("{GT_HEADER}1403636579758555392,1,2,3,1,0,0,0\n");
        let dir = write_dataset(&imu, &gt);
        let seq = load_euroc(dir.path()).unwrap();
        assert_eq!(seq.samples[0], [-0.1, 0.2, 0.03]);
        assert_eq!(seq.timestamps[0], 1403636579.0 + 0.758555392);
        assert!((seq.timestamps[0] - 1403636579.758555392).abs() < 1e-6);
        assert_eq!(seq.accel[0], Some([9.0, 0.1, -0.2]));
        assert_eq!(seq.references.len(), 1);
        assert_eq!(seq.references[0].q, Quatd::identity());
    }

    #[test]
    fn nanosecond_conversion_keeps_fraction() {
        assert_eq!(ns_to_seconds(1_500_000_000), 1.5);
        assert_eq!(ns_to_seconds(-500_000_000), -0.5);
        let a = ns_to_seconds(1403636579758555392);
        let b = ns_to_seconds(1403636579763555584);
        assert!(((b - a) - 0.005000192).abs() < 1e-6);
    }

    #[test]
    fn empty_and_missing() {
        let dir = write_dataset(IMU_HEADER, GT_HEADER);
        assert!(matches!(load_euroc(dir.path()), Err(DataError::Empty(_))));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_euroc(empty.path()), Err(DataError::Missing(_))));
    }

    #[test]
    fn malformed_row_reports_line() {
        let imu = format!("{IMU_HEADER}1,0,0,0,0,0,9.8\n2,0,abc,0,0,0,9.8\n");
        let gt = format!("{GT_HEADER}1,0,0,0,1,0,0,0\n");
        let dir = write_dataset(&imu, &gt);
        match load_euroc(dir.path()) {
            Err(DataError::Malformed { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotonic_rejected() {
        let imu = format!("{IMU_HEADER}2,0,0,0,0,0,9.8\n1,0,0,0,0,0,9.8\n");
        let gt = format!("{GT_HEADER}1,0,0,0,1,0,0,0\n");
        let dir = write_dataset(&imu, &gt);
        assert!(matches!(
            load_euroc(dir.path()),
            Err(DataError::NonMonotonic { row: 3, .. })
        ));
    }

    #[test]
    fn quaternion_norm_rule() {
        let imu = format!("{IMU_HEADER}1,0,0,0,0,0,9.8\n");
        let ok = format!("{GT_HEADER}1,0,0,0,1.0009,0,0,0\n");
        let dir = write_dataset(&imu, &ok);
        let seq = load_euroc(dir.path()).unwrap();
        assert!((seq.references[0].q.norm() - 1.0).abs() < 1e-15);

        let bad = format!("{GT_HEADER}1,0,0,0,1.002,0,0,0\n");
        let dir = write_dataset(&imu, &bad);
        let err = load_euroc(dir.path());
        assert!(matches!(err, Err(DataError::BadQuaternion { row: 2, .. })), "{err:?}");
    }
}
