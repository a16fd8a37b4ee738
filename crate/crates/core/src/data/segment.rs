//! Reference interpolation and segmentation into loss windows.

use super::{DataError, GyroSequence, Reference, ReferenceKind};
use crate::quat::{slerp, Vec3};
use crate::Quatd;

/// One loss window: raw samples, the attitude at in-segment index `start`
/// and the reference attitude at the last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub timestamps: Vec<f64>,
    pub samples: Vec<Vec3<f64>>,
    /// Index where `q_start` holds; integration runs from here to the end.
    pub start: usize,
    pub q_start: Quatd,
    pub q_end: Quatd,
    pub end_kind: ReferenceKind,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentDataset {
    pub segments: Vec<Segment>,
    /// Dropped segments and remainders, one message each.
    pub issues: Vec<String>,
}

impl SegmentDataset {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn extend(&mut self, other: SegmentDataset) {
        self.segments.extend(other.segments);
        self.issues.extend(other.issues);
    }
}

fn interpolate(refs: &[Reference], t: f64) -> Result<(Quatd, ReferenceKind), DataError> {
    let (first, last) = match (refs.first(), refs.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(DataError::NoReferences),
    };
    if !(t >= first && t <= last) {
        return Err(DataError::Extrapolation { t, first, last });
    }
    let hi = refs.partition_point(|r| r.t < t);
    let b = refs[hi];
    if b.t == t {
        return Ok((b.q, b.kind));
    }
    let a = refs[hi - 1];
    let kind = if a.kind == ReferenceKind::Full && b.kind == ReferenceKind::Full {
        ReferenceKind::Full
    } else {
        ReferenceKind::TiltOnly
    };
    let frac = (t - a.t) / (b.t - a.t);
    Ok((slerp(a.q, b.q, frac), kind))
}

/// Slerps the reference attitudes onto `targets`.
pub fn align_reference(seq: &GyroSequence, targets: &[f64]) -> Result<Vec<Quatd>, DataError> {
    targets.iter().map(|&t| interpolate(&seq.references, t).map(|(q, _)| q)).collect()
}

/// Distance from `t` to the nearest reference timestamp.
fn nearest_reference_gap(refs: &[Reference], t: f64) -> f64 {
    let i = refs.partition_point(|r| r.t < t);
    let after = refs.get(i).map_or(f64::INFINITY, |r| r.t - t);
    let before = if i > 0 { t - refs[i - 1].t } else { f64::INFINITY };
    after.min(before)
}

fn check_window(m: usize, n: usize) -> Result<(), DataError> {
    if m == 0 || n == 0 || n > m {
        return Err(DataError::InvalidSegmentation(format!(
            "need 1 ≤ N ≤ M, got N={n}, M={m}"
        )));
    }
    Ok(())
}

/// Consecutive non-overlapping windows of `m` samples. `q_start` is the
/// reference at in-segment index `n − 1` and `q_end` at index `m − 1`; both
/// must have a reference within half a sample period. Windows without that
/// coverage and the trailing remainder are dropped and reported in `issues`.
pub fn segment(seq: &GyroSequence, m: usize, n: usize) -> Result<SegmentDataset, DataError> {
    check_window(m, n)?;
    seq.validate().map_err(DataError::InvalidSegmentation)?;
    if seq.references.is_empty() {
        return Err(DataError::NoReferences);
    }
    let mut out = SegmentDataset::default();
    let count = seq.len() / m;
    let remainder = seq.len() - count * m;
    if count == 0 {
        out.issues.push(format!("sequence of {} samples is shorter than M={m}", seq.len()));
        return Ok(out);
    }
    let tolerance = 0.5 * seq.mean_period();
    for j in 0..count {
        let base = j * m;
        let (i_start, i_end) = (base + n - 1, base + m - 1);
        let boundary = |i: usize| -> Result<(Quatd, ReferenceKind), String> {
            let t = seq.timestamps[i];
            let gap = nearest_reference_gap(&seq.references, t);
            if gap > tolerance {
                return Err(format!("segment {j}: no reference within {tolerance:.3e} s of t={t}"));
            }
            interpolate(&seq.references, t).map_err(|e| format!("segment {j}: {e}"))
        };
        let (start, end) = match (boundary(i_start), boundary(i_end)) {
            (Ok(s), Ok(e)) => (s, e),
            (Err(msg), _) | (_, Err(msg)) => {
                out.issues.push(msg);
                continue;
            }
        };
        out.segments.push(Segment {
            timestamps: seq.timestamps[base..base + m].to_vec(),
            samples: seq.samples[base..base + m].to_vec(),
            start: n - 1,
            q_start: start.0,
            q_end: end.0,
            end_kind: end.1,
        });
    }
    if remainder > 0 {
        out.issues.push(format!("dropped {remainder} trailing samples"));
    }
    Ok(out)
}

/// One segment per consecutive pair of references, for recordings whose
/// references are sparse (static endpoints). Each segment carries `n − 1`
/// samples of history before the first reference so that the reference sits
/// at in-segment index `n − 1`; it ends at the sample of the second reference.
pub fn segment_between_references(seq: &GyroSequence, n: usize) -> Result<SegmentDataset, DataError> {
    if n == 0 {
        return Err(DataError::InvalidSegmentation("N must be at least 1".into()));
    }
    seq.validate().map_err(DataError::InvalidSegmentation)?;
    if seq.references.is_empty() {
        return Err(DataError::NoReferences);
    }
    let mut out = SegmentDataset::default();
    let tolerance = 0.5 * seq.mean_period();
    let mut anchored: Vec<(usize, Reference)> = Vec::new();
    for r in &seq.references {
        let i = seq.timestamps.partition_point(|&t| t < r.t);
        let candidates = [i.checked_sub(1), Some(i).filter(|&i| i < seq.len())];
        let nearest = candidates
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (seq.timestamps[a] - r.t).abs().total_cmp(&(seq.timestamps[b] - r.t).abs()));
        match nearest {
            Some(k) if (seq.timestamps[k] - r.t).abs() <= tolerance => anchored.push((k, *r)),
            _ => out.issues.push(format!("reference at t={} matches no sample", r.t)),
        }
    }
    for pair in anchored.windows(2) {
        let ((ia, ra), (ib, rb)) = (pair[0], pair[1]);
        if ib <= ia {
            out.issues.push(format!("references at t={} and t={} share a sample", ra.t, rb.t));
            continue;
        }
        if ia + 1 < n {
            out.issues.push(format!(
                "reference at t={} has {} samples of history, {} needed",
                ra.t,
                ia,
                n - 1
            ));
            continue;
        }
        let from = ia + 1 - n;
        out.segments.push(Segment {
            timestamps: seq.timestamps[from..=ib].to_vec(),
            samples: seq.samples[from..=ib].to_vec(),
            start: n - 1,
            q_start: ra.q,
            q_end: rb.q,
            end_kind: rb.kind,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{quat_diff, quat_from_rotvec};
    use std::f64::consts::FRAC_PI_4;

    fn dense(len: usize, rate: f64) -> GyroSequence {
        let timestamps: Vec<f64> = (0..len).map(|k| k as f64 / rate).collect();
        let references = timestamps
            .iter()
            .map(|&t| Reference {
                t,
                q: quat_from_rotvec([0.0, 0.0, 0.01 * t]),
                kind: ReferenceKind::Full,
            })
            .collect();
        GyroSequence {
            samples: vec![[0.0; 3]; len],
            timestamps,
            accel: vec![],
            references,
        }
    }

    #[test]
    fn segment_counts_and_remainder() {
        let ds = segment(&dense(2000, 200.0), 400, 50).unwrap();
        assert_eq!(ds.len(), 5);
        assert!(ds.issues.is_empty());
        let ds = segment(&dense(399, 200.0), 400, 50).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.issues.len(), 1);
        let ds = segment(&dense(1000, 200.0), 400, 1).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.issues, vec!["dropped 200 trailing samples".to_string()]);
    }

    #[test]
    fn start_index_and_boundaries() {
        let seq = dense(800, 200.0);
        let ds = segment(&seq, 400, 50).unwrap();
        let s = &ds.segments[1];
        assert_eq!(s.start, 49);
        assert_eq!(s.timestamps[0], seq.timestamps[400]);
        assert_eq!(s.q_start, seq.references[449].q);
        assert_eq!(s.q_end, seq.references[799].q);
        // windows tile without overlap or gaps
        let joined: Vec<f64> = ds.segments.iter().flat_map(|s| s.timestamps.clone()).collect();
        assert_eq!(joined, seq.timestamps);
    }

    #[test]
    fn coverage_gaps_reported() {
        let mut seq = dense(800, 200.0);
        seq.references.retain(|r| r.t < 2.0);
        let ds = segment(&seq, 400, 1).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.issues.len(), 1);
        assert!(ds.issues[0].starts_with("segment 1"));
        seq.references.clear();
        assert!(matches!(segment(&seq, 400, 1), Err(DataError::NoReferences)));
        assert!(segment(&seq, 10, 11).is_err());
    }

    fn two_refs(a: Quatd, b: Quatd) -> GyroSequence {
        GyroSequence {
            timestamps: vec![0.0, 1.0, 2.0],
            samples: vec![[0.0; 3]; 3],
            accel: vec![],
            references: vec![
                Reference {
                    t: 0.0,
                    q: a,
                    kind: ReferenceKind::Full,
                },
                Reference {
                    t: 2.0,
                    q: b,
                    kind: ReferenceKind::Full,
                },
            ],
        }
    }

    #[test]
    fn align_examples() {
        let qz = quat_from_rotvec([0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        let seq = two_refs(Quatd::identity(), qz);
        let out = align_reference(&seq, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(out[0], Quatd::identity());
        assert_eq!(out[2], qz);
        let half = quat_from_rotvec([0.0, 0.0, FRAC_PI_4]);
        assert!(quat_diff(out[1], half).unwrap() < 1e-9);
        assert!((out[1].norm() - 1.0).abs() < 1e-9);
        assert!(matches!(
            align_reference(&seq, &[2.5]),
            Err(DataError::Extrapolation { .. })
        ));

        let q = quat_from_rotvec([0.3, -0.2, 0.1]);
        let seq = two_refs(q, -q);
        for t in [0.25, 0.5, 1.0, 1.75] {
            let r = align_reference(&seq, &[t]).unwrap()[0];
            assert!(quat_diff(r, q).unwrap() < 1e-12);
        }
    }

    #[test]
    fn align_is_continuous() {
        let seq = two_refs(quat_from_rotvec([0.1, 0.2, 0.3]), quat_from_rotvec([-0.5, 0.4, 1.2]));
        let mut prev = align_reference(&seq, &[0.0]).unwrap()[0];
        for k in 1..=2000 {
            let q = align_reference(&seq, &[k as f64 * 1e-3]).unwrap()[0];
            assert!(quat_diff(q, prev).unwrap() < 2e-3);
            assert!((q.norm() - 1.0).abs() < 1e-9);
            prev = q;
        }
    }

    #[test]
    fn between_references() {
        let len = 1000;
        let mut seq = dense(len, 200.0);
        let q1 = quat_from_rotvec([0.1, 0.0, 0.0]);
        let q2 = quat_from_rotvec([0.0, 0.2, 0.0]);
        seq.references = vec![
            Reference {
                t: seq.timestamps[100],
                q: q1,
                kind: ReferenceKind::Full,
            },
            Reference {
                t: seq.timestamps[900] + 1e-4,
                q: q2,
                kind: ReferenceKind::TiltOnly,
            },
        ];
        let ds = segment_between_references(&seq, 50).unwrap();
        assert_eq!(ds.len(), 1);
        let s = &ds.segments[0];
        assert_eq!(s.len(), 900 - 100 + 50);
        assert_eq!(s.start, 49);
        assert_eq!(s.timestamps[49], seq.timestamps[100]);
        assert_eq!(*s.timestamps.last().unwrap(), seq.timestamps[900]);
        assert_eq!((s.q_start, s.q_end, s.end_kind), (q1, q2, ReferenceKind::TiltOnly));

        let ds = segment_between_references(&seq, 200).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.issues.len(), 1);
    }
}
