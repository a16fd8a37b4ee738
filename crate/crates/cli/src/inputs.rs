//! Input discovery and the truth sidecar format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gyrocal::data::{euroc_files, load_euroc, load_turntable_log, GyroSequence, LoadOptions, Reference, ReferenceKind};
use gyrocal::sim::TruthTrajectory;
use gyrocal::Quatd;

use crate::config::enum_setting;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Turntable,
    Euroc,
}
enum_setting!(Format);

pub struct Recording {
    pub path: PathBuf,
    pub seq: GyroSequence,
}

/// Turntable paths may be log files or directories of `*.csv` logs (read in
/// name order, not recursively); EuRoC paths are sequence directories.
/// Every file read is appended to `files`.
pub fn load_recordings(
    paths: &[PathBuf],
    format: Format,
    opts: LoadOptions,
    files: &mut Vec<PathBuf>,
) -> Result<Vec<Recording>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        match format {
            Format::Euroc => {
                let (imu, truth) = euroc_files(p)?;
                files.push(imu);
                files.push(truth);
                out.push(Recording {
                    path: p.clone(),
                    seq: load_euroc(p)?,
                });
            }
            Format::Turntable => {
                for file in csv_files(p)? {
                    let seq = load_turntable_log(&file, opts)?;
                    files.push(file.clone());
                    out.push(Recording { path: file, seq });
                }
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::data("no recordings found"));
    }
    Ok(out)
}

fn csv_files(p: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !p.is_dir() {
        if !p.is_file() {
            return Err(CliError::data(format!("missing input {}", p.display())));
        }
        return Ok(vec![p.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(p)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub const TRUTH_HEADER: &str = "t,qw,qx,qy,qz,wx,wy,wz";

/// Truth attitude and mean rate over the following interval, one row per
/// sample.
pub fn format_truth(traj: &TruthTrajectory) -> String {
    let mut s = format!("{TRUTH_HEADER}\n");
    for ((t, q), w) in traj.timestamps.iter().zip(&traj.attitudes).zip(&traj.rates) {
        writeln!(s, "{t},{},{},{},{},{},{},{}", q.w, q.x, q.y, q.z, w[0], w[1], w[2]).expect("string write");
    }
    s
}

pub fn is_truth_file(path: &Path) -> Result<bool, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(text.lines().next().is_some_and(|l| l.trim() == TRUTH_HEADER))
}

/// Truth sidecar as a sequence whose samples are the truth rates and whose
/// every row carries a full reference.
pub fn load_truth(path: &Path) -> Result<GyroSequence, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut seq = GyroSequence::default();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CliError::data(format!("{}: row {row}: {e}", path.display())))?;
        let v: Vec<f64> = rec
            .iter()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::data(format!("{}: row {row}: {e}", path.display())))?;
        if v.len() != 8 {
            return Err(CliError::data(format!("{}: row {row}: expected 8 columns", path.display())));
        }
        let q = Quatd::new(v[1], v[2], v[3], v[4])
            .normalize()
            .map_err(|e| CliError::data(format!("{}: row {row}: {e}", path.display())))?;
        seq.timestamps.push(v[0]);
        seq.samples.push([v[5], v[6], v[7]]);
        seq.references.push(Reference {
            t: v[0],
            q,
            kind: ReferenceKind::Full,
        });
    }
    if seq.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    seq.validate().map_err(CliError::data)?;
    Ok(seq)
}

/// A directory is read as EuRoC, a file with the truth header as a truth
/// sidecar, anything else as a turntable log.
pub fn load_any(path: &Path, files: &mut Vec<PathBuf>) -> Result<GyroSequence, CliError> {
    if path.is_dir() {
        let rec = load_recordings(&[path.to_path_buf()], Format::Euroc, LoadOptions::default(), files)?;
        return Ok(rec.into_iter().next().expect("one recording").seq);
    }
    let seq = if is_truth_file(path)? {
        load_truth(path)?
    } else {
        load_turntable_log(path, LoadOptions::default())?
    };
    files.push(path.to_path_buf());
    Ok(seq)
}
