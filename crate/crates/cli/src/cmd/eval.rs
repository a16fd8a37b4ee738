use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gyrocal::data::{align_reference, GyroSequence};
use gyrocal::metrics::{
    aoe, denoise_report, endpoint_error, format_spectrum_csv, format_summary_csv, format_track_csv,
    integrate_sequence, AttitudeTrack, ALIGNMENT_TOLERANCE_S, DEFAULT_CUTOFF_HZ,
};

use crate::config::{enum_setting, Resolver};
use crate::error::CliError;
use crate::inputs::{is_truth_file, load_any};
use crate::manifest::{check_outputs, write_output, Manifest};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// RMS attitude error over the whole track, degrees.
    Aoe,
    /// Euler-angle error of the final attitude, degrees.
    Endpoint,
    /// Per-axis power spectra of `--truth` (before) and `--est` (after).
    Spectrum,
}
enum_setting!(Metric);

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Estimate: rates as a turntable log or EuRoC sequence directory, or an
    /// attitude track in the truth sidecar format.
    #[arg(long)]
    pub est: Option<PathBuf>,
    /// Reference: truth sidecar, turntable log with references, or EuRoC
    /// directory. For spectrum, the rates before denoising.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Spectrum band split in Hz [default: 20].
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Leading samples excluded from spectra, e.g. a denoiser warm-up [default: 0].
    #[arg(long)]
    pub skip: Option<usize>,
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Restricts the estimate to the span covered by truth references. Rate
/// estimates are integrated from the truth attitude; an estimate that is
/// itself an attitude track is compared directly.
fn tracks(est: &GyroSequence, est_is_track: bool, truth: &GyroSequence) -> Result<(AttitudeTrack, AttitudeTrack), CliError> {
    let (Some(first), Some(last)) = (truth.references.first(), truth.references.last()) else {
        return Err(CliError::data("truth input carries no reference attitudes"));
    };
    let tol = ALIGNMENT_TOLERANCE_S;
    let lo = est.timestamps.partition_point(|&t| t < first.t - tol);
    let hi = est.timestamps.partition_point(|&t| t <= last.t + tol);
    if hi < lo + 2 {
        return Err(CliError::data(format!(
            "estimate timeline does not overlap the truth span [{}, {}]",
            first.t, last.t
        )));
    }
    let ts: Vec<f64> = est.timestamps[lo..hi]
        .iter()
        .map(|&t| t.clamp(first.t, last.t))
        .collect();
    let truth_q = align_reference(truth, &ts)?;
    let est_track = if est_is_track {
        AttitudeTrack {
            timestamps: est.timestamps[lo..hi].to_vec(),
            attitudes: est.references[lo..hi].iter().map(|r| r.q).collect(),
        }
    } else {
        integrate_sequence(&est.samples[lo..hi], truth_q[0], &est.timestamps[lo..hi])?
    };
    let truth_track = AttitudeTrack {
        timestamps: est.timestamps[lo..hi].to_vec(),
        attitudes: truth_q,
    };
    Ok((est_track, truth_track))
}

pub fn run(a: EvalArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("eval");
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let force = r.value("force", a.common.force.then_some(true), false)?;
    let est_path = r.required::<PathBuf>("est", a.est)?;
    let truth_path = r.required::<PathBuf>("truth", a.truth)?;
    let metric = r.required::<Metric>("metric", a.metric)?;
    let out = r.required::<PathBuf>("out", a.out)?;
    let cutoff = r.value("cutoff", a.cutoff, DEFAULT_CUTOFF_HZ)?;
    let skip = r.value("skip", a.skip, 0usize)?;
    let config_file = r.source().map(|p| p.to_path_buf());
    let snapshot = r.finish()?;

    let mut files = Vec::new();
    let est = load_any(&est_path, &mut files)?;
    let est_is_track = est_path.is_file() && is_truth_file(&est_path)?;
    let truth = load_any(&truth_path, &mut files)?;

    let summary_path = out.join("summary.csv");
    let manifest_path = out.join("manifest.txt");
    let mut written: Vec<(PathBuf, String)> = Vec::new();
    let mut summary: Vec<(String, f64)> = Vec::new();

    match metric {
        Metric::Aoe | Metric::Endpoint => {
            let (est_track, truth_track) = tracks(&est, est_is_track, &truth)?;
            if metric == Metric::Aoe {
                let v = aoe(&est_track, &truth_track)?;
                println!("AOE {v:.4}° over {} samples", est_track.len());
                summary.push(("aoe_deg".into(), v));
                summary.push(("samples".into(), est_track.len() as f64));
            } else {
                let e = endpoint_error(
                    est_track.last().expect("non-empty"),
                    truth_track.last().expect("non-empty"),
                )?;
                println!("endpoint {e}");
                summary.extend(e.summary().into_iter().map(|(k, v)| (k.to_string(), v)));
                summary.push(("duration_s".into(), est_track.timestamps[est_track.len() - 1] - est_track.timestamps[0]));
            }
            written.push((out.join("est_track.csv"), format_track_csv(&est_track)));
            written.push((out.join("truth_track.csv"), format_track_csv(&truth_track)));
        }
        Metric::Spectrum => {
            if est.len() != truth.len() {
                return Err(CliError::data(format!(
                    "spectrum inputs differ in length: {} vs {}",
                    est.len(),
                    truth.len()
                )));
            }
            if let Some(k) = (0..est.len()).find(|&k| (est.timestamps[k] - truth.timestamps[k]).abs() > ALIGNMENT_TOLERANCE_S) {
                return Err(CliError::data(format!("spectrum inputs disagree in time at sample {k}")));
            }
            if skip >= est.len() {
                return Err(CliError::usage("--skip removes every sample"));
            }
            let rate = 1.0 / est.mean_period();
            summary.push(("rate_hz".into(), rate));
            summary.push(("cutoff_hz".into(), cutoff));
            for (axis, name) in AXES.iter().enumerate() {
                let before: Vec<f64> = truth.samples[skip..].iter().map(|s| s[axis]).collect();
                let after: Vec<f64> = est.samples[skip..].iter().map(|s| s[axis]).collect();
                let rep = denoise_report(&before, &after, rate, cutoff)?;
                println!(
                    "axis {name}: high-band power ratio {:.4}, low-band amplitude ratio {:.4}",
                    rep.high_band_power_ratio, rep.low_band_amplitude_ratio
                );
                summary.push((format!("high_band_power_ratio_{name}"), rep.high_band_power_ratio));
                summary.push((format!("low_band_amplitude_ratio_{name}"), rep.low_band_amplitude_ratio));
                written.push((out.join(format!("spectrum_before_{name}.csv")), format_spectrum_csv(&rep.before_spectrum)));
                written.push((out.join(format!("spectrum_after_{name}.csv")), format_spectrum_csv(&rep.after_spectrum)));
                written.push((out.join(format!("series_{name}.csv")), rep.format_series()));
            }
        }
    }
    let rows: Vec<(&str, f64)> = summary.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    written.push((summary_path, format_summary_csv(&rows)));

    let mut outputs: Vec<PathBuf> = written.iter().map(|(p, _)| p.clone()).collect();
    outputs.push(manifest_path.clone());
    check_outputs(&outputs, &files, force)?;
    for (p, text) in &written {
        write_output(p, text)?;
    }
    manifest.config(snapshot, config_file.as_deref());
    for f in &files {
        manifest.input(f);
    }
    for (p, _) in &written {
        manifest.output(p);
    }
    for (k, v) in &summary {
        manifest.result(k, v);
    }
    manifest.write(&manifest_path)?;
    Ok(())
}
