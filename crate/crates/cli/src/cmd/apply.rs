use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gyrocal::data::{format_turntable_log, LoadOptions};
use gyrocal::net::{calib_forward, denoise_sequence_axes, import_weights};

use crate::config::{enum_setting, Resolver};
use crate::error::CliError;
use crate::inputs::{load_recordings, Format};
use crate::manifest::{check_outputs, write_output, Manifest};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Calib,
    #[value(name = "calib+denoise")]
    CalibDenoise,
}
enum_setting!(Stage);

#[derive(Args, Debug)]
pub struct ApplyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// One turntable log or EuRoC sequence directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// [default: calib]
    #[arg(long, value_enum)]
    pub stage: Option<Stage>,
    /// Denoising window; earlier samples pass through calibrated [default: 50].
    #[arg(long)]
    pub n: Option<usize>,
    /// Corrected rates in the turntable log schema.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(a: ApplyArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("apply");
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let force = r.value("force", a.common.force.then_some(true), false)?;
    let weights_path = r.required::<PathBuf>("weights", a.weights)?;
    let data = r.required::<PathBuf>("data", a.data)?;
    let format = r.value("format", a.format, Format::Turntable)?;
    let stage = r.value("stage", a.stage, Stage::Calib)?;
    let n = r.value("n", a.n, 50usize)?;
    let out = r.required::<PathBuf>("out", a.out)?;
    let config_file = r.source().map(|p| p.to_path_buf());
    let snapshot = r.finish()?;

    let mut files = vec![weights_path.clone()];
    let weights = import_weights(&weights_path)?.cast::<f64>();
    let mut recs = load_recordings(std::slice::from_ref(&data), format, LoadOptions::default(), &mut files)?;
    if recs.len() != 1 {
        return Err(CliError::data(format!(
            "{} holds {} recordings; apply takes one",
            data.display(),
            recs.len()
        )));
    }
    let manifest_path = {
        let mut s = out.as_os_str().to_os_string();
        s.push(".manifest");
        PathBuf::from(s)
    };
    check_outputs(&[out.clone(), manifest_path.clone()], &files, force)?;

    let mut seq = recs.remove(0).seq;
    let calibrated: Vec<[f64; 3]> = seq.samples.iter().map(|&w| calib_forward(&weights.calib, w)).collect();
    seq.samples = match stage {
        Stage::Calib => calibrated,
        Stage::CalibDenoise => {
            let d = weights.denoise.as_ref().ok_or_else(|| {
                CliError::data(format!(
                    "{} holds no denoiser weights; use --stage calib or train --phase denoise",
                    weights_path.display()
                ))
            })?;
            denoise_sequence_axes(d, &calibrated, n)?
        }
    };
    // the log schema stores references on sample rows only
    let times = seq.timestamps.clone();
    seq.references.retain(|rf| times.binary_search_by(|t| t.total_cmp(&rf.t)).is_ok());
    write_output(&out, format_turntable_log(&seq)?)?;

    manifest.config(snapshot, config_file.as_deref());
    for f in &files {
        manifest.input(f);
    }
    manifest.output(&out);
    manifest.result("samples", seq.len());
    manifest.write(&manifest_path)?;
    println!("wrote {} corrected samples to {}", seq.len(), out.display());
    Ok(())
}
