use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gyrocal::data::{segment, segment_between_references, LoadOptions, Segment};
use gyrocal::net::{import_weights, param_count, write_weights, DtPolicy, WeightSet};
use gyrocal::train::{format_loss_trace, train_calibration, train_denoiser, Phase, TrainConfig, TrainError};
use gyrocal::{CalibNetParams, DenoiseNetParams};

use crate::config::{enum_setting, Resolver};
use crate::error::CliError;
use crate::inputs::{load_recordings, Format};
use crate::manifest::{check_outputs, write_output, Manifest};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Calib,
    Denoise,
}
enum_setting!(PhaseArg);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DtArg {
    /// Step between consecutive timestamps.
    Timestamps,
    /// Fixed step 1/rate.
    Nominal,
}
enum_setting!(DtArg);

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// calib fits the calibration subnet; denoise fits the denoiser behind
    /// the calibration in --weights-in.
    #[arg(long, value_enum)]
    pub phase: Option<PhaseArg>,
    /// Recordings: turntable logs, directories of logs, or EuRoC sequence
    /// directories. Repeatable; comma-separated in a config file.
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// [default: 2000]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 0.01]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Decoupled weight decay [default: 0].
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Denoising window in samples [default: 50].
    #[arg(long)]
    pub n: Option<usize>,
    /// Segment length in samples for densely referenced data [default: 400].
    #[arg(long)]
    pub m: Option<usize>,
    /// Seeds the denoiser initialization [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub weights_in: Option<PathBuf>,
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
    /// Loss trace CSV [default: <weights-out>.loss.csv].
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Integration step source [default: timestamps].
    #[arg(long, value_enum)]
    pub dt_policy: Option<DtArg>,
    /// Nominal rate in Hz for --dt-policy nominal.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Attach tilt-only references at static runs of turntable logs that
    /// carry accelerometer but no reference columns.
    #[arg(long)]
    pub gravity_refs: bool,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run(a: TrainArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("train");
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let force = r.value("force", a.common.force.then_some(true), false)?;
    let phase = r.required::<PhaseArg>("phase", a.phase)?;
    let data_flag = (!a.data.is_empty()).then(|| {
        a.data
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(",")
    });
    let data: Vec<PathBuf> = r
        .required::<String>("data", data_flag)?
        .split(',')
        .map(|s| PathBuf::from(s.trim()))
        .collect();
    let format = r.value("format", a.format, Format::Turntable)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: r.value("epochs", a.epochs, defaults.epochs)?,
        lr: r.value("lr", a.lr, defaults.lr)?,
        weight_decay: r.value("weight-decay", a.weight_decay, defaults.weight_decay)?,
        n: r.value("n", a.n, defaults.n)?,
        m: r.value("m", a.m, defaults.m)?,
        seed: r.value("seed", a.seed, defaults.seed)?,
        phase: match phase {
            PhaseArg::Calib => Phase::Calibration,
            PhaseArg::Denoise => Phase::Denoiser,
        },
    };
    let weights_in = r.optional::<PathBuf>("weights-in", a.weights_in)?;
    let weights_out = r.required::<PathBuf>("weights-out", a.weights_out)?;
    let trace_path = r.value("trace", a.trace, with_suffix(&weights_out, ".loss.csv"))?;
    let dt_arg = r.value("dt-policy", a.dt_policy, DtArg::Timestamps)?;
    let rate = r.optional::<f64>("rate", a.rate)?;
    let gravity_refs = r.value("gravity-refs", a.gravity_refs.then_some(true), false)?;
    let config_file = r.source().map(|p| p.to_path_buf());
    let snapshot = r.finish()?;

    cfg.validate()?;
    let dt_policy = match (dt_arg, rate) {
        (DtArg::Timestamps, _) => DtPolicy::Timestamps,
        (DtArg::Nominal, Some(rate_hz)) if rate_hz > 0.0 && rate_hz.is_finite() => DtPolicy::Nominal { rate_hz },
        (DtArg::Nominal, _) => return Err(CliError::usage("--dt-policy nominal needs a positive --rate")),
    };
    if phase == PhaseArg::Denoise && weights_in.is_none() {
        return Err(CliError::usage(
            "--phase denoise needs calibration weights from a prior --phase calib run (--weights-in); \
             the calibration subnet is trained first and frozen while the denoiser trains",
        ));
    }
    let manifest_path = with_suffix(&weights_out, ".manifest");
    let outputs = [weights_out.clone(), trace_path.clone(), manifest_path.clone()];

    let mut files = Vec::new();
    let opts = LoadOptions {
        synthesize_gravity_refs: gravity_refs,
        ..LoadOptions::default()
    };
    let recordings = load_recordings(&data, format, opts, &mut files)?;
    let prior = match &weights_in {
        Some(p) => {
            files.push(p.clone());
            Some(import_weights(p)?.cast::<f64>())
        }
        None => None,
    };
    check_outputs(&outputs, &files, force)?;

    // phase one integrates from each segment's first sample
    let n_eff = if phase == PhaseArg::Calib { 1 } else { cfg.n };
    let mut segments: Vec<Segment> = Vec::new();
    let mut dropped = 0;
    for rec in &recordings {
        let ds = match format {
            Format::Turntable => segment_between_references(&rec.seq, n_eff),
            Format::Euroc => segment(&rec.seq, cfg.m, n_eff),
        }
        .map_err(|e| CliError::data(format!("{}: {e}", rec.path.display())))?;
        dropped += ds.issues.len();
        segments.extend(ds.segments);
    }
    for seg in &mut segments {
        dt_policy.retime(&mut seg.timestamps);
    }
    if segments.is_empty() {
        return Err(CliError::data("no usable segments: the recordings carry too few references"));
    }
    eprintln!("training on {} segments ({dropped} windows dropped)", segments.len());

    let stride = (cfg.epochs / 10).max(1);
    let mut progress = |epoch: usize, loss: f64| {
        if epoch % stride == 0 {
            eprintln!("epoch {epoch:>6}  loss {loss:.6e}");
        }
    };
    let divergence = |e: TrainError| -> CliError {
        if let TrainError::Divergence { trace, .. } = &e {
            let _ = write_output(&trace_path, format_loss_trace(trace));
        }
        e.into()
    };

    let (set, trace, final_loss) = match phase {
        PhaseArg::Calib => {
            let init = prior.map(|p| p.calib).unwrap_or_else(CalibNetParams::identity);
            let out = train_calibration(&segments, &cfg, &init, &mut progress).map_err(divergence)?;
            let set = WeightSet {
                calib: out.params,
                denoise: None,
            };
            (set, out.trace, out.final_loss)
        }
        PhaseArg::Denoise => {
            let prior = prior.expect("checked above");
            let init = prior.denoise.clone().unwrap_or_else(|| DenoiseNetParams::random(cfg.seed));
            let out = train_denoiser(&prior.calib, &segments, &cfg, &init, &mut progress).map_err(divergence)?;
            let set = WeightSet {
                calib: prior.calib,
                denoise: Some(out.params),
            };
            (set, out.trace, out.final_loss)
        }
    };

    write_output(&weights_out, write_weights(&set.cast::<f32>())?)?;
    write_output(&trace_path, format_loss_trace(&trace))?;

    manifest.seed(cfg.seed);
    manifest.config(snapshot, config_file.as_deref());
    for f in &files {
        manifest.input(f);
    }
    manifest.output(&weights_out);
    manifest.output(&trace_path);
    manifest.result("segments", segments.len());
    manifest.result("dropped_windows", dropped);
    manifest.result("first_loss", trace.first().copied().unwrap_or(f64::NAN));
    manifest.result("final_loss", final_loss);
    manifest.result("params_calib", param_count(&set.calib));
    manifest.result("params_denoise", set.denoise.as_ref().map_or(0, param_count));
    manifest.result("params_total", param_count(&set));
    manifest.write(&manifest_path)?;
    println!("final loss {final_loss:.6e}; weights written to {}", weights_out.display());
    Ok(())
}
