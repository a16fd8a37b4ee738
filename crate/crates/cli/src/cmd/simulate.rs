use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gyrocal::data::format_turntable_log;
use gyrocal::net::{write_weights, WeightSet};
use gyrocal::sim::{gen_turntable_session, DistortionGroundTruth, DistortionRange, MotionProfile, TurntableConfig};
use gyrocal::CalibNetParams;

use crate::config::{enum_setting, Resolver};
use crate::error::CliError;
use crate::inputs::format_truth;
use crate::manifest::{check_outputs, write_output, Manifest};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    RandomSmooth,
    SumOfSinusoids,
    Static,
}
enum_setting!(Profile);

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seeds the distortion draw, the motion and the noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of static–rotate–static recordings [default: 40].
    #[arg(long)]
    pub segments: Option<usize>,
    /// Sample rate in Hz [default: 200].
    #[arg(long)]
    pub rate: Option<f64>,
    /// Motion during the rotate phase [default: random-smooth].
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    /// Per-axis scale error bound, 0.05 = ±5 % [default: 0.05].
    #[arg(long)]
    pub scale_err: Option<f64>,
    /// Misalignment bound in degrees [default: 2].
    #[arg(long)]
    pub misalign_deg: Option<f64>,
    /// Per-axis bias bound in rad/s [default: 0.02].
    #[arg(long)]
    pub bias: Option<f64>,
    /// White-noise standard deviation in rad/s [default: 0.0015].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Length of each static phase in seconds [default: 1].
    #[arg(long)]
    pub static_s: Option<f64>,
    /// Length of the rotate phase in seconds [default: 3].
    #[arg(long)]
    pub motion_s: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{name} must be a non-negative number, got {v}")))
    }
}

fn distortion_sidecar(d: &DistortionGroundTruth) -> String {
    let e: Vec<String> = d.e.iter().flatten().map(f64::to_string).collect();
    let b: Vec<String> = d.b.iter().map(f64::to_string).collect();
    let mut s = String::from("# true rate = E·raw + B; E row-major\n");
    writeln!(s, "e = {}", e.join(",")).expect("string write");
    writeln!(s, "b = {}", b.join(",")).expect("string write");
    writeln!(s, "noise_sigma = {}", d.noise_sigma).expect("string write");
    s
}

pub fn run(a: SimulateArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("simulate");
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let force = r.value("force", a.common.force.then_some(true), false)?;
    let seed = r.value("seed", a.seed, 0u64)?;
    let segments = r.value("segments", a.segments, 40usize)?;
    let rate = r.value("rate", a.rate, 200.0)?;
    let profile = r.value("profile", a.profile, Profile::RandomSmooth)?;
    let range = DistortionRange {
        scale_err: non_negative("scale-err", r.value("scale-err", a.scale_err, 0.05)?)?,
        misalign_deg: non_negative("misalign-deg", r.value("misalign-deg", a.misalign_deg, 2.0)?)?,
        bias: non_negative("bias", r.value("bias", a.bias, 0.02)?)?,
        noise_sigma: non_negative("noise", r.value("noise", a.noise, 0.0015)?)?,
    };
    let static_s = non_negative("static-s", r.value("static-s", a.static_s, 1.0)?)?;
    let motion_s = non_negative("motion-s", r.value("motion-s", a.motion_s, 3.0)?)?;
    let out = r.required::<PathBuf>("out", a.out)?;
    let config_file = r.source().map(|p| p.to_path_buf());
    let snapshot = r.finish()?;

    if segments == 0 {
        return Err(CliError::usage("--segments must be at least 1"));
    }
    if range.misalign_deg >= 45.0 {
        return Err(CliError::usage("--misalign-deg must be below 45"));
    }
    let cfg = TurntableConfig {
        rate_hz: rate,
        static_s,
        motion_s,
        motion: match profile {
            Profile::RandomSmooth => MotionProfile::random_smooth(),
            Profile::SumOfSinusoids => MotionProfile::sum_of_sinusoids(),
            Profile::Static => MotionProfile::Static,
        },
    };

    let name = |j: usize| format!("seg_{j:03}.csv");
    let truth_dir = out.join("truth");
    let mut outputs: Vec<PathBuf> = Vec::new();
    for j in 0..segments {
        outputs.push(out.join(name(j)));
        outputs.push(truth_dir.join(name(j)));
    }
    let distortion_path = truth_dir.join("distortion.txt");
    let oracle_path = truth_dir.join("oracle.tgcn");
    let manifest_path = out.join("manifest.txt");
    outputs.extend([distortion_path.clone(), oracle_path.clone(), manifest_path.clone()]);
    check_outputs(&outputs, &[], force)?;

    // one seed drives everything; the session stream is offset from the distortion draw
    let d = DistortionGroundTruth::sample(seed, &range);
    let session = gen_turntable_session(seed.wrapping_add(1), &d, segments, &cfg)?;

    manifest.seed(seed);
    manifest.config(snapshot, config_file.as_deref());
    for (j, rec) in session.iter().enumerate() {
        write_output(&out.join(name(j)), format_turntable_log(&rec.raw)?)?;
        write_output(&truth_dir.join(name(j)), format_truth(&rec.truth))?;
    }
    write_output(&distortion_path, distortion_sidecar(&d))?;
    let oracle = WeightSet {
        calib: CalibNetParams::from_affine(d.e, d.b),
        denoise: None,
    };
    write_output(&oracle_path, write_weights(&oracle.cast::<f32>())?)?;
    for p in &outputs[..outputs.len() - 1] {
        manifest.output(p);
    }
    manifest.result("samples_per_segment", session[0].raw.len());
    manifest.result("condition_bound", d.condition_bound());
    manifest.write(&manifest_path)?;
    println!(
        "wrote {segments} recordings of {} samples to {}",
        session[0].raw.len(),
        out.display()
    );
    Ok(())
}
