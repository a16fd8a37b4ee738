//! Synthetic gyroscope recordings with a known distortion.
//!
//! Truth rates are defined in continuous time. Each sensor interval
//! `[t_k, t_k+1)` is split into fine substeps; the truth attitude advances by
//! the exact exponential of the midpoint rate on every substep, and sample `k`
//! is the mean of those midpoint rates. Raw readings invert the measurement
//! model: `raw = E⁻¹(ω − B) + η`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::data::{GyroSequence, Reference, ReferenceKind};
use crate::quat::{quat_from_euler, quat_from_rotvec, Vec3, GRAVITY};
use crate::Quatd;

/// Fine substeps per sensor interval.
pub const SUBSTEPS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("distortion matrix is singular or ill-conditioned (condition bound {0:.3e})")]
    Singular(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

type Mat3 = [[f64; 3]; 3];

fn mat_vec(m: &Mat3, v: Vec3<f64>) -> Vec3<f64> {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &Mat3) -> Option<Mat3> {
    let det = det3(m);
    if !det.is_finite() || det == 0.0 {
        return None;
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / det)))
}

fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sensor distortion: the true rate is `E·raw + B`, plus white noise of
/// standard deviation `noise_sigma` (rad/s) on every raw sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionGroundTruth {
    pub e: Mat3,
    pub b: Vec3<f64>,
    pub noise_sigma: f64,
}

/// Bounds for [`DistortionGroundTruth::sample`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionRange {
    /// Per-axis scale error bound (0.05 is ±5 %).
    pub scale_err: f64,
    /// Bound on every misalignment angle, degrees.
    pub misalign_deg: f64,
    /// Per-axis bias bound, rad/s.
    pub bias: f64,
    pub noise_sigma: f64,
}

impl Default for DistortionRange {
    fn default() -> Self {
        Self {
            scale_err: 0.05,
            misalign_deg: 2.0,
            bias: 0.02,
            noise_sigma: 0.0015,
        }
    }
}

impl DistortionGroundTruth {
    pub fn identity() -> Self {
        Self {
            e: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            b: [0.0; 3],
            noise_sigma: 0.0,
        }
    }

    /// `E = (I + A)·diag(1 + s)` with off-diagonal `A` entries uniform in
    /// `±tan(misalign)`, `s` uniform in `±scale_err`, `B` uniform in `±bias`.
    pub fn sample(seed: u64, range: &DistortionRange) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sym = |bound: f64| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 };
        let tilt = range.misalign_deg.to_radians().tan();
        let mut e = [[0.0; 3]; 3];
        let scale = [0, 1, 2].map(|_| 1.0 + sym(range.scale_err));
        for (i, row) in e.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let m = if i == j { 1.0 } else { sym(tilt) };
                *cell = m * scale[j];
            }
        }
        let b = [0, 1, 2].map(|_| sym(range.bias));
        Self {
            e,
            b,
            noise_sigma: range.noise_sigma,
        }
    }

    /// Upper bound `‖E‖_F·‖E⁻¹‖_F` on the 2-norm condition number.
    pub fn condition_bound(&self) -> f64 {
        match inverse3(&self.e) {
            Some(inv) => frobenius(&self.e) * frobenius(&inv),
            None => f64::INFINITY,
        }
    }

    /// `E⁻¹`, rejecting matrices whose condition bound reaches 100.
    pub fn e_inverse(&self) -> Result<Mat3, SimError> {
        let cond = self.condition_bound();
        match inverse3(&self.e) {
            Some(inv) if cond < 100.0 => Ok(inv),
            _ => Err(SimError::Singular(cond)),
        }
    }

    /// Applies the calibration direction `E·raw + B`.
    pub fn correct(&self, raw: Vec3<f64>) -> Vec3<f64> {
        let r = mat_vec(&self.e, raw);
        [r[0] + self.b[0], r[1] + self.b[1], r[2] + self.b[2]]
    }
}

/// Continuous-time truth rate shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionProfile {
    Static,
    /// Three seeded components per axis: frequencies in 0.1–2 Hz, amplitudes
    /// summing to at most `max_rate` (≤ 2 rad/s in the default draw).
    SumOfSinusoids { max_rate: f64 },
    /// `ω_axis = amplitude·sin(2π f t)`, other axes zero.
    Sinusoid { axis: usize, amplitude: f64, freq_hz: f64 },
    /// Band-limited Gaussian noise (seeded random-phase Fourier series with
    /// components up to `cutoff_hz`) with per-axis RMS `rms_rate`.
    RandomSmooth { rms_rate: f64, cutoff_hz: f64 },
}

impl MotionProfile {
    pub fn sum_of_sinusoids() -> Self {
        MotionProfile::SumOfSinusoids { max_rate: 2.0 }
    }

    pub fn random_smooth() -> Self {
        MotionProfile::RandomSmooth {
            rms_rate: 1.0,
            cutoff_hz: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tone {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

/// Materialized rate function of a profile.
#[derive(Debug, Clone)]
struct RateFn {
    axes: [Vec<Tone>; 3],
}

const RANDOM_SMOOTH_TONES: usize = 24;

impl RateFn {
    fn new(profile: &MotionProfile, seed: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut axes: [Vec<Tone>; 3] = Default::default();
        match *profile {
            MotionProfile::Static => {}
            MotionProfile::SumOfSinusoids { max_rate } => {
                for tones in axes.iter_mut() {
                    let weights: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(0.2..1.0));
                    let total: f64 = weights.iter().sum();
                    for w in weights {
                        tones.push(Tone {
                            amplitude: max_rate * w / total,
                            omega: 2.0 * PI * rng.random_range(0.1..=2.0),
                            phase: rng.random_range(0.0..2.0 * PI),
                        });
                    }
                }
            }
            MotionProfile::Sinusoid {
                axis,
                amplitude,
                freq_hz,
            } => {
                if axis > 2 {
                    return Err(SimError::InvalidConfig(format!("axis {axis} out of range")));
                }
                axes[axis].push(Tone {
                    amplitude,
                    omega: 2.0 * PI * freq_hz,
                    phase: 0.0,
                });
            }
            MotionProfile::RandomSmooth { rms_rate, cutoff_hz } => {
                if !(cutoff_hz > 0.0) {
                    return Err(SimError::InvalidConfig("cutoff must be positive".into()));
                }
                for tones in axes.iter_mut() {
                    let raw: Vec<(f64, f64, f64)> = (0..RANDOM_SMOOTH_TONES)
                        .map(|_| {
                            let a: f64 = StandardNormal.sample(&mut rng);
                            let f = rng.random_range(0.05 * cutoff_hz..=cutoff_hz);
                            (a, f, rng.random_range(0.0..2.0 * PI))
                        })
                        .collect();
                    // a random-phase tone of amplitude a has mean square a²/2
                    let ms: f64 = raw.iter().map(|(a, _, _)| a * a / 2.0).sum();
                    let k = rms_rate / ms.sqrt();
                    tones.extend(raw.into_iter().map(|(a, f, phase)| Tone {
                        amplitude: a * k,
                        omega: 2.0 * PI * f,
                        phase,
                    }));
                }
            }
        }
        Ok(Self { axes })
    }

    fn at(&self, t: f64) -> Vec3<f64> {
        [0, 1, 2].map(|i| {
            self.axes[i]
                .iter()
                .map(|tone| tone.amplitude * (tone.omega * t + tone.phase).sin())
                .sum()
        })
    }
}

/// Truth rates and attitudes on the sensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrajectory {
    pub timestamps: Vec<f64>,
    /// Mean body rate over `[t_k, t_k+1)`, rad/s.
    pub rates: Vec<Vec3<f64>>,
    /// Body-to-navigation attitude at `t_k`.
    pub attitudes: Vec<Quatd>,
}

impl TruthTrajectory {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Integrates `rate(t)` (evaluated at substep midpoints) on a uniform grid.
fn integrate_truth(
    q0: Quatd,
    t0: f64,
    count: usize,
    rate_hz: f64,
    substeps: usize,
    rate: impl Fn(f64) -> Vec3<f64>,
) -> TruthTrajectory {
    let dt = 1.0 / rate_hz;
    let h = dt / substeps as f64;
    let mut q = q0;
    let mut out = TruthTrajectory {
        timestamps: Vec::with_capacity(count),
        rates: Vec::with_capacity(count),
        attitudes: Vec::with_capacity(count),
    };
    for k in 0..count {
        let tk = t0 + k as f64 * dt;
        out.timestamps.push(tk);
        out.attitudes.push(q);
        let mut mean = [0.0; 3];
        for s in 0..substeps {
            let w = rate(t0 + (k as f64 + (s as f64 + 0.5) / substeps as f64) * dt);
            q = (q * quat_from_rotvec(w.map(|c| c * h))).normalize().unwrap_or(q);
            for (m, c) in mean.iter_mut().zip(w) {
                *m += c;
            }
        }
        out.rates.push(mean.map(|m| m / substeps as f64));
    }
    out
}

fn check_rate(rate_hz: f64) -> Result<(), SimError> {
    if rate_hz > 0.0 && rate_hz.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidRate(rate_hz))
    }
}

/// Trajectory starting at identity at `t = 0` with `round(duration·rate)` samples.
pub fn gen_trajectory(seed: u64, duration_s: f64, rate_hz: f64, profile: &MotionProfile) -> Result<TruthTrajectory, SimError> {
    gen_trajectory_with(seed, Quatd::identity(), duration_s, rate_hz, profile, SUBSTEPS)
}

/// [`gen_trajectory`] with an explicit initial attitude and substep count.
pub fn gen_trajectory_with(
    seed: u64,
    q0: Quatd,
    duration_s: f64,
    rate_hz: f64,
    profile: &MotionProfile,
    substeps: usize,
) -> Result<TruthTrajectory, SimError> {
    check_rate(rate_hz)?;
    if substeps == 0 || !(duration_s >= 0.0) {
        return Err(SimError::InvalidConfig("substeps ≥ 1 and duration ≥ 0 required".into()));
    }
    let rate = RateFn::new(profile, seed)?;
    let count = (duration_s * rate_hz).round() as usize;
    Ok(integrate_truth(q0, 0.0, count, rate_hz, substeps, |t| rate.at(t)))
}

/// Raw recording of a truth trajectory together with that truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSequence {
    pub raw: GyroSequence,
    pub truth: TruthTrajectory,
}

/// Raw readings `E⁻¹(ω − B) + η` with seeded Gaussian `η`. No references.
pub fn distort(traj: &TruthTrajectory, d: &DistortionGroundTruth, seed: u64) -> Result<SimSequence, SimError> {
    let inv = d.e_inverse()?;
    if !(d.noise_sigma >= 0.0) {
        return Err(SimError::InvalidConfig("noise sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, d.noise_sigma).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let samples = traj
        .rates
        .iter()
        .map(|w| {
            let mut r = mat_vec(&inv, [w[0] - d.b[0], w[1] - d.b[1], w[2] - d.b[2]]);
            if d.noise_sigma > 0.0 {
                for c in r.iter_mut() {
                    *c += noise.sample(&mut rng);
                }
            }
            r
        })
        .collect();
    Ok(SimSequence {
        raw: GyroSequence {
            timestamps: traj.timestamps.clone(),
            samples,
            accel: Vec::new(),
            references: Vec::new(),
        },
        truth: traj.clone(),
    })
}

/// Specific force measured by a static body at attitude `q`.
pub fn static_specific_force(q: Quatd) -> Vec3<f64> {
    q.conjugate().rotate([0.0, 0.0, -GRAVITY])
}

/// Static–rotate–static protocol timing.
#[derive(Debug, Clone, PartialEq)]
pub struct TurntableConfig {
    pub rate_hz: f64,
    pub static_s: f64,
    pub motion_s: f64,
    pub motion: MotionProfile,
}

impl Default for TurntableConfig {
    fn default() -> Self {
        Self {
            rate_hz: 200.0,
            static_s: 1.0,
            motion_s: 3.0,
            motion: MotionProfile::random_smooth(),
        }
    }
}

impl TurntableConfig {
    pub fn static_samples(&self) -> usize {
        (self.static_s * self.rate_hz).round() as usize
    }

    pub fn motion_samples(&self) -> usize {
        (self.motion_s * self.rate_hz).round() as usize
    }

    /// Sample indices of the two reference rows (static-phase midpoints).
    pub fn reference_indices(&self) -> [usize; 2] {
        let s = self.static_samples();
        let mid = (s - 1) / 2;
        [mid, s + self.motion_samples() + mid]
    }
}

/// One static–rotate–static recording per segment. The motion phase is the
/// profile's rate under a `sin²` envelope, so rates vanish at both static
/// phases. Accelerometer columns hold the exact specific force on static rows
/// only. Full references sit at the static midpoints and equal the truth.
pub fn gen_turntable_session(
    seed: u64,
    d: &DistortionGroundTruth,
    segment_count: usize,
    cfg: &TurntableConfig,
) -> Result<Vec<SimSequence>, SimError> {
    check_rate(cfg.rate_hz)?;
    if segment_count == 0 {
        return Err(SimError::InvalidConfig("segment count must be at least 1".into()));
    }
    let n_static = cfg.static_samples();
    let n_motion = cfg.motion_samples();
    if n_static == 0 {
        return Err(SimError::InvalidConfig("static phase must hold at least one sample".into()));
    }
    let total = 2 * n_static + n_motion;
    let motion_start = n_static as f64 / cfg.rate_hz;
    let motion_len = n_motion as f64 / cfg.rate_hz;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(segment_count);
    for j in 0..segment_count {
        let (traj_seed, noise_seed): (u64, u64) = (master.random(), master.random());
        let q0 = quat_from_euler(
            master.random_range(-0.5..0.5),
            master.random_range(-0.5..0.5),
            master.random_range(-PI..PI),
        );
        let rate = RateFn::new(&cfg.motion, traj_seed)?;
        let envelope = |t: f64| {
            let tau = (t - motion_start) / motion_len;
            if motion_len > 0.0 && tau > 0.0 && tau < 1.0 {
                (PI * tau).sin().powi(2)
            } else {
                0.0
            }
        };
        let mut traj = integrate_truth(q0, 0.0, total, cfg.rate_hz, SUBSTEPS, |t| {
            let e = envelope(t);
            if e == 0.0 {
                [0.0; 3]
            } else {
                rate.at(t).map(|c| c * e)
            }
        });
        let offset = j as f64 * (total as f64 + n_static as f64) / cfg.rate_hz;
        traj.timestamps.iter_mut().for_each(|t| *t += offset);
        let mut rec = distort(&traj, d, noise_seed)?;
        rec.raw.accel = (0..total)
            .map(|k| {
                let is_static = k < n_static || k >= n_static + n_motion;
                is_static.then(|| static_specific_force(traj.attitudes[k]))
            })
            .collect();
        rec.raw.references = cfg
            .reference_indices()
            .iter()
            .map(|&k| Reference {
                t: traj.timestamps[k],
                q: traj.attitudes[k],
                kind: ReferenceKind::Full,
            })
            .collect();
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{calib_forward, lbn_forward, CalibNetParams, LbnParams};
    use crate::quat::{quat_diff, rotation_angle};
    use proptest::prelude::*;

    #[test]
    fn static_profile() {
        let t = gen_trajectory(0, 2.0, 200.0, &MotionProfile::Static).unwrap();
        assert_eq!(t.len(), 400);
        assert!(t.rates.iter().all(|w| *w == [0.0; 3]));
        assert!(t.attitudes.iter().all(|q| *q == Quatd::identity()));
    }

    #[test]
    fn single_sinusoid_returns_after_whole_periods() {
        let p = MotionProfile::Sinusoid {
            axis: 0,
            amplitude: 1.5,
            freq_hz: 0.5,
        };
        let t = gen_trajectory(0, 4.0, 200.0, &p).unwrap();
        // the rotation angle is ∫ω dt = a/(2πf)·(1 − cos 2πft), zero after each period
        let end = gen_trajectory_with(0, Quatd::identity(), 4.005, 200.0, &p, SUBSTEPS).unwrap();
        let q_end = *end.attitudes.last().unwrap();
        assert_eq!(end.len(), 801);
        assert!(rotation_angle(q_end) < 1e-9, "{}", rotation_angle(q_end));
        // t = 1 s is half a period: angle a/(πf)
        let k = 200;
        let expected = 1.5 / (2.0 * PI * 0.5) * (1.0 - (2.0 * PI * 0.5 * 1.0f64).cos());
        assert!((rotation_angle(t.attitudes[k]) - expected).abs() < 1e-7);
        assert!(t.attitudes[k].y.abs() < 1e-15 && t.attitudes[k].z.abs() < 1e-15);
    }

    #[test]
    fn seeds_are_deterministic() {
        let p = MotionProfile::sum_of_sinusoids();
        let a = gen_trajectory(0, 3.0, 200.0, &p).unwrap();
        let b = gen_trajectory(0, 3.0, 200.0, &p).unwrap();
        let c = gen_trajectory(1, 3.0, 200.0, &p).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let peak = a.rates.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 2.0);
        assert!(gen_trajectory(0, 1.0, 0.0, &p).is_err());
    }

    #[test]
    fn random_smooth_has_requested_rms() {
        let t = gen_trajectory(3, 200.0, 50.0, &MotionProfile::random_smooth()).unwrap();
        for axis in 0..3 {
            let ms = t.rates.iter().map(|w| w[axis] * w[axis]).sum::<f64>() / t.len() as f64;
            assert!((ms.sqrt() - 1.0).abs() < 0.35, "axis {axis}: rms {}", ms.sqrt());
        }
    }

    #[test]
    fn substep_convergence_over_a_minute() {
        let p = MotionProfile::random_smooth();
        let a = gen_trajectory_with(5, Quatd::identity(), 60.0, 200.0, &p, SUBSTEPS).unwrap();
        let b = gen_trajectory_with(5, Quatd::identity(), 60.0, 200.0, &p, 2 * SUBSTEPS).unwrap();
        let d = rotation_angle(*a.attitudes.last().unwrap() * b.attitudes.last().unwrap().conjugate());
        assert!(d.to_degrees() < 0.01, "{}", d.to_degrees());
    }

    #[test]
    fn distort_examples() {
        let traj = TruthTrajectory {
            timestamps: vec![0.0],
            rates: vec![[1.0, 0.0, 0.0]],
            attitudes: vec![Quatd::identity()],
        };
        let d = DistortionGroundTruth {
            e: [[1.05, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            b: [0.01, 0.0, 0.0],
            noise_sigma: 0.0,
        };
        let raw = distort(&traj, &d, 0).unwrap().raw;
        assert!((raw.samples[0][0] - (1.0 - 0.01) / 1.05).abs() < 1e-15);

        let traj = gen_trajectory(2, 2.0, 200.0, &MotionProfile::sum_of_sinusoids()).unwrap();
        let same = distort(&traj, &DistortionGroundTruth::identity(), 9).unwrap();
        assert_eq!(same.raw.samples, traj.rates);

        let singular = DistortionGroundTruth {
            e: [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            ..DistortionGroundTruth::identity()
        };
        assert!(matches!(distort(&traj, &singular, 0), Err(SimError::Singular(_))));
    }

    #[test]
    fn sampled_distortions_respect_bounds() {
        let range = DistortionRange::default();
        for seed in 0..50 {
            let d = DistortionGroundTruth::sample(seed, &range);
            assert!(d.condition_bound() < 100.0);
            for i in 0..3 {
                assert!(d.b[i].abs() <= 0.02);
                assert!((d.e[i][i] - 1.0).abs() <= 0.05 + 1e-15);
                for j in 0..3 {
                    if i != j {
                        let tilt = d.e[i][j] / d.e[j][j];
                        assert!(tilt.abs() <= 2f64.to_radians().tan() + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn turntable_protocol() {
        let d = DistortionGroundTruth::sample(1, &DistortionRange::default());
        let cfg = TurntableConfig::default();
        let session = gen_turntable_session(4, &d, 3, &cfg).unwrap();
        assert_eq!(session.len(), 3);
        let inv = d.e_inverse().unwrap();
        let static_raw = mat_vec(&inv, d.b.map(|c| -c));
        for rec in &session {
            assert_eq!(rec.raw.len(), 1000);
            assert_eq!(rec.raw.references.len(), 2);
            let [ia, ib] = cfg.reference_indices();
            assert_eq!((ia, ib), (99, 899));
            assert_eq!(rec.raw.references[0].q, rec.truth.attitudes[ia]);
            assert_eq!(rec.raw.references[1].q, rec.truth.attitudes[ib]);
            for k in (0..200).chain(800..1000) {
                assert_eq!(rec.truth.rates[k], [0.0; 3]);
                assert!(rec.raw.accel[k].is_some());
                for i in 0..3 {
                    assert!((rec.raw.samples[k][i] - static_raw[i]).abs() < 6.0 * d.noise_sigma);
                }
            }
            assert!(rec.raw.accel[500].is_none());
            rec.raw.validate().unwrap();
        }
        assert!(session[1].raw.timestamps[0] > *session[0].raw.timestamps.last().unwrap());
        let again = gen_turntable_session(4, &d, 3, &cfg).unwrap();
        assert_eq!(session, again);
    }

    #[test]
    fn forty_segments() {
        let d = DistortionGroundTruth::identity();
        assert_eq!(gen_turntable_session(0, &d, 40, &TurntableConfig::default()).unwrap().len(), 40);
    }

    #[test]
    fn static_force_gives_back_tilt() {
        let q = quat_from_euler(0.3, -0.2, 0.0);
        let back = crate::quat::quat_from_gravity(static_specific_force(q)).unwrap();
        assert!(quat_diff(q, back).unwrap() < 1e-12);
    }

    proptest! {
        #[test]
        fn oracle_identity(seed in 0u64..1000) {
            let d = DistortionGroundTruth {
                noise_sigma: 0.0,
                ..DistortionGroundTruth::sample(seed, &DistortionRange::default())
            };
            let traj = gen_trajectory(seed, 0.5, 200.0, &MotionProfile::sum_of_sinusoids()).unwrap();
            let rec = distort(&traj, &d, seed).unwrap();
            let lbn = LbnParams { e: d.e, b: d.b };
            let calib = CalibNetParams::from_affine(d.e, d.b);
            for (raw, truth) in rec.raw.samples.iter().zip(&traj.rates) {
                let a = lbn_forward(&lbn, *raw);
                let b = calib_forward(&calib, *raw);
                for i in 0..3 {
                    prop_assert!((a[i] - truth[i]).abs() < 1e-12);
                    prop_assert!((b[i] - truth[i]).abs() < 1e-12);
                }
            }
        }
    }
}
