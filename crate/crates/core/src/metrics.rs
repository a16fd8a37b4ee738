//! Attitude-accuracy metrics and denoising diagnostics.
//!
//! Tracks are integrated open-loop from the truth's first attitude; nothing
//! here re-aligns an estimate to its reference.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::quat::{integrate_step, quat_to_euler, quat_to_rotmat, so3_log, QuatError, Vec3};
use crate::Quatd;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("timestamp {index} does not increase")]
    NonMonotonic { index: usize },
    #[error("tracks disagree at sample {index}: t = {left} vs {right}")]
    Misaligned { index: usize, left: f64, right: f64 },
    #[error("empty input")]
    Empty,
    #[error("signal of {len} samples is shorter than {min}")]
    TooShort { len: usize, min: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error(transparent)]
    Quat(#[from] QuatError),
}

/// Attitude at each timestamp (body to navigation frame).
#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeTrack {
    pub timestamps: Vec<f64>,
    pub attitudes: Vec<Quatd>,
}

impl AttitudeTrack {
    pub fn len(&self) -> usize {
        self.attitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attitudes.is_empty()
    }

    pub fn last(&self) -> Option<Quatd> {
        self.attitudes.last().copied()
    }
}

/// Open-loop strapdown integration. `omega[k]` acts over `[t_k, t_{k+1}]`,
/// so the rate at the final timestamp is never used.
pub fn integrate_sequence(omega: &[Vec3<f64>], q0: Quatd, timestamps: &[f64]) -> Result<AttitudeTrack, MetricError> {
    if omega.len() != timestamps.len() {
        return Err(MetricError::LengthMismatch {
            left: omega.len(),
            right: timestamps.len(),
        });
    }
    if timestamps.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut attitudes = Vec::with_capacity(timestamps.len());
    let mut q = q0.normalize()?;
    attitudes.push(q);
    for k in 1..timestamps.len() {
        let dt = timestamps[k] - timestamps[k - 1];
        if !(dt > 0.0) {
            return Err(MetricError::NonMonotonic { index: k });
        }
        q = integrate_step(q, omega[k - 1], dt)?;
        attitudes.push(q);
    }
    Ok(AttitudeTrack {
        timestamps: timestamps.to_vec(),
        attitudes,
    })
}

/// Timestamps may differ by this much and still count as the same instant.
pub const ALIGNMENT_TOLERANCE_S: f64 = 1e-6;

fn check_aligned(a: &AttitudeTrack, b: &AttitudeTrack) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    for (index, (&left, &right)) in a.timestamps.iter().zip(&b.timestamps).enumerate() {
        if !((left - right).abs() <= ALIGNMENT_TOLERANCE_S) {
            return Err(MetricError::Misaligned { index, left, right });
        }
    }
    Ok(())
}

/// Absolute orientation error in degrees: RMS over samples of the geodesic
/// angle of `R_nᵀ R̂_n`.
pub fn aoe(estimate: &AttitudeTrack, truth: &AttitudeTrack) -> Result<f64, MetricError> {
    check_aligned(estimate, truth)?;
    let mut sum = 0.0;
    for (est, tru) in estimate.attitudes.iter().zip(&truth.attitudes) {
        let r = quat_to_rotmat(*tru).transpose().mul_mat(&quat_to_rotmat(*est));
        let w = so3_log(&r)?;
        sum += w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    }
    Ok((sum / estimate.len() as f64).sqrt().to_degrees())
}

/// Pitch within this many degrees of ±90° makes roll and yaw unreliable.
pub const GIMBAL_MARGIN_DEG: f64 = 1.0;

/// Final-attitude error as Z-Y-X Euler differences, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointError {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub rmse: f64,
    pub near_gimbal_lock: bool,
}

impl fmt::Display for EndpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "roll {:.4}°  pitch {:.4}°  yaw {:.4}°  rmse {:.4}°",
            self.roll, self.pitch, self.yaw, self.rmse
        )?;
        if self.near_gimbal_lock {
            write!(f, "  (near gimbal lock)")?;
        }
        Ok(())
    }
}

/// Wraps an angle difference into `(−180°, 180°]`.
pub fn wrap_degrees(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// `estimate − reference` per Euler angle, wrapped, plus their RMS.
pub fn endpoint_error(estimate: Quatd, reference: Quatd) -> Result<EndpointError, MetricError> {
    estimate.check_unit()?;
    reference.check_unit()?;
    let e = quat_to_euler(estimate);
    let r = quat_to_euler(reference);
    let roll = wrap_degrees(e.roll - r.roll);
    let pitch = e.pitch - r.pitch;
    let yaw = wrap_degrees(e.yaw - r.yaw);
    let near = |p: f64| 90.0 - p.abs() < GIMBAL_MARGIN_DEG;
    Ok(EndpointError {
        roll,
        pitch,
        yaw,
        rmse: ((roll * roll + pitch * pitch + yaw * yaw) / 3.0).sqrt(),
        near_gimbal_lock: near(e.pitch) || near(r.pitch),
    })
}

pub const MIN_SPECTRUM_LEN: usize = 64;

/// One-sided power spectrum; `power` sums to the signal's variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Total power in bins with `lo < f ≤ hi`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(&f, _)| f > lo && f <= hi)
            .map(|(_, &p)| p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Frequency of the strongest bin.
    pub fn peak(&self) -> f64 {
        let mut best = 0;
        for (k, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = k;
            }
        }
        self.freqs[best]
    }
}

/// Periodogram of the mean-removed signal with a rectangular taper, bins
/// `0..=len/2` at spacing `rate/len`.
pub fn power_spectrum(signal: &[f64], rate_hz: f64) -> Result<Spectrum, MetricError> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(MetricError::InvalidRate(rate_hz));
    }
    let n = signal.len();
    if n < MIN_SPECTRUM_LEN {
        return Err(MetricError::TooShort {
            len: n,
            min: MIN_SPECTRUM_LEN,
        });
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let scale = 1.0 / (n as f64 * n as f64);
    let mut freqs = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, x) in buf.iter().take(half + 1).enumerate() {
        // interior bins carry their negative-frequency twin
        let twin = k != 0 && !(n % 2 == 0 && k == half);
        let p = x.norm_sqr() * scale;
        freqs.push(k as f64 * rate_hz / n as f64);
        power.push(if twin { 2.0 * p } else { p });
    }
    Ok(Spectrum { freqs, power })
}

pub const DEFAULT_CUTOFF_HZ: f64 = 20.0;

/// Before/after comparison of one denoised channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseReport {
    pub rate_hz: f64,
    pub cutoff_hz: f64,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub before_spectrum: Spectrum,
    pub after_spectrum: Spectrum,
    /// After/before power above the cutoff.
    pub high_band_power_ratio: f64,
    /// After/before RMS amplitude of the non-DC content at or below the cutoff.
    pub low_band_amplitude_ratio: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

pub fn denoise_report(before: &[f64], after: &[f64], rate_hz: f64, cutoff_hz: f64) -> Result<DenoiseReport, MetricError> {
    if before.len() != after.len() {
        return Err(MetricError::LengthMismatch {
            left: before.len(),
            right: after.len(),
        });
    }
    let before_spectrum = power_spectrum(before, rate_hz)?;
    let after_spectrum = power_spectrum(after, rate_hz)?;
    let nyquist = rate_hz / 2.0;
    let high = ratio(
        after_spectrum.band_power(cutoff_hz, nyquist),
        before_spectrum.band_power(cutoff_hz, nyquist),
    );
    let low = ratio(after_spectrum.band_power(0.0, cutoff_hz), before_spectrum.band_power(0.0, cutoff_hz)).sqrt();
    Ok(DenoiseReport {
        rate_hz,
        cutoff_hz,
        before: before.to_vec(),
        after: after.to_vec(),
        before_spectrum,
        after_spectrum,
        high_band_power_ratio: high,
        low_band_amplitude_ratio: low,
    })
}

impl DenoiseReport {
    pub fn summary(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("cutoff_hz", self.cutoff_hz),
            ("high_band_power_ratio", self.high_band_power_ratio),
            ("low_band_amplitude_ratio", self.low_band_amplitude_ratio),
        ]
    }

    /// `t,before,after` with `t = k / rate`.
    pub fn format_series(&self) -> String {
        let mut out = String::from("t,before,after\n");
        for (k, (b, a)) in self.before.iter().zip(&self.after).enumerate() {
            writeln!(out, "{},{b},{a}", k as f64 / self.rate_hz).expect("string write");
        }
        out
    }
}

impl EndpointError {
    pub fn summary(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("roll_deg", self.roll),
            ("pitch_deg", self.pitch),
            ("yaw_deg", self.yaw),
            ("rmse_deg", self.rmse),
            ("near_gimbal_lock", if self.near_gimbal_lock { 1.0 } else { 0.0 }),
        ]
    }
}

/// `t,roll,pitch,yaw` in degrees.
pub fn format_track_csv(track: &AttitudeTrack) -> String {
    let mut out = String::from("t,roll,pitch,yaw\n");
    for (t, q) in track.timestamps.iter().zip(&track.attitudes) {
        let e = quat_to_euler(*q);
        writeln!(out, "{t},{},{},{}", e.roll, e.pitch, e.yaw).expect("string write");
    }
    out
}

/// `f_hz,power`.
pub fn format_spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("f_hz,power\n");
    for (f, p) in s.freqs.iter().zip(&s.power) {
        writeln!(out, "{f},{p}").expect("string write");
    }
    out
}

/// `metric,value`.
pub fn format_summary_csv(rows: &[(&str, f64)]) -> String {
    let mut out = String::from("metric,value\n");
    for (name, value) in rows {
        writeln!(out, "{name},{value}").expect("string write");
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, contents: &str) -> std::io::Result<()> {
    fs::write(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{quat_from_euler, quat_from_rotvec, quat_mul};
    use crate::sim::{distort, gen_trajectory, DistortionGroundTruth, DistortionRange, MotionProfile};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, rate: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 / rate).collect()
    }

    fn track(attitudes: Vec<Quatd>) -> AttitudeTrack {
        AttitudeTrack {
            timestamps: grid(attitudes.len(), 100.0),
            attitudes,
        }
    }

    #[test]
    fn zero_rate_keeps_initial_attitude() {
        let q0 = quat_from_euler(0.1, -0.2, 0.3);
        let t = grid(50, 200.0);
        let tr = integrate_sequence(&vec![[0.0; 3]; 50], q0, &t).unwrap();
        assert!(tr.attitudes.iter().all(|q| (q.dot(q0) - 1.0).abs() < 1e-15));
    }

    #[test]
    fn constant_rate_closed_form() {
        let t = grid(2001, 200.0);
        let tr = integrate_sequence(&vec![[0.1, 0.0, 0.0]; 2001], Quatd::identity(), &t).unwrap();
        let expect = quat_from_rotvec([1.0, 0.0, 0.0]);
        let err = endpoint_error(tr.last().unwrap(), expect).unwrap();
        assert!(err.rmse < 0.01, "{err}");
        let angle = 2.0 * tr.last().unwrap().x.atan2(tr.last().unwrap().w);
        assert!((angle - 1.0).abs() < 0.01f64.to_radians());
    }

    #[test]
    fn recovers_simulated_truth() {
        let traj = gen_trajectory(3, 60.0, 200.0, &MotionProfile::random_smooth()).unwrap();
        let tr = integrate_sequence(&traj.rates, traj.attitudes[0], &traj.timestamps).unwrap();
        let truth = AttitudeTrack {
            timestamps: traj.timestamps.clone(),
            attitudes: traj.attitudes.clone(),
        };
        let worst = tr
            .attitudes
            .iter()
            .zip(&truth.attitudes)
            .map(|(a, b)| crate::quat::rotation_angle(quat_mul(a.conjugate(), *b)).to_degrees())
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "worst {worst}°");
        assert!(aoe(&tr, &truth).unwrap() < 0.05);
    }

    #[test]
    fn rejects_non_monotonic_time() {
        let err = integrate_sequence(&[[0.0; 3]; 3], Quatd::identity(), &[0.0, 0.1, 0.1]);
        assert!(matches!(err, Err(MetricError::NonMonotonic { index: 2 })));
        let err = integrate_sequence(&[[0.0; 3]; 2], Quatd::identity(), &[0.0]);
        assert!(matches!(err, Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn aoe_examples() {
        let base: Vec<Quatd> = (0..10).map(|k| quat_from_euler(0.1 * k as f64, 0.2, -0.3)).collect();
        let truth = track(base.clone());
        assert_eq!(aoe(&truth, &truth).unwrap(), 0.0);

        let one = quat_from_rotvec([0.0, 1f64.to_radians(), 0.0]);
        let shifted = track(base.iter().map(|q| quat_mul(*q, one)).collect());
        assert!((aoe(&shifted, &truth).unwrap() - 1.0).abs() < 1e-9);

        let mixed = track(
            base.iter()
                .enumerate()
                .map(|(k, q)| {
                    let deg: f64 = if k % 2 == 0 { 3.0 } else { 4.0 };
                    quat_mul(*q, quat_from_rotvec([deg.to_radians(), 0.0, 0.0]))
                })
                .collect(),
        );
        let expect = ((9.0 + 16.0) / 2.0f64).sqrt();
        assert!((aoe(&mixed, &truth).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn aoe_rejects_misaligned_tracks() {
        let a = track(vec![Quatd::identity(); 4]);
        let mut b = a.clone();
        b.timestamps[2] += 0.01;
        assert!(matches!(aoe(&a, &b), Err(MetricError::Misaligned { index: 2, .. })));
        b.attitudes.pop();
        b.timestamps.pop();
        assert!(matches!(aoe(&a, &b), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn aoe_shrinks_with_distortion() {
        let traj = gen_trajectory(5, 20.0, 200.0, &MotionProfile::random_smooth()).unwrap();
        let truth = AttitudeTrack {
            timestamps: traj.timestamps.clone(),
            attitudes: traj.attitudes.clone(),
        };
        let full = DistortionGroundTruth::sample(11, &DistortionRange::default());
        let mut last = f64::INFINITY;
        for level in [1.0, 0.5, 0.0] {
            let mut d = DistortionGroundTruth::identity();
            for i in 0..3 {
                for j in 0..3 {
                    let eye = if i == j { 1.0 } else { 0.0 };
                    d.e[i][j] = eye + level * (full.e[i][j] - eye);
                }
                d.b[i] = level * full.b[i];
            }
            let raw = distort(&traj, &d, 0).unwrap().raw;
            let est = integrate_sequence(&raw.samples, traj.attitudes[0], &raw.timestamps).unwrap();
            let v = aoe(&est, &truth).unwrap();
            assert!(v <= last, "level {level}: {v} > {last}");
            last = v;
        }
        assert!(last < 0.05);
    }

    #[test]
    fn endpoint_examples() {
        let q = quat_from_euler(0.3, -0.2, 1.0);
        let e = endpoint_error(q, q).unwrap();
        assert_eq!((e.roll, e.pitch, e.yaw, e.rmse), (0.0, 0.0, 0.0, 0.0));
        assert!(!e.near_gimbal_lock);

        let a = quat_from_euler(0.0, 0.0, 179f64.to_radians());
        let b = quat_from_euler(0.0, 0.0, -179f64.to_radians());
        let e = endpoint_error(a, b).unwrap();
        assert!((e.yaw + 2.0).abs() < 1e-9, "{e}");
        assert!((e.rmse - (4.0f64 / 3.0).sqrt()).abs() < 1e-9);

        let c = quat_from_euler(0.0, 89.5f64.to_radians(), 0.0);
        assert!(endpoint_error(c, Quatd::identity()).unwrap().near_gimbal_lock);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(-358.0), 2.0);
    }

    #[test]
    fn sinusoid_peak() {
        let x: Vec<f64> = (0..1000)
            .map(|k| (2.0 * std::f64::consts::PI * 5.0 * k as f64 / 200.0).sin())
            .collect();
        let s = power_spectrum(&x, 200.0).unwrap();
        assert_eq!(s.peak(), 5.0);
        assert_eq!(*s.freqs.last().unwrap(), 100.0);
        // all power of a bin-centred tone lands in one bin
        assert!((s.power[25] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn white_noise_is_flat() {
        let n = 256;
        let mut avg = vec![0.0; n / 2 + 1];
        let normal = Normal::new(0.0, 1.0).unwrap();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let s = power_spectrum(&x, 200.0).unwrap();
            for (a, p) in avg.iter_mut().zip(&s.power) {
                *a += p / 100.0;
            }
        }
        // DC is removed and Nyquist is single-sided
        let interior = &mut avg[1..n / 2].to_vec();
        interior.sort_by(f64::total_cmp);
        let median = interior[interior.len() / 2];
        assert!(interior.iter().all(|&p| p < 10.0 * median));
        assert!(*interior.first().unwrap() > median / 10.0);
    }

    #[test]
    fn constant_signal_has_no_power() {
        let s = power_spectrum(&vec![3.7; 128], 100.0).unwrap();
        assert!(s.power.iter().all(|&p| p < 1e-20));
        assert!(matches!(
            power_spectrum(&[0.0; 63], 100.0),
            Err(MetricError::TooShort { len: 63, min: 64 })
        ));
    }

    fn ideal_low_pass(x: &[f64], rate: f64, cutoff: f64) -> Vec<f64> {
        let n = x.len();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            let f = k.min(n - k) as f64 * rate / n as f64;
            if f > cutoff {
                *c = Complex::new(0.0, 0.0);
            }
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }

    #[test]
    fn report_ratios() {
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..2048)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 / 200.0).sin() + normal.sample(&mut rng))
            .collect();
        let same = denoise_report(&x, &x, 200.0, DEFAULT_CUTOFF_HZ).unwrap();
        assert_eq!(same.high_band_power_ratio, 1.0);
        assert_eq!(same.low_band_amplitude_ratio, 1.0);

        let filtered = ideal_low_pass(&x, 200.0, DEFAULT_CUTOFF_HZ);
        let r = denoise_report(&x, &filtered, 200.0, DEFAULT_CUTOFF_HZ).unwrap();
        assert!(r.high_band_power_ratio < 1e-20);
        assert!((r.low_band_amplitude_ratio - 1.0).abs() < 1e-9);
        assert!(denoise_report(&x, &x[1..], 200.0, 20.0).is_err());
    }

    #[test]
    fn csv_headers() {
        let tr = track(vec![Quatd::identity(); 2]);
        assert!(format_track_csv(&tr).starts_with("t,roll,pitch,yaw\n0,0,0,0\n"));
        let s = power_spectrum(&vec![0.0; 64], 64.0).unwrap();
        let csv = format_spectrum_csv(&s);
        assert!(csv.starts_with("f_hz,power\n0,0\n1,0\n"));
        assert_eq!(csv.lines().count(), 1 + 33);
        assert_eq!(format_summary_csv(&[("aoe_deg", 1.5)]), "metric,value\naoe_deg,1.5\n");
    }

    fn unit_quat() -> impl Strategy<Value = Quatd> {
        (-3.0..3.0f64, -1.5..1.5f64, -3.0..3.0f64).prop_map(|(r, p, y)| quat_from_euler(r, p, y))
    }

    proptest! {
        #[test]
        fn aoe_nonnegative_and_left_invariant(
            pairs in prop::collection::vec((unit_quat(), unit_quat()), 1..20),
            left in unit_quat(),
        ) {
            let est = track(pairs.iter().map(|p| p.0).collect());
            let tru = track(pairs.iter().map(|p| p.1).collect());
            let base = aoe(&est, &tru).unwrap();
            prop_assert!(base >= 0.0);
            let rot = |t: &AttitudeTrack| track(t.attitudes.iter().map(|q| quat_mul(left, *q)).collect());
            let moved = aoe(&rot(&est), &rot(&tru)).unwrap();
            prop_assert!((base - moved).abs() < 1e-6, "{} vs {}", base, moved);
        }

        #[test]
        fn parseval(x in prop::collection::vec(-10.0..10.0f64, 64..300)) {
            let s = power_spectrum(&x, 50.0).unwrap();
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
            prop_assert!((s.total() - var).abs() <= 1e-9 * var.max(1.0));
        }
    }
}
