//! Quaternion and rotation algebra.
//!
//! Quaternions are Hamilton-convention, scalar first, and represent the
//! rotation from the body frame to the north-east-down navigation frame.
//! Euler angles follow the Z-Y-X (yaw, pitch, roll) intrinsic sequence.

use std::ops::{Mul, Neg};

use thiserror::Error;

use crate::scalar::{Real, Scalar};

pub type Vec3<T> = [T; 3];

/// Tolerance on `|‖q‖ − 1|` accepted by operations that require unit input.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Standard gravity used for quasi-static checks, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuatError {
    #[error("non-finite input")]
    NonFinite,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("cannot normalize a zero-norm quaternion")]
    ZeroNorm,
    #[error("quaternion is not unit (norm {0})")]
    NotUnit(f64),
    #[error("matrix is not a rotation (orthogonality defect {defect:.3e}, det {det})")]
    NotRotation { defect: f64, det: f64 },
    #[error("accelerometer norm {0:.3} m/s² is not quasi-static")]
    NotStatic(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> Quat<T> {
    pub const fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }
}

impl<T: Scalar> Quat<T> {
    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Pure quaternion `(0, v)`.
    pub fn pure(v: Vec3<T>) -> Self {
        Self::new(T::zero(), v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn vector(self) -> Vec3<T> {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().square_root()
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn is_finite(self) -> bool {
        self.w.finite() && self.x.finite() && self.y.finite() && self.z.finite()
    }

    pub fn normalize(self) -> Result<Self, QuatError> {
        let n = self.norm();
        if n.value() == 0.0 {
            return Err(QuatError::ZeroNorm);
        }
        if !n.finite() {
            return Err(QuatError::NonFinite);
        }
        Ok(Self::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    /// Fails unless `|‖q‖ − 1| ≤ UNIT_TOLERANCE`.
    pub fn check_unit(self) -> Result<(), QuatError> {
        let n = self.norm().value();
        if !n.is_finite() {
            return Err(QuatError::NonFinite);
        }
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(QuatError::NotUnit(n));
        }
        Ok(())
    }

    /// Lifts every component through `f`.
    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Quat<U> {
        Quat::new(f(self.w), f(self.x), f(self.y), f(self.z))
    }

    pub fn values(self) -> Quat<f64> {
        self.map(|c| c.value())
    }

    /// Sign-flipped copy of `self` lying in the same hemisphere as `reference`.
    pub fn aligned_to(self, reference: Self) -> Self {
        if self.dot(reference).value() < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Rotates a body-frame vector into the navigation frame.
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let r = self * Quat::pure(v) * self.conjugate();
        r.vector()
    }
}

/// Hamilton product `a ⊗ b`.
pub fn quat_mul<T: Scalar>(a: Quat<T>, b: Quat<T>) -> Quat<T> {
    Quat::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

impl<T: Scalar> Mul for Quat<T> {
    type Output = Quat<T>;
    fn mul(self, rhs: Self) -> Self {
        quat_mul(self, rhs)
    }
}

impl<T: Scalar> Neg for Quat<T> {
    type Output = Quat<T>;
    fn neg(self) -> Self {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// One first-order strapdown step `normalize(q ⊗ [1, ω·dt/2])`.
pub fn integrate_step<T: Scalar>(q: Quat<T>, omega: Vec3<T>, dt: T) -> Result<Quat<T>, QuatError> {
    if !dt.finite() || !q.is_finite() || omega.iter().any(|c| !c.finite()) {
        return Err(QuatError::NonFinite);
    }
    if dt.value() <= 0.0 {
        return Err(QuatError::NonPositiveStep(dt.value()));
    }
    let half = dt * T::from_f64(0.5);
    let delta = Quat::new(T::one(), omega[0] * half, omega[1] * half, omega[2] * half);
    (q * delta).normalize()
}

/// Component-wise quaternion distance after hemisphere alignment:
/// `sqrt(Σ (a_s − b'_s)²)` where `b' = ±b` with `a·b' ≥ 0`.
pub fn quat_diff<T: Scalar>(a: Quat<T>, b: Quat<T>) -> Result<T, QuatError> {
    a.check_unit()?;
    b.check_unit()?;
    let b = b.aligned_to(a);
    let dw = a.w - b.w;
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    Ok((dw * dw + dx * dx + dy * dy + dz * dz).square_root())
}

/// Rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat<T>(pub [[T; 3]; 3]);

/// Tolerance used when validating [`RotMat`] inputs.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

impl<T: Real> RotMat<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        RotMat([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotMat([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut r = [[T::zero(); 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).fold(T::zero(), |acc, k| acc + self.0[i][k] * o.0[k][j]);
            }
        }
        RotMat(r)
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthogonality_defect(&self) -> T {
        let p = self.transpose().mul_mat(self);
        let mut worst = T::zero();
        for (i, row) in p.0.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// Orthogonal with determinant +1 within `tol`.
    pub fn validate(&self, tol: f64) -> Result<(), QuatError> {
        let defect = Scalar::value(self.orthogonality_defect());
        let det = Scalar::value(self.determinant());
        if !defect.is_finite() || !det.is_finite() {
            return Err(QuatError::NonFinite);
        }
        if defect > tol || (det - 1.0).abs() > tol {
            return Err(QuatError::NotRotation { defect, det });
        }
        Ok(())
    }
}

pub fn quat_to_rotmat<T: Real>(q: Quat<T>) -> RotMat<T> {
    let two = T::one() + T::one();
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    RotMat([
        [
            T::one() - two * (y * y + z * z),
            two * (x * y - w * z),
            two * (x * z + w * y),
        ],
        [
            two * (x * y + w * z),
            T::one() - two * (x * x + z * z),
            two * (y * z - w * x),
        ],
        [
            two * (x * z - w * y),
            two * (y * z + w * x),
            T::one() - two * (x * x + y * y),
        ],
    ])
}

/// SO(3) logarithm: axis-angle vector with norm in `[0, π]`.
pub fn so3_log<T: Real>(r: &RotMat<T>) -> Result<Vec3<T>, QuatError> {
    r.validate(ROTATION_TOLERANCE.max(Scalar::value(T::epsilon()) * 64.0))?;
    Ok(so3_log_unchecked(r))
}

pub(crate) fn so3_log_unchecked<T: Real>(r: &RotMat<T>) -> Vec3<T> {
    let m = &r.0;
    let half = T::from_f64(0.5);
    // vee(R − Rᵀ)/2 = sinθ·u
    let s = [
        (m[2][1] - m[1][2]) * half,
        (m[0][2] - m[2][0]) * half,
        (m[1][0] - m[0][1]) * half,
    ];
    let sin_theta = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let cos_theta = ((m[0][0] + m[1][1] + m[2][2] - T::one()) * half).max(-T::one()).min(T::one());
    let theta = sin_theta.atan2(cos_theta);

    if cos_theta > T::from_f64(-0.9) {
        // θ/sinθ → 1 as θ → 0
        let k = if sin_theta > T::from_f64(1e-12) {
            theta / sin_theta
        } else {
            T::one() + theta * theta / T::from_f64(6.0)
        };
        return [s[0] * k, s[1] * k, s[2] * k];
    }

    // Near π: (R + Rᵀ)/2 − cosθ·I = (1 − cosθ)·u uᵀ
    let one_minus_cos = T::one() - cos_theta;
    let b = |i: usize, j: usize| {
        let v = (m[i][j] + m[j][i]) * half;
        if i == j {
            v - cos_theta
        } else {
            v
        }
    };
    let pivot = (0..3)
        .max_by(|&i, &j| b(i, i).partial_cmp(&b(j, j)).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let up = (b(pivot, pivot) / one_minus_cos).max(T::zero()).sqrt();
    let mut u = [T::zero(); 3];
    for (j, uj) in u.iter_mut().enumerate() {
        *uj = if j == pivot {
            up
        } else {
            b(pivot, j) / (one_minus_cos * up)
        };
    }
    let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let mut sign = T::one() / norm;
    if u[0] * s[0] + u[1] * s[1] + u[2] * s[2] < T::zero() {
        sign = -sign;
    }
    [u[0] * sign * theta, u[1] * sign * theta, u[2] * sign * theta]
}

/// Unit quaternion rotating by `|v|` radians about `v/|v|`.
pub fn quat_from_rotvec<T: Real>(v: Vec3<T>) -> Quat<T> {
    let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let half = angle * T::from_f64(0.5);
    let k = if angle > T::from_f64(1e-12) {
        half.sin() / angle
    } else {
        T::from_f64(0.5) - angle * angle / T::from_f64(48.0)
    };
    Quat::new(half.cos(), v[0] * k, v[1] * k, v[2] * k)
}

/// Rotation angle of a unit quaternion, in `[0, π]`.
pub fn rotation_angle<T: Real>(q: Quat<T>) -> T {
    let v = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
    (v.atan2(q.w.abs())) * T::from_f64(2.0)
}

/// Z-Y-X Euler angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// `|pitch|` within 1e-6° of 90°: roll and yaw are not separable.
    pub gimbal_lock: bool,
}

pub fn quat_to_euler<T: Real>(q: Quat<T>) -> EulerAngles {
    let q = q.values();
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    let pitch_deg = pitch.to_degrees();
    EulerAngles {
        roll: roll.to_degrees(),
        pitch: pitch_deg,
        yaw: yaw.to_degrees(),
        gimbal_lock: 90.0 - pitch_deg.abs() < 1e-6,
    }
}

/// Quaternion from Z-Y-X Euler angles given in radians.
pub fn quat_from_euler<T: Real>(roll: T, pitch: T, yaw: T) -> Quat<T> {
    let h = T::from_f64(0.5);
    let (sr, cr) = (roll * h).sin_cos();
    let (sp, cp) = (pitch * h).sin_cos();
    let (sy, cy) = (yaw * h).sin_cos();
    Quat::new(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )
}

/// Roll/pitch attitude from a quasi-static accelerometer reading; yaw is 0.
///
/// The accelerometer measures specific force, so a level body with z down
/// reads `(0, 0, −g)`.
pub fn quat_from_gravity<T: Real>(accel: Vec3<T>) -> Result<Quat<T>, QuatError> {
    let a = accel.map(|c| c.value());
    if a.iter().any(|c| !c.is_finite()) {
        return Err(QuatError::NonFinite);
    }
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if (n - GRAVITY).abs() > 0.2 * GRAVITY {
        return Err(QuatError::NotStatic(n));
    }
    let roll = (-a[1]).atan2(-a[2]);
    let pitch = a[0].atan2((a[1] * a[1] + a[2] * a[2]).sqrt());
    Ok(quat_from_euler(roll, pitch, 0.0).map(T::from_f64))
}

/// Spherical linear interpolation from `a` (t = 0) to `b` (t = 1), taking the
/// short path.
pub fn slerp<T: Real>(a: Quat<T>, b: Quat<T>, t: T) -> Quat<T> {
    let b = b.aligned_to(a);
    let cos = a.dot(b).min(T::one());
    if cos > T::from_f64(1.0 - 1e-10) {
        let q = Quat::new(
            a.w + (b.w - a.w) * t,
            a.x + (b.x - a.x) * t,
            a.y + (b.y - a.y) * t,
            a.z + (b.z - a.z) * t,
        );
        return q.normalize().unwrap_or(a);
    }
    let theta = cos.acos();
    let sin = theta.sin();
    let ka = ((T::one() - t) * theta).sin() / sin;
    let kb = (t * theta).sin() / sin;
    Quat::new(
        a.w * ka + b.w * kb,
        a.x * ka + b.x * kb,
        a.y * ka + b.y * kb,
        a.z * ka + b.z * kb,
    )
}
