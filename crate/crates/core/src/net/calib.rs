use crate::quat::Vec3;
use crate::scalar::Scalar;

use super::NetError;

/// Linear basic network: one affine map `E·ω + B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbnParams<T> {
    /// Row-major 3×3 matrix.
    pub e: [[T; 3]; 3],
    /// Bias, rad/s.
    pub b: [T; 3],
}

impl<T: Scalar> LbnParams<T> {
    pub const COUNT: usize = 12;

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            e: [[o, z, z], [z, o, z], [z, z, o]],
            b: [z; 3],
        }
    }

    pub fn zero() -> Self {
        Self {
            e: [[T::zero(); 3]; 3],
            b: [T::zero(); 3],
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> LbnParams<U> {
        LbnParams {
            e: self.e.map(|row| row.map(&mut f)),
            b: self.b.map(&mut f),
        }
    }
}

/// `E·ω + B`, each row accumulated as `b_i + e_i0 ω_0 + e_i1 ω_1 + e_i2 ω_2`.
pub fn lbn_forward<T: Scalar>(p: &LbnParams<T>, omega: Vec3<T>) -> Vec3<T> {
    [
        T::dot(&p.e[0], &omega, p.b[0]),
        T::dot(&p.e[1], &omega, p.b[1]),
        T::dot(&p.e[2], &omega, p.b[2]),
    ]
}

#[inline]
pub fn prelu<T: Scalar>(h: T, slope: T) -> T {
    if h >= T::zero() {
        h
    } else {
        slope * h
    }
}

/// Calibration subnet: two LBNs joined by a per-axis PReLU with a residual
/// path from the first LBN's output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibNetParams<T> {
    pub lbn1: LbnParams<T>,
    pub lbn2: LbnParams<T>,
    pub prelu_slopes: [T; 3],
}

impl<T> CalibNetParams<T> {
    pub const COUNT: usize = 27;
}

impl<T: Scalar> CalibNetParams<T> {
    /// Default initialization: identity first LBN, zero second LBN, slopes 0.25.
    /// The resulting map is exactly the identity.
    pub fn identity() -> Self {
        Self {
            lbn1: LbnParams::identity(),
            lbn2: LbnParams::zero(),
            prelu_slopes: [T::from_f64(0.25); 3],
        }
    }

    /// A single affine map `E·ω + B` expressed in the subnet.
    pub fn from_affine(e: [[T; 3]; 3], b: [T; 3]) -> Self {
        Self {
            lbn1: LbnParams { e, b },
            ..Self::identity()
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> CalibNetParams<U> {
        CalibNetParams {
            lbn1: self.lbn1.map(&mut f),
            lbn2: self.lbn2.map(&mut f),
            prelu_slopes: self.prelu_slopes.map(&mut f),
        }
    }

    /// Canonical order: lbn1.E row-major, lbn1.B, lbn2.E, lbn2.B, slopes.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(Self::COUNT);
        for lbn in [&self.lbn1, &self.lbn2] {
            v.extend(lbn.e.iter().flatten().copied());
            v.extend_from_slice(&lbn.b);
        }
        v.extend_from_slice(&self.prelu_slopes);
        v
    }

    pub fn from_slice(v: &[T]) -> Result<Self, NetError> {
        if v.len() != Self::COUNT {
            return Err(NetError::ParamCount {
                expected: Self::COUNT,
                got: v.len(),
            });
        }
        let lbn = |o: usize| LbnParams {
            e: [
                [v[o], v[o + 1], v[o + 2]],
                [v[o + 3], v[o + 4], v[o + 5]],
                [v[o + 6], v[o + 7], v[o + 8]],
            ],
            b: [v[o + 9], v[o + 10], v[o + 11]],
        };
        Ok(Self {
            lbn1: lbn(0),
            lbn2: lbn(12),
            prelu_slopes: [v[24], v[25], v[26]],
        })
    }

    /// Parameter names in canonical order.
    pub fn names() -> Vec<String> {
        let mut names = Vec::with_capacity(Self::COUNT);
        for lbn in ["lbn1", "lbn2"] {
            for i in 0..3 {
                for j in 0..3 {
                    names.push(format!("{lbn}.E[{i}][{j}]"));
                }
            }
            for i in 0..3 {
                names.push(format!("{lbn}.B[{i}]"));
            }
        }
        for i in 0..3 {
            names.push(format!("prelu[{i}]"));
        }
        names
    }
}

/// `y = LBN2(PReLU(LBN1(ω))) + LBN1(ω)`.
pub fn calib_forward<T: Scalar>(p: &CalibNetParams<T>, omega_raw: Vec3<T>) -> Vec3<T> {
    let h = lbn_forward(&p.lbn1, omega_raw);
    let a = [
        prelu(h[0], p.prelu_slopes[0]),
        prelu(h[1], p.prelu_slopes[1]),
        prelu(h[2], p.prelu_slopes[2]),
    ];
    let g = lbn_forward(&p.lbn2, a);
    [g[0] + h[0], g[1] + h[1], g[2] + h[2]]
}

/// Probes the subnet with the zero vector and the unit basis vectors:
/// `B = f(0)`, column `i` of `E` is `f(e_i) − f(0)`.
pub fn effective_affine<T: Scalar>(p: &CalibNetParams<T>) -> ([[f64; 3]; 3], [f64; 3]) {
    let p = p.map(|c| c.value());
    let b = calib_forward(&p, [0.0; 3]);
    let mut e = [[0.0; 3]; 3];
    for col in 0..3 {
        let mut basis = [0.0; 3];
        basis[col] = 1.0;
        let y = calib_forward(&p, basis);
        for row in 0..3 {
            e[row][col] = y[row] - b[row];
        }
    }
    (e, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_matvec(e: &[[f64; 3]; 3], b: &[f64; 3], w: &[f64; 3]) -> [f64; 3] {
        let mut out = *b;
        for i in 0..3 {
            for j in 0..3 {
                out[i] += e[i][j] * w[j];
            }
        }
        out
    }

    #[test]
    fn lbn_identity() {
        let p = LbnParams::<f64>::identity();
        assert_eq!(lbn_forward(&p, [0.1, -0.2, 0.3]), [0.1, -0.2, 0.3]);
    }

    #[test]
    fn lbn_scaled_with_bias() {
        let p = LbnParams {
            e: [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            b: [0.5, 0.0, 0.0],
        };
        assert_eq!(lbn_forward(&p, [1.0, 1.0, 1.0]), [2.5, 1.0, 1.0]);
    }

    #[test]
    fn lbn_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut u = || rng.random_range(-2.0..2.0);
        let p = LbnParams {
            e: [[u(), u(), u()], [u(), u(), u()], [u(), u(), u()]],
            b: [u(), u(), u()],
        };
        for _ in 0..1000 {
            let w = [u(), u(), u()];
            let got = lbn_forward(&p, w);
            let want = naive_matvec(&p.e, &p.b, &w);
            for k in 0..3 {
                assert!((got[k] - want[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn calib_identity_configuration() {
        let mut p = CalibNetParams::<f64>::identity();
        p.prelu_slopes = [1.0; 3];
        let w = [0.4, -1.3, 0.02];
        assert_eq!(calib_forward(&p, w), w);
        p.lbn2 = LbnParams::identity();
        assert_eq!(calib_forward(&p, w), [0.8, -2.6, 0.04]);
    }

    #[test]
    fn default_init_is_exact_identity() {
        let p = CalibNetParams::<f64>::identity();
        let (e, b) = effective_affine(&p);
        assert_eq!(b, [0.0; 3]);
        assert_eq!(e, LbnParams::<f64>::identity().e);
        assert_eq!(calib_forward(&p, [-0.3, 0.2, -5.0]), [-0.3, 0.2, -5.0]);
    }

    #[test]
    fn flatten_round_trip_and_names() {
        let v: Vec<f64> = (0..27).map(|i| i as f64).collect();
        let p = CalibNetParams::from_slice(&v).unwrap();
        assert_eq!(p.lbn1.e[1][2], 5.0);
        assert_eq!(p.lbn2.b[0], 21.0);
        assert_eq!(p.prelu_slopes[2], 26.0);
        assert_eq!(p.to_vec(), v);
        let names = CalibNetParams::<f64>::names();
        assert_eq!(names.len(), 27);
        assert_eq!(names[5], "lbn1.E[1][2]");
        assert_eq!(names[21], "lbn2.B[0]");
        assert!(CalibNetParams::from_slice(&v[..26]).is_err());
    }

    proptest! {
        #[test]
        fn unit_slope_subnet_is_affine(
            params in proptest::collection::vec(-1.5f64..1.5, 24),
            x in proptest::array::uniform3(-3.0f64..3.0),
            alpha in -4.0f64..4.0,
        ) {
            let mut v = params.clone();
            v.extend_from_slice(&[1.0, 1.0, 1.0]);
            let p = CalibNetParams::from_slice(&v).unwrap();
            let f0 = calib_forward(&p, [0.0; 3]);
            let fx = calib_forward(&p, x);
            let fax = calib_forward(&p, x.map(|c| alpha * c));
            for k in 0..3 {
                let lhs = fax[k] - f0[k];
                let rhs = alpha * (fx[k] - f0[k]);
                prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
