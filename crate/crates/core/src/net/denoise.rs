use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

use super::NetError;

/// Negative-side slope of every LeakyReLU in the denoiser (not trained).
pub const LEAKY_SLOPE: f64 = 0.01;

/// `(in_channels, out_channels, taps)` of the three convolution layers.
pub const LAYER_SHAPES: [(usize, usize, usize); 3] = [(1, 4, 7), (4, 5, 5), (5, 1, 6)];

/// Samples seen by one output of the valid convolution stack.
pub const RECEPTIVE_FIELD: usize = 7 + (5 - 1) + (6 - 1);

#[inline]
pub fn leaky_relu<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x * T::from_f64(LEAKY_SLOPE)
    }
}

/// One 1-D convolution layer. Weights are stored `[out][in][tap]`; tap
/// `taps − 1` multiplies the newest sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub taps: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, taps: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            taps,
            weights: vec![T::zero(); out_channels * in_channels * taps],
            bias: vec![T::zero(); out_channels],
        }
    }

    #[inline]
    fn index(&self, out: usize, input: usize, tap: usize) -> usize {
        (out * self.in_channels + input) * self.taps + tap
    }

    pub fn weight_mut(&mut self, out: usize, input: usize, tap: usize) -> &mut T {
        let i = self.index(out, input, tap);
        &mut self.weights[i]
    }

    /// Valid (unpadded) cross-correlation followed by LeakyReLU.
    fn forward(&self, input: &[Vec<T>]) -> Vec<Vec<T>> {
        debug_assert_eq!(input.len(), self.in_channels);
        let len = input[0].len() + 1 - self.taps;
        let mut gathered = Vec::with_capacity(self.in_channels * self.taps);
        let mut out = vec![Vec::with_capacity(len); self.out_channels];
        for p in 0..len {
            gathered.clear();
            for channel in input {
                gathered.extend_from_slice(&channel[p..p + self.taps]);
            }
            for (o, column) in out.iter_mut().enumerate() {
                let w = &self.weights[self.index(o, 0, 0)..self.index(o + 1, 0, 0)];
                column.push(leaky_relu(T::dot(w, &gathered, self.bias[o])));
            }
        }
        out
    }

    fn map<U>(&self, f: &mut impl FnMut(T) -> U) -> ConvLayer<U> {
        ConvLayer {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            taps: self.taps,
            weights: self.weights.iter().map(|&w| f(w)).collect(),
            bias: self.bias.iter().map(|&b| f(b)).collect(),
        }
    }
}

/// Three conv + LeakyReLU layers, shared by all three axes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseNetParams<T> {
    pub layers: [ConvLayer<T>; 3],
}

impl<T> DenoiseNetParams<T> {
    pub const COUNT: usize = 168;
}

impl<T: Scalar> DenoiseNetParams<T> {
    pub fn zeros() -> Self {
        Self {
            layers: LAYER_SHAPES.map(|(i, o, k)| ConvLayer::zeros(i, o, k)),
        }
    }

    /// Every weight and bias drawn uniformly from `±0.05`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros();
        for layer in &mut p.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = T::from_f64(rng.random_range(-0.05..=0.05));
            }
        }
        p
    }

    /// Weights under which the network returns the newest window sample for
    /// either sign.
    ///
    /// The signal is split into `lrelu(x)` and `lrelu(−x)` channels, whose
    /// difference is `(1 + a)·x`; the final layer reads only the negative
    /// channel with gain `−1/a`, which the closing LeakyReLU maps back to `x`.
    pub fn pass_through() -> Self {
        let a = LEAKY_SLOPE;
        let s = 1.0 / (1.0 + a);
        let mut p = Self::zeros();
        let [l1, l2, l3] = &mut p.layers;
        let newest1 = l1.taps - 1;
        *l1.weight_mut(0, 0, newest1) = T::one();
        *l1.weight_mut(1, 0, newest1) = -T::one();
        let newest2 = l2.taps - 1;
        *l2.weight_mut(0, 0, newest2) = T::from_f64(s);
        *l2.weight_mut(0, 1, newest2) = T::from_f64(-s);
        *l2.weight_mut(1, 0, newest2) = T::from_f64(-s);
        *l2.weight_mut(1, 1, newest2) = T::from_f64(s);
        let newest3 = l3.taps - 1;
        *l3.weight_mut(0, 1, newest3) = T::from_f64(-1.0 / a);
        p
    }

    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> DenoiseNetParams<U> {
        let [a, b, c] = &self.layers;
        DenoiseNetParams {
            layers: [a.map(&mut f), b.map(&mut f), c.map(&mut f)],
        }
    }

    /// Canonical order: per layer, weights `[out][in][tap]` then biases.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(Self::COUNT);
        for layer in &self.layers {
            v.extend_from_slice(&layer.weights);
            v.extend_from_slice(&layer.bias);
        }
        v
    }

    pub fn from_slice(v: &[T]) -> Result<Self, NetError> {
        if v.len() != Self::COUNT {
            return Err(NetError::ParamCount {
                expected: Self::COUNT,
                got: v.len(),
            });
        }
        let mut p = Self::zeros();
        let mut at = 0;
        for layer in &mut p.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&v[at..at + nw]);
            at += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&v[at..at + nb]);
            at += nb;
        }
        Ok(p)
    }

    pub fn names() -> Vec<String> {
        let mut names = Vec::with_capacity(Self::COUNT);
        for (l, &(i, o, k)) in LAYER_SHAPES.iter().enumerate() {
            for oc in 0..o {
                for ic in 0..i {
                    for t in 0..k {
                        names.push(format!("conv{}.w[{oc}][{ic}][{t}]", l + 1));
                    }
                }
            }
            for oc in 0..o {
                names.push(format!("conv{}.b[{oc}]", l + 1));
            }
        }
        names
    }

    fn run(&self, samples: &[T]) -> Vec<T> {
        let mut x = vec![samples.to_vec()];
        for layer in &self.layers {
            x = layer.forward(&x);
        }
        x.swap_remove(0)
    }
}

/// Denoised estimate at the newest sample of `window`.
pub fn denoise_forward<T: Scalar>(p: &DenoiseNetParams<T>, window: &[T]) -> Result<T, NetError> {
    if window.len() < RECEPTIVE_FIELD {
        return Err(NetError::WindowTooShort {
            len: window.len(),
            needed: RECEPTIVE_FIELD,
        });
    }
    let out = p.run(&window[window.len() - RECEPTIVE_FIELD..]);
    Ok(out[out.len() - 1])
}

/// Slides a window of `window` samples over one axis. Samples before index
/// `window − 1` pass through unchanged.
///
/// The stack is evaluated once over the whole sequence; output `k` only sees
/// samples `k − 15 ..= k`, so the result is identical to calling
/// [`denoise_forward`] on each window.
pub fn denoise_sequence<T: Scalar>(p: &DenoiseNetParams<T>, seq: &[T], window: usize) -> Result<Vec<T>, NetError> {
    if window < RECEPTIVE_FIELD {
        return Err(NetError::WindowTooShort {
            len: window,
            needed: RECEPTIVE_FIELD,
        });
    }
    if seq.len() < window {
        return Err(NetError::SequenceTooShort { len: seq.len(), window });
    }
    let first = window - 1;
    let mut out = seq[..first].to_vec();
    out.extend(p.run(&seq[first + 1 - RECEPTIVE_FIELD..]));
    debug_assert_eq!(out.len(), seq.len());
    Ok(out)
}

/// [`denoise_sequence`] applied to each axis independently.
pub fn denoise_sequence_axes<T: Scalar>(
    p: &DenoiseNetParams<T>,
    seq: &[[T; 3]],
    window: usize,
) -> Result<Vec<[T; 3]>, NetError> {
    let mut axes = Vec::with_capacity(3);
    for axis in 0..3 {
        let column: Vec<T> = seq.iter().map(|s| s[axis]).collect();
        axes.push(denoise_sequence(p, &column, window)?);
    }
    Ok((0..seq.len()).map(|k| [axes[0][k], axes[1][k], axes[2][k]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn receptive_field_is_sixteen() {
        assert_eq!(RECEPTIVE_FIELD, 16);
    }

    #[test]
    fn pass_through_returns_newest_sample() {
        let p = DenoiseNetParams::<f64>::pass_through();
        let window: Vec<f64> = (0..50).map(|i| ((i as f64) * 0.37).sin()).collect();
        let y = denoise_forward(&p, &window).unwrap();
        assert!((y - window[49]).abs() < 1e-15, "{y} vs {}", window[49]);
        for c in [0.0, 1.25, -0.8] {
            let y = denoise_forward(&p, &[c; 50]).unwrap();
            assert!((y - c).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = DenoiseNetParams::<f64>::zeros();
        assert_eq!(denoise_forward(&p, &[0.3; 50]).unwrap(), 0.0);
    }

    #[test]
    fn short_window_is_rejected() {
        let p = DenoiseNetParams::<f64>::zeros();
        assert_eq!(
            denoise_forward(&p, &[0.0; 15]),
            Err(NetError::WindowTooShort { len: 15, needed: 16 })
        );
    }

    #[test]
    fn sequence_of_window_length_has_one_output() {
        let p = DenoiseNetParams::<f64>::random(3);
        let seq: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        let out = denoise_sequence(&p, &seq, 50).unwrap();
        assert_eq!(out.len(), 50);
        assert_eq!(&out[..49], &seq[..49]);
        assert_eq!(out[49], denoise_forward(&p, &seq).unwrap());
    }

    #[test]
    fn sequence_matches_windowed_forward_bit_for_bit() {
        let p = DenoiseNetParams::<f64>::random(11);
        let seq: Vec<f64> = (0..200).map(|i| (i as f64 * 0.13).cos() - 0.2).collect();
        let n = 50;
        let out = denoise_sequence(&p, &seq, n).unwrap();
        for k in n - 1..seq.len() {
            let w = denoise_forward(&p, &seq[k + 1 - n..=k]).unwrap();
            assert_eq!(out[k].to_bits(), w.to_bits(), "k = {k}");
        }
    }

    #[test]
    fn flatten_round_trip() {
        let p = DenoiseNetParams::<f64>::random(5);
        let v = p.to_vec();
        assert_eq!(v.len(), 168);
        assert_eq!(DenoiseNetParams::from_slice(&v).unwrap(), p);
        let names = DenoiseNetParams::<f64>::names();
        assert_eq!(names.len(), 168);
        assert_eq!(names[28], "conv1.b[0]");
        assert_eq!(names[167], "conv3.b[0]");
    }

    #[test]
    fn random_init_is_bounded_and_seeded() {
        let a = DenoiseNetParams::<f64>::random(1);
        assert!(a.to_vec().iter().all(|w| w.abs() <= 0.05));
        assert_eq!(a, DenoiseNetParams::random(1));
        assert_ne!(a, DenoiseNetParams::random(2));
    }

    proptest! {
        #[test]
        fn causal_and_axis_independent(
            seed in 0u64..1000,
            data in proptest::collection::vec(proptest::array::uniform3(-2.0f64..2.0), 120),
            k in 60usize..120,
            bump in 0.1f64..1.0,
        ) {
            let n = 30;
            let p = DenoiseNetParams::<f64>::random(seed);
            let base = denoise_sequence_axes(&p, &data, n).unwrap();

            // perturb a sample strictly before window [k−n+1, k]
            let mut before = data.clone();
            before[k - n][1] += bump;
            let out = denoise_sequence_axes(&p, &before, n).unwrap();
            prop_assert_eq!(out[k], base[k]);

            // perturb x only
            let mut xonly = data.clone();
            for s in xonly.iter_mut() {
                s[0] += bump;
            }
            let out = denoise_sequence_axes(&p, &xonly, n).unwrap();
            for j in 0..data.len() {
                prop_assert_eq!(out[j][1], base[j][1]);
                prop_assert_eq!(out[j][2], base[j][2]);
            }
        }
    }
}
