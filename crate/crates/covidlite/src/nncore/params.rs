//! Trainable parameter blocks and their Glorot-uniform initializers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Scalar, TensorOf};

/// Standard convolution weights: spatial K x K, M input and N output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    /// Kernel, shape [K, K, M, N].
    pub kernel: TensorOf<T>,
    /// Per-output-channel bias, shape [N].
    pub bias: TensorOf<T>,
}

/// Depth-separable convolution weights. The bias is attached to the
/// pointwise stage only.
#[derive(Debug, Clone, PartialEq)]
pub struct SepConvParams<T> {
    /// One K x K filter per input channel, shape [K, K, M].
    pub depthwise: TensorOf<T>,
    /// 1x1 cross-channel mix, shape [M, N].
    pub pointwise: TensorOf<T>,
    /// Bias on the pointwise output, shape [N].
    pub bias: TensorOf<T>,
}

/// Batch-normalization state: gamma/beta train, the moving statistics do not.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: TensorOf<T>,
    pub beta: TensorOf<T>,
    pub moving_mean: TensorOf<T>,
    pub moving_var: TensorOf<T>,
    pub momentum: T,
    pub epsilon: T,
}

/// Fully connected layer, `y = x W + b` with W of shape [in, out].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub weight: TensorOf<T>,
    pub bias: TensorOf<T>,
}

/// Glorot-uniform sample: U(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
fn glorot_uniform<T: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> TensorOf<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..shape.iter().product::<usize>())
        .map(|_| T::from_f64(rng.random_range(-limit..limit)))
        .collect();
    TensorOf::from_vec(shape, data)
}

impl<T: Scalar> ConvParams<T> {
    /// Glorot-uniform kernel (fans scaled by the receptive field), zero bias.
    pub fn glorot(k: usize, in_ch: usize, out_ch: usize, rng: &mut ChaCha8Rng) -> Self {
        let rf = k * k;
        Self {
            kernel: glorot_uniform(&[k, k, in_ch, out_ch], rf * in_ch, rf * out_ch, rng),
            bias: TensorOf::zeros(&[out_ch]),
        }
    }
}

impl<T: Scalar> SepConvParams<T> {
    pub fn glorot(k: usize, in_ch: usize, out_ch: usize, rng: &mut ChaCha8Rng) -> Self {
        let rf = k * k;
        Self {
            depthwise: glorot_uniform(&[k, k, in_ch], rf * in_ch, rf, rng),
            pointwise: glorot_uniform(&[in_ch, out_ch], in_ch, out_ch, rng),
            bias: TensorOf::zeros(&[out_ch]),
        }
    }
}

impl<T: Scalar> BatchNormParams<T> {
    /// gamma = 1, beta = 0, moving stats at the identity transform.
    pub fn identity(channels: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: TensorOf::filled(&[channels], T::one()),
            beta: TensorOf::zeros(&[channels]),
            moving_mean: TensorOf::zeros(&[channels]),
            moving_var: TensorOf::filled(&[channels], T::one()),
            momentum: T::from_f64(momentum),
            epsilon: T::from_f64(epsilon),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

impl<T: Scalar> DenseParams<T> {
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: glorot_uniform(&[in_dim, out_dim], in_dim, out_dim, rng),
            bias: TensorOf::zeros(&[out_dim]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: ConvParams<f32> = ConvParams::glorot(3, 8, 16, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: ConvParams<f32> = ConvParams::glorot(3, 8, 16, &mut rng);
        assert_eq!(a, b);
        let limit = (6.0f64 / (9.0 * 8.0 + 9.0 * 16.0)).sqrt() as f32;
        assert!(a.kernel.data().iter().all(|v| v.abs() < limit));
        assert!(a.bias.data().iter().all(|&v| v == 0.0));
    }
}
