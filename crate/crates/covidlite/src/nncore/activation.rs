//! ReLU and inverted dropout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Scalar, TensorOf};

/// Elementwise max(0, x).
pub fn relu<T: Scalar>(x: &TensorOf<T>) -> TensorOf<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient passes where x > 0 and is zero where x <= 0 (the subgradient at
/// exactly 0 is defined as 0).
pub fn relu_backward<T: Scalar>(x: &TensorOf<T>, dy: &TensorOf<T>) -> TensorOf<T> {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    TensorOf::from_vec(x.shape(), data)
}

/// Inverted dropout. In training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1 - rate); inference is
/// the identity and draws nothing from the generator. A rate of 0 also draws
/// nothing.
pub fn dropout<T: Scalar>(
    x: &TensorOf<T>,
    rate: f64,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> (TensorOf<T>, Option<Vec<bool>>) {
    assert!((0.0..1.0).contains(&rate), "rate must lie in [0, 1)");
    if !training || rate == 0.0 {
        return (x.clone(), None);
    }
    let scale = T::from_f64(1.0 / (1.0 - rate));
    let mut mask = Vec::with_capacity(x.len());
    let data = x
        .data()
        .iter()
        .map(|&v| {
            let keep = rng.random::<f64>() >= rate;
            mask.push(keep);
            if keep {
                v * scale
            } else {
                T::zero()
            }
        })
        .collect();
    (TensorOf::from_vec(x.shape(), data), Some(mask))
}

/// Backward pass of [`dropout`]; `mask` is the forward's survivor mask.
pub fn dropout_backward<T: Scalar>(
    dy: &TensorOf<T>,
    rate: f64,
    mask: Option<&[bool]>,
) -> TensorOf<T> {
    match mask {
        None => dy.clone(),
        Some(mask) => {
            let scale = T::from_f64(1.0 / (1.0 - rate));
            let data = dy
                .data()
                .iter()
                .zip(mask)
                .map(|(&g, &keep)| if keep { g * scale } else { T::zero() })
                .collect();
            TensorOf::from_vec(dy.shape(), data)
        }
    }
}
