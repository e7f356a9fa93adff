//! Batch normalization over batch x height x width, per channel.

use super::params::BatchNormParams;
use super::tensor::{Scalar, TensorOf};
use super::NnError;

/// Per-channel batch statistics cached for the backward pass.
#[derive(Debug, Clone)]
pub struct BnStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

fn check<T: Scalar>(x: &TensorOf<T>, p: &BatchNormParams<T>) -> Result<(usize, usize), NnError> {
    let (batch, h, w, c) = x.dims4();
    if batch == 0 {
        return Err(NnError::EmptyBatch);
    }
    if c != p.channels() {
        return Err(NnError::Shape(format!(
            "batchnorm: input shape {:?} has {c} channels, parameters expect {}",
            x.shape(),
            p.channels()
        )));
    }
    Ok((batch * h * w, c))
}

/// Training-mode forward: normalizes with the (biased) batch statistics and
/// returns them so the caller can update the moving averages and run the
/// backward pass.
pub fn batchnorm_train<T: Scalar>(
    x: &TensorOf<T>,
    p: &BatchNormParams<T>,
) -> Result<(TensorOf<T>, BnStats<T>), NnError> {
    let (m, c) = check(x, p)?;
    let count = T::from_f64(m as f64);
    let xd = x.data();

    let mut mean = vec![T::zero(); c];
    for row in xd.chunks_exact(c) {
        for (acc, &v) in mean.iter_mut().zip(row) {
            *acc = *acc + v;
        }
    }
    for v in mean.iter_mut() {
        *v = *v / count;
    }

    let mut var = vec![T::zero(); c];
    for row in xd.chunks_exact(c) {
        for ((acc, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - mu;
            *acc = *acc + d * d;
        }
    }
    for v in var.iter_mut() {
        *v = *v / count;
    }

    let inv_std: Vec<T> = var
        .iter()
        .map(|&v| T::one() / (v + p.epsilon).sqrt())
        .collect();
    let mut out = Vec::with_capacity(xd.len());
    for row in xd.chunks_exact(c) {
        for (ch, &v) in row.iter().enumerate() {
            out.push(p.gamma.data()[ch] * (v - mean[ch]) * inv_std[ch] + p.beta.data()[ch]);
        }
    }
    Ok((
        TensorOf::from_vec(x.shape(), out),
        BnStats { mean, var },
    ))
}

/// Folds batch statistics into the moving averages:
/// `moving = momentum * moving + (1 - momentum) * batch`.
pub fn update_moving_stats<T: Scalar>(p: &mut BatchNormParams<T>, stats: &BnStats<T>) {
    let keep = p.momentum;
    let take = T::one() - keep;
    for (mv, &b) in p.moving_mean.data_mut().iter_mut().zip(&stats.mean) {
        *mv = keep * *mv + take * b;
    }
    for (mv, &b) in p.moving_var.data_mut().iter_mut().zip(&stats.var) {
        *mv = keep * *mv + take * b;
    }
}

/// Inference-mode forward using the moving statistics.
pub fn batchnorm_infer<T: Scalar>(
    x: &TensorOf<T>,
    p: &BatchNormParams<T>,
) -> Result<TensorOf<T>, NnError> {
    let (_, c) = check(x, p)?;
    let inv_std: Vec<T> = p
        .moving_var
        .data()
        .iter()
        .map(|&v| T::one() / (v + p.epsilon).sqrt())
        .collect();
    let mut out = Vec::with_capacity(x.len());
    for row in x.data().chunks_exact(c) {
        for (ch, &v) in row.iter().enumerate() {
            out.push(
                p.gamma.data()[ch] * (v - p.moving_mean.data()[ch]) * inv_std[ch]
                    + p.beta.data()[ch],
            );
        }
    }
    Ok(TensorOf::from_vec(x.shape(), out))
}

/// Backward pass paired with [`batchnorm_train`].
pub fn batchnorm_backward_train<T: Scalar>(
    x: &TensorOf<T>,
    p: &BatchNormParams<T>,
    stats: &BnStats<T>,
    dy: &TensorOf<T>,
) -> (TensorOf<T>, TensorOf<T>, TensorOf<T>) {
    let c = p.channels();
    let m = x.len() / c;
    let count = T::from_f64(m as f64);
    let inv_std: Vec<T> = stats
        .var
        .iter()
        .map(|&v| T::one() / (v + p.epsilon).sqrt())
        .collect();

    let mut dbeta = vec![T::zero(); c];
    let mut dgamma = vec![T::zero(); c];
    for (xrow, dyrow) in x.data().chunks_exact(c).zip(dy.data().chunks_exact(c)) {
        for ch in 0..c {
            let xhat = (xrow[ch] - stats.mean[ch]) * inv_std[ch];
            dbeta[ch] = dbeta[ch] + dyrow[ch];
            dgamma[ch] = dgamma[ch] + dyrow[ch] * xhat;
        }
    }

    let mut dx = Vec::with_capacity(x.len());
    for (xrow, dyrow) in x.data().chunks_exact(c).zip(dy.data().chunks_exact(c)) {
        for ch in 0..c {
            let xhat = (xrow[ch] - stats.mean[ch]) * inv_std[ch];
            let term = dyrow[ch] - dbeta[ch] / count - xhat * dgamma[ch] / count;
            dx.push(p.gamma.data()[ch] * inv_std[ch] * term);
        }
    }
    (
        TensorOf::from_vec(x.shape(), dx),
        TensorOf::from_vec(&[c], dgamma),
        TensorOf::from_vec(&[c], dbeta),
    )
}

/// Backward pass paired with [`batchnorm_infer`], where the moving statistics
/// are constants.
pub fn batchnorm_backward_infer<T: Scalar>(
    x: &TensorOf<T>,
    p: &BatchNormParams<T>,
    dy: &TensorOf<T>,
) -> (TensorOf<T>, TensorOf<T>, TensorOf<T>) {
    let c = p.channels();
    let inv_std: Vec<T> = p
        .moving_var
        .data()
        .iter()
        .map(|&v| T::one() / (v + p.epsilon).sqrt())
        .collect();
    let mut dbeta = vec![T::zero(); c];
    let mut dgamma = vec![T::zero(); c];
    let mut dx = Vec::with_capacity(x.len());
    for (xrow, dyrow) in x.data().chunks_exact(c).zip(dy.data().chunks_exact(c)) {
        for ch in 0..c {
            let xhat = (xrow[ch] - p.moving_mean.data()[ch]) * inv_std[ch];
            dbeta[ch] = dbeta[ch] + dyrow[ch];
            dgamma[ch] = dgamma[ch] + dyrow[ch] * xhat;
            dx.push(p.gamma.data()[ch] * inv_std[ch] * dyrow[ch]);
        }
    }
    (
        TensorOf::from_vec(x.shape(), dx),
        TensorOf::from_vec(&[c], dgamma),
        TensorOf::from_vec(&[c], dbeta),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn params(c: usize) -> BatchNormParams<f32> {
        BatchNormParams::identity(c, 0.99, 1e-3)
    }

    #[test]
    fn zero_mean_unit_var_is_nearly_identity() {
        // Batch constructed to have exact zero mean and unit variance.
        let x = TensorOf::from_vec(&[2, 1, 1, 1], vec![1.0f32, -1.0]);
        let (y, _) = batchnorm_train(&x, &params(1)).unwrap();
        for (&out, &inp) in y.data().iter().zip(x.data()) {
            assert!((out - inp).abs() < 1e-3); // epsilon effect only
        }
    }

    #[test]
    fn zero_gamma_yields_beta() {
        let mut p = params(2);
        p.gamma = TensorOf::zeros(&[2]);
        p.beta = TensorOf::from_vec(&[2], vec![0.5, -2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<f32> = (0..2 * 3 * 3 * 2).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x = TensorOf::from_vec(&[2, 3, 3, 2], data);
        let (y, _) = batchnorm_train(&x, &p).unwrap();
        for row in y.data().chunks_exact(2) {
            assert_eq!(row, &[0.5, -2.0]);
        }
    }

    #[test]
    fn training_output_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f32> = (0..4 * 5 * 5 * 3)
            .map(|_| rng.random_range(-2.0..7.0))
            .collect();
        let x = TensorOf::from_vec(&[4, 5, 5, 3], data);
        let (y, _) = batchnorm_train(&x, &params(3)).unwrap();
        let m = 4 * 5 * 5;
        for ch in 0..3 {
            let vals: Vec<f64> = (0..m).map(|p| f64::from(y.data()[p * 3 + ch])).collect();
            let mean = vals.iter().sum::<f64>() / m as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            assert!(mean.abs() < 1e-5, "mean {mean}");
            // Variance comes out slightly below 1 because of epsilon.
            assert!((var - 1.0).abs() < 2e-3, "var {var}");
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let x = TensorOf::<f32>::zeros(&[0, 2, 2, 1]);
        assert!(matches!(
            batchnorm_train(&x, &params(1)),
            Err(NnError::EmptyBatch)
        ));
    }

    #[test]
    fn moving_stats_blend_with_momentum() {
        let mut p = params(1);
        let stats = BnStats {
            mean: vec![10.0f32],
            var: vec![4.0],
        };
        update_moving_stats(&mut p, &stats);
        assert!((p.moving_mean.data()[0] - 0.1).abs() < 1e-6);
        assert!((p.moving_var.data()[0] - (0.99 + 0.04)).abs() < 1e-6);
    }
}
