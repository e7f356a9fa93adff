//! Standard, depthwise, pointwise, and depth-separable convolutions.
//!
//! All convolutions are stride 1 with same padding (zero fill) and odd
//! square kernels. The per-element summation order is fixed — kernel row,
//! kernel column, then channel — so brute-force oracles can demand exact
//! float equality. Bias is added after the kernel sum. Rows of the output
//! are computed independently (and in parallel), which keeps results
//! bit-identical regardless of thread count.

use rayon::prelude::*;

use super::params::{ConvParams, SepConvParams};
use super::tensor::{Scalar, TensorOf};
use super::NnError;

/// Gradients of [`conv2d`] with respect to input, kernel, and bias.
pub struct Conv2dGrads<T> {
    pub dx: TensorOf<T>,
    pub dkernel: TensorOf<T>,
    pub dbias: TensorOf<T>,
}

/// Gradients of [`separable_conv2d`] for all three parameter blocks.
pub struct SepConv2dGrads<T> {
    pub dx: TensorOf<T>,
    pub ddepthwise: TensorOf<T>,
    pub dpointwise: TensorOf<T>,
    pub dbias: TensorOf<T>,
}

fn check_channels<T: Scalar>(
    x: &TensorOf<T>,
    expected: usize,
    what: &str,
) -> Result<(), NnError> {
    let (_, _, _, m) = x.dims4();
    if m != expected {
        return Err(NnError::Shape(format!(
            "{what}: input shape {:?} has {m} channels, parameters expect {expected}",
            x.shape()
        )));
    }
    Ok(())
}

/// Standard convolution, same padding, stride 1.
pub fn conv2d<T: Scalar>(x: &TensorOf<T>, p: &ConvParams<T>) -> Result<TensorOf<T>, NnError> {
    let kshape = p.kernel.shape();
    assert_eq!(kshape.len(), 4, "kernel must be [K, K, M, N]");
    assert_eq!(kshape[0], kshape[1], "kernel must be square");
    assert_eq!(kshape[0] % 2, 1, "kernel side must be odd");
    check_channels(x, kshape[2], "conv2d")?;

    let (batch, h, w, m) = x.dims4();
    let (k, n_out) = (kshape[0], kshape[3]);
    let pad = (k - 1) / 2;
    let xd = x.data();
    let kd = p.kernel.data();
    let bd = p.bias.data();

    let mut out = vec![T::zero(); batch * h * w * n_out];
    out.par_chunks_mut(w * n_out)
        .enumerate()
        .for_each(|(row, orow)| {
            let n = row / h;
            let y = row % h;
            for col in 0..w {
                let acc = &mut orow[col * n_out..(col + 1) * n_out];
                for ki in 0..k {
                    let yy = y + ki;
                    if yy < pad || yy >= h + pad {
                        continue;
                    }
                    let sy = yy - pad;
                    for kj in 0..k {
                        let xx = col + kj;
                        if xx < pad || xx >= w + pad {
                            continue;
                        }
                        let sx = xx - pad;
                        let xrow = &xd[((n * h + sy) * w + sx) * m..][..m];
                        let kbase = (ki * k + kj) * m * n_out;
                        for (c, &xv) in xrow.iter().enumerate() {
                            let krow = &kd[kbase + c * n_out..][..n_out];
                            for (a, &kv) in acc.iter_mut().zip(krow) {
                                *a = *a + kv * xv;
                            }
                        }
                    }
                }
                for (a, &b) in acc.iter_mut().zip(bd) {
                    *a = *a + b;
                }
            }
        });
    Ok(TensorOf::from_vec(&[batch, h, w, n_out], out))
}

/// Backward pass of [`conv2d`]. Shapes must match the forward call.
pub fn conv2d_backward<T: Scalar>(
    x: &TensorOf<T>,
    p: &ConvParams<T>,
    dy: &TensorOf<T>,
) -> Conv2dGrads<T> {
    let (batch, h, w, m) = x.dims4();
    let kshape = p.kernel.shape();
    let (k, n_out) = (kshape[0], kshape[3]);
    let pad = (k - 1) / 2;
    let xd = x.data();
    let kd = p.kernel.data();
    let dyd = dy.data();
    assert_eq!(dy.shape(), &[batch, h, w, n_out], "dy shape mismatch");

    let mut dbias = vec![T::zero(); n_out];
    for pos in 0..batch * h * w {
        let row = &dyd[pos * n_out..][..n_out];
        for (b, &g) in dbias.iter_mut().zip(row) {
            *b = *b + g;
        }
    }

    // dkernel: one task per kernel tap, each owning a disjoint [M, N] slice.
    let mut dkernel = vec![T::zero(); k * k * m * n_out];
    dkernel
        .par_chunks_mut(m * n_out)
        .enumerate()
        .for_each(|(tap, dslice)| {
            let (ki, kj) = (tap / k, tap % k);
            for n in 0..batch {
                for y in 0..h {
                    let yy = y + ki;
                    if yy < pad || yy >= h + pad {
                        continue;
                    }
                    let sy = yy - pad;
                    for col in 0..w {
                        let xx = col + kj;
                        if xx < pad || xx >= w + pad {
                            continue;
                        }
                        let sx = xx - pad;
                        let xrow = &xd[((n * h + sy) * w + sx) * m..][..m];
                        let dyrow = &dyd[((n * h + y) * w + col) * n_out..][..n_out];
                        for (c, &xv) in xrow.iter().enumerate() {
                            let drow = &mut dslice[c * n_out..(c + 1) * n_out];
                            for (d, &g) in drow.iter_mut().zip(dyrow) {
                                *d = *d + xv * g;
                            }
                        }
                    }
                }
            }
        });

    // dx: full correlation of dy with the kernel, parallel over input rows.
    let mut dx = vec![T::zero(); batch * h * w * m];
    dx.par_chunks_mut(w * m).enumerate().for_each(|(row, drow)| {
        let n = row / h;
        let sy = row % h;
        for sx in 0..w {
            let acc = &mut drow[sx * m..(sx + 1) * m];
            for ki in 0..k {
                let yy = sy + pad;
                if yy < ki || yy - ki >= h {
                    continue;
                }
                let oy = yy - ki;
                for kj in 0..k {
                    let xx = sx + pad;
                    if xx < kj || xx - kj >= w {
                        continue;
                    }
                    let ox = xx - kj;
                    let dyrow = &dyd[((n * h + oy) * w + ox) * n_out..][..n_out];
                    let kbase = (ki * k + kj) * m * n_out;
                    for (c, a) in acc.iter_mut().enumerate() {
                        let krow = &kd[kbase + c * n_out..][..n_out];
                        let mut s = T::zero();
                        for (&kv, &g) in krow.iter().zip(dyrow) {
                            s = s + kv * g;
                        }
                        *a = *a + s;
                    }
                }
            }
        }
    });

    Conv2dGrads {
        dx: TensorOf::from_vec(&[batch, h, w, m], dx),
        dkernel: TensorOf::from_vec(&[k, k, m, n_out], dkernel),
        dbias: TensorOf::from_vec(&[n_out], dbias),
    }
}

/// Depthwise convolution: one K x K filter per channel, no bias.
pub fn depthwise_conv2d<T: Scalar>(
    x: &TensorOf<T>,
    depthwise: &TensorOf<T>,
) -> Result<TensorOf<T>, NnError> {
    let kshape = depthwise.shape();
    assert_eq!(kshape.len(), 3, "depthwise kernel must be [K, K, M]");
    assert_eq!(kshape[0], kshape[1], "kernel must be square");
    check_channels(x, kshape[2], "depthwise_conv2d")?;

    let (batch, h, w, m) = x.dims4();
    let k = kshape[0];
    let pad = (k - 1) / 2;
    let xd = x.data();
    let kd = depthwise.data();

    let mut out = vec![T::zero(); batch * h * w * m];
    out.par_chunks_mut(w * m).enumerate().for_each(|(row, orow)| {
        let n = row / h;
        let y = row % h;
        for col in 0..w {
            let acc = &mut orow[col * m..(col + 1) * m];
            for ki in 0..k {
                let yy = y + ki;
                if yy < pad || yy >= h + pad {
                    continue;
                }
                let sy = yy - pad;
                for kj in 0..k {
                    let xx = col + kj;
                    if xx < pad || xx >= w + pad {
                        continue;
                    }
                    let sx = xx - pad;
                    let xrow = &xd[((n * h + sy) * w + sx) * m..][..m];
                    let krow = &kd[(ki * k + kj) * m..][..m];
                    for ((a, &kv), &xv) in acc.iter_mut().zip(krow).zip(xrow) {
                        *a = *a + kv * xv;
                    }
                }
            }
        }
    });
    Ok(TensorOf::from_vec(&[batch, h, w, m], out))
}

/// Pointwise (1x1) convolution mixing channels; bias optional.
pub fn pointwise_conv2d<T: Scalar>(
    x: &TensorOf<T>,
    pointwise: &TensorOf<T>,
    bias: Option<&TensorOf<T>>,
) -> Result<TensorOf<T>, NnError> {
    let pshape = pointwise.shape();
    assert_eq!(pshape.len(), 2, "pointwise kernel must be [M, N]");
    check_channels(x, pshape[0], "pointwise_conv2d")?;

    let (batch, h, w, m) = x.dims4();
    let n_out = pshape[1];
    let xd = x.data();
    let pd = pointwise.data();

    let mut out = vec![T::zero(); batch * h * w * n_out];
    out.par_chunks_mut(w * n_out)
        .enumerate()
        .for_each(|(row, orow)| {
            let base = row * w * m;
            for col in 0..w {
                let acc = &mut orow[col * n_out..(col + 1) * n_out];
                let xrow = &xd[base + col * m..][..m];
                for (c, &xv) in xrow.iter().enumerate() {
                    let prow = &pd[c * n_out..][..n_out];
                    for (a, &pv) in acc.iter_mut().zip(prow) {
                        *a = *a + pv * xv;
                    }
                }
                if let Some(b) = bias {
                    for (a, &bv) in acc.iter_mut().zip(b.data()) {
                        *a = *a + bv;
                    }
                }
            }
        });
    Ok(TensorOf::from_vec(&[batch, h, w, n_out], out))
}

/// Depth-separable convolution: depthwise, then pointwise with bias.
pub fn separable_conv2d<T: Scalar>(
    x: &TensorOf<T>,
    p: &SepConvParams<T>,
) -> Result<TensorOf<T>, NnError> {
    separable_conv2d_with_mid(x, p).map(|(y, _)| y)
}

/// As [`separable_conv2d`], also returning the depthwise intermediate that
/// the backward pass needs.
pub fn separable_conv2d_with_mid<T: Scalar>(
    x: &TensorOf<T>,
    p: &SepConvParams<T>,
) -> Result<(TensorOf<T>, TensorOf<T>), NnError> {
    let mid = depthwise_conv2d(x, &p.depthwise)?;
    let y = pointwise_conv2d(&mid, &p.pointwise, Some(&p.bias))?;
    Ok((y, mid))
}

/// Backward pass of the separable convolution; `mid` is the depthwise output
/// from the forward call.
pub fn separable_conv2d_backward<T: Scalar>(
    x: &TensorOf<T>,
    mid: &TensorOf<T>,
    p: &SepConvParams<T>,
    dy: &TensorOf<T>,
) -> SepConv2dGrads<T> {
    let (batch, h, w, m) = x.dims4();
    let n_out = p.pointwise.shape()[1];
    assert_eq!(dy.shape(), &[batch, h, w, n_out], "dy shape mismatch");
    let k = p.depthwise.shape()[0];
    let pad = (k - 1) / 2;
    let positions = batch * h * w;

    let midd = mid.data();
    let dyd = dy.data();
    let pd = p.pointwise.data();

    // Pointwise stage: dbias, dpointwise, and the gradient at `mid`.
    let mut dbias = vec![T::zero(); n_out];
    let mut dpointwise = vec![T::zero(); m * n_out];
    for pos in 0..positions {
        let dyrow = &dyd[pos * n_out..][..n_out];
        for (b, &g) in dbias.iter_mut().zip(dyrow) {
            *b = *b + g;
        }
        let xrow = &midd[pos * m..][..m];
        for (c, &xv) in xrow.iter().enumerate() {
            let drow = &mut dpointwise[c * n_out..(c + 1) * n_out];
            for (d, &g) in drow.iter_mut().zip(dyrow) {
                *d = *d + xv * g;
            }
        }
    }
    let mut dmid = vec![T::zero(); positions * m];
    dmid.par_chunks_mut(w * m).enumerate().for_each(|(row, drow)| {
        let base = row * w * n_out;
        for col in 0..w {
            let dyrow = &dyd[base + col * n_out..][..n_out];
            let acc = &mut drow[col * m..(col + 1) * m];
            for (c, a) in acc.iter_mut().enumerate() {
                let prow = &pd[c * n_out..][..n_out];
                let mut s = T::zero();
                for (&pv, &g) in prow.iter().zip(dyrow) {
                    s = s + pv * g;
                }
                *a = s;
            }
        }
    });

    // Depthwise stage against dmid.
    let xd = x.data();
    let kd = p.depthwise.data();
    let mut ddepthwise = vec![T::zero(); k * k * m];
    ddepthwise
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(tap, dslice)| {
            let (ki, kj) = (tap / k, tap % k);
            for n in 0..batch {
                for y in 0..h {
                    let yy = y + ki;
                    if yy < pad || yy >= h + pad {
                        continue;
                    }
                    let sy = yy - pad;
                    for col in 0..w {
                        let xx = col + kj;
                        if xx < pad || xx >= w + pad {
                            continue;
                        }
                        let sx = xx - pad;
                        let xrow = &xd[((n * h + sy) * w + sx) * m..][..m];
                        let grow = &dmid[((n * h + y) * w + col) * m..][..m];
                        for ((d, &xv), &g) in dslice.iter_mut().zip(xrow).zip(grow) {
                            *d = *d + xv * g;
                        }
                    }
                }
            }
        });

    let mut dx = vec![T::zero(); positions * m];
    dx.par_chunks_mut(w * m).enumerate().for_each(|(row, drow)| {
        let n = row / h;
        let sy = row % h;
        for sx in 0..w {
            let acc = &mut drow[sx * m..(sx + 1) * m];
            for ki in 0..k {
                let yy = sy + pad;
                if yy < ki || yy - ki >= h {
                    continue;
                }
                let oy = yy - ki;
                for kj in 0..k {
                    let xx = sx + pad;
                    if xx < kj || xx - kj >= w {
                        continue;
                    }
                    let ox = xx - kj;
                    let grow = &dmid[((n * h + oy) * w + ox) * m..][..m];
                    let krow = &kd[(ki * k + kj) * m..][..m];
                    for ((a, &kv), &g) in acc.iter_mut().zip(krow).zip(grow) {
                        *a = *a + kv * g;
                    }
                }
            }
        }
    });

    SepConv2dGrads {
        dx: TensorOf::from_vec(&[batch, h, w, m], dx),
        ddepthwise: TensorOf::from_vec(&[k, k, m], ddepthwise),
        dpointwise: TensorOf::from_vec(&[m, n_out], dpointwise),
        dbias: TensorOf::from_vec(&[n_out], dbias),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> TensorOf<f32> {
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        TensorOf::from_vec(shape, data)
    }

    /// Nested-loop direct convolution in the mandated (ki, kj, c) order.
    fn conv_oracle(x: &TensorOf<f32>, p: &ConvParams<f32>) -> TensorOf<f32> {
        let (batch, h, w, m) = x.dims4();
        let k = p.kernel.shape()[0];
        let n_out = p.kernel.shape()[3];
        let pad = (k - 1) / 2;
        let mut out = TensorOf::zeros(&[batch, h, w, n_out]);
        for n in 0..batch {
            for y in 0..h {
                for xc in 0..w {
                    for o in 0..n_out {
                        let mut acc = 0.0f32;
                        for ki in 0..k {
                            for kj in 0..k {
                                for c in 0..m {
                                    let sy = y as isize + ki as isize - pad as isize;
                                    let sx = xc as isize + kj as isize - pad as isize;
                                    if sy < 0 || sy >= h as isize || sx < 0 || sx >= w as isize {
                                        continue;
                                    }
                                    let xv = x.data()
                                        [((n * h + sy as usize) * w + sx as usize) * m + c];
                                    let kv = p.kernel.data()[((ki * k + kj) * m + c) * n_out + o];
                                    acc += kv * xv;
                                }
                            }
                        }
                        out.data_mut()[((n * h + y) * w + xc) * n_out + o] =
                            acc + p.bias.data()[o];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn zero_kernel_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&[1, 4, 4, 2], &mut rng);
        let p = ConvParams {
            kernel: TensorOf::zeros(&[3, 3, 2, 3]),
            bias: TensorOf::zeros(&[3]),
        };
        let y = conv2d(&x, &p).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_gives_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&[2, 5, 5, 1], &mut rng);
        let mut kernel = TensorOf::zeros(&[3, 3, 1, 1]);
        kernel.data_mut()[(1 * 3 + 1) * 1] = 1.0; // center tap
        let p = ConvParams {
            kernel,
            bias: TensorOf::zeros(&[1]),
        };
        let y = conv2d(&x, &p).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn matches_nested_loop_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&[1, 5, 5, 2], &mut rng);
        let p = ConvParams {
            kernel: random_tensor(&[3, 3, 2, 3], &mut rng),
            bias: random_tensor(&[3], &mut rng),
        };
        let y = conv2d(&x, &p).unwrap();
        let expect = conv_oracle(&x, &p);
        assert_eq!(y.data(), expect.data());
    }

    #[test]
    fn channel_mismatch_names_both_shapes() {
        let x = TensorOf::<f32>::zeros(&[1, 4, 4, 5]);
        let p = ConvParams {
            kernel: TensorOf::zeros(&[3, 3, 2, 3]),
            bias: TensorOf::zeros(&[3]),
        };
        let err = conv2d(&x, &p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('5') && msg.contains('2'), "got: {msg}");
    }

    #[test]
    fn separable_identity_taps_pass_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(&[1, 4, 4, 3], &mut rng);
        let mut depthwise = TensorOf::zeros(&[3, 3, 3]);
        for c in 0..3 {
            depthwise.data_mut()[(1 * 3 + 1) * 3 + c] = 1.0;
        }
        let mut pointwise = TensorOf::zeros(&[3, 3]);
        for c in 0..3 {
            pointwise.data_mut()[c * 3 + c] = 1.0;
        }
        let p = SepConvParams {
            depthwise,
            pointwise,
            bias: TensorOf::zeros(&[3]),
        };
        let y = separable_conv2d(&x, &p).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_pointwise_leaves_only_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&[1, 4, 4, 2], &mut rng);
        let p = SepConvParams {
            depthwise: random_tensor(&[3, 3, 2], &mut rng),
            pointwise: TensorOf::zeros(&[2, 4]),
            bias: TensorOf::from_vec(&[4], vec![0.5, -1.0, 2.0, 0.0]),
        };
        let y = separable_conv2d(&x, &p).unwrap();
        for pos in 0..16 {
            assert_eq!(&y.data()[pos * 4..(pos + 1) * 4], &[0.5, -1.0, 2.0, 0.0]);
        }
    }

    #[test]
    fn separable_equals_composed_oracles_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_tensor(&[2, 6, 5, 3], &mut rng);
        let p = SepConvParams {
            depthwise: random_tensor(&[3, 3, 3], &mut rng),
            pointwise: random_tensor(&[3, 4], &mut rng),
            bias: random_tensor(&[4], &mut rng),
        };
        // Depthwise via the conv oracle, one channel at a time.
        let (batch, h, w, m) = x.dims4();
        let mut mid = TensorOf::zeros(&[batch, h, w, m]);
        for c in 0..m {
            let mut plane = TensorOf::zeros(&[batch, h, w, 1]);
            for pos in 0..batch * h * w {
                plane.data_mut()[pos] = x.data()[pos * m + c];
            }
            let mut kernel = TensorOf::zeros(&[3, 3, 1, 1]);
            for tap in 0..9 {
                kernel.data_mut()[tap] = p.depthwise.data()[tap * m + c];
            }
            let conv = conv_oracle(
                &plane,
                &ConvParams {
                    kernel,
                    bias: TensorOf::zeros(&[1]),
                },
            );
            for pos in 0..batch * h * w {
                mid.data_mut()[pos * m + c] = conv.data()[pos];
            }
        }
        // Pointwise as a 1x1 convolution oracle.
        let n_out = 4;
        let mut expect = TensorOf::zeros(&[batch, h, w, n_out]);
        for pos in 0..batch * h * w {
            for o in 0..n_out {
                let mut acc = 0.0f32;
                for c in 0..m {
                    acc += p.pointwise.data()[c * n_out + o] * mid.data()[pos * m + c];
                }
                expect.data_mut()[pos * n_out + o] = acc + p.bias.data()[o];
            }
        }
        let y = separable_conv2d(&x, &p).unwrap();
        assert_eq!(y.data(), expect.data());
    }

    #[test]
    fn convolution_is_linear_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x1 = random_tensor(&[1, 4, 4, 2], &mut rng);
        let x2 = random_tensor(&[1, 4, 4, 2], &mut rng);
        let p = ConvParams {
            kernel: random_tensor(&[3, 3, 2, 3], &mut rng),
            bias: TensorOf::zeros(&[3]),
        };
        let (a, b) = (0.7f32, -1.3f32);
        let mixed = TensorOf::from_vec(
            &[1, 4, 4, 2],
            x1.data()
                .iter()
                .zip(x2.data())
                .map(|(&u, &v)| a * u + b * v)
                .collect(),
        );
        let lhs = conv2d(&mixed, &p).unwrap();
        let y1 = conv2d(&x1, &p).unwrap();
        let y2 = conv2d(&x2, &p).unwrap();
        for ((&l, &u), &v) in lhs.data().iter().zip(y1.data()).zip(y2.data()) {
            assert!((l - (a * u + b * v)).abs() < 1e-5);
        }
    }
}
