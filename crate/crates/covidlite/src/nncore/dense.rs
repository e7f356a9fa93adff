//! Fully connected layer.

use super::params::DenseParams;
use super::tensor::{Scalar, TensorOf};
use super::NnError;

/// Gradients of [`dense`].
pub struct DenseGrads<T> {
    pub dx: TensorOf<T>,
    pub dweight: TensorOf<T>,
    pub dbias: TensorOf<T>,
}

/// Affine map `y = x W + b` on a rank-2 batch.
pub fn dense<T: Scalar>(x: &TensorOf<T>, p: &DenseParams<T>) -> Result<TensorOf<T>, NnError> {
    let (batch, feat) = x.dims2();
    let (w_in, w_out) = p.weight.dims2();
    if feat != w_in {
        return Err(NnError::Shape(format!(
            "dense: input shape {:?} has {feat} features, weight {:?} expects {w_in}",
            x.shape(),
            p.weight.shape()
        )));
    }
    let xd = x.data();
    let wd = p.weight.data();
    let bd = p.bias.data();
    let mut out = Vec::with_capacity(batch * w_out);
    for n in 0..batch {
        let xrow = &xd[n * feat..][..feat];
        let mut acc = bd.to_vec();
        for (f, &xv) in xrow.iter().enumerate() {
            let wrow = &wd[f * w_out..][..w_out];
            for (a, &wv) in acc.iter_mut().zip(wrow) {
                *a = *a + wv * xv;
            }
        }
        out.extend_from_slice(&acc);
    }
    Ok(TensorOf::from_vec(&[batch, w_out], out))
}

/// Backward pass of [`dense`].
pub fn dense_backward<T: Scalar>(
    x: &TensorOf<T>,
    p: &DenseParams<T>,
    dy: &TensorOf<T>,
) -> DenseGrads<T> {
    let (batch, feat) = x.dims2();
    let (_, w_out) = p.weight.dims2();
    assert_eq!(dy.shape(), &[batch, w_out], "dy shape mismatch");
    let xd = x.data();
    let wd = p.weight.data();
    let dyd = dy.data();

    let mut dbias = vec![T::zero(); w_out];
    for row in dyd.chunks_exact(w_out) {
        for (b, &g) in dbias.iter_mut().zip(row) {
            *b = *b + g;
        }
    }

    let mut dweight = vec![T::zero(); feat * w_out];
    for n in 0..batch {
        let xrow = &xd[n * feat..][..feat];
        let dyrow = &dyd[n * w_out..][..w_out];
        for (f, &xv) in xrow.iter().enumerate() {
            let drow = &mut dweight[f * w_out..(f + 1) * w_out];
            for (d, &g) in drow.iter_mut().zip(dyrow) {
                *d = *d + xv * g;
            }
        }
    }

    let mut dx = Vec::with_capacity(batch * feat);
    for n in 0..batch {
        let dyrow = &dyd[n * w_out..][..w_out];
        for f in 0..feat {
            let wrow = &wd[f * w_out..][..w_out];
            let mut s = T::zero();
            for (&wv, &g) in wrow.iter().zip(dyrow) {
                s = s + wv * g;
            }
            dx.push(s);
        }
    }

    DenseGrads {
        dx: TensorOf::from_vec(&[batch, feat], dx),
        dweight: TensorOf::from_vec(&[feat, w_out], dweight),
        dbias: TensorOf::from_vec(&[w_out], dbias),
    }
}
