//! 2x2 max pooling with stride 2.

use super::tensor::{Scalar, TensorOf};

/// Non-overlapping 2x2 max pool; odd spatial dims lose their last row/column
/// (floor division). Returns the output and, per output element, the flat
/// input index of the maximum (first encountered in row-major window order)
/// for gradient routing.
pub fn maxpool2d<T: Scalar>(x: &TensorOf<T>) -> (TensorOf<T>, Vec<u32>) {
    let (batch, h, w, c) = x.dims4();
    assert!(h >= 2 && w >= 2, "maxpool2d needs spatial dims >= 2");
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = Vec::with_capacity(batch * oh * ow * c);
    let mut argmax = Vec::with_capacity(batch * oh * ow * c);
    for n in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((n * h + oy * 2) * w + ox * 2) * c + ch;
                    let mut best = xd[best_idx];
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = ((n * h + oy * 2 + dy) * w + ox * 2 + dx) * c + ch;
                            if xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx as u32);
                }
            }
        }
    }
    (TensorOf::from_vec(&[batch, oh, ow, c], out), argmax)
}

/// Routes each output gradient to the recorded argmax position.
pub fn maxpool2d_backward<T: Scalar>(
    in_shape: &[usize],
    argmax: &[u32],
    dy: &TensorOf<T>,
) -> TensorOf<T> {
    let mut dx = TensorOf::zeros(in_shape);
    let dxd = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(dy.data()) {
        dxd[idx as usize] = dxd[idx as usize] + g;
    }
    dx
}
