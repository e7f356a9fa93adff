//! Central finite-difference verification of every backward pass.
//!
//! The checks rerun the layer kernels at f64 (the same generic code the f32
//! engine uses), probe each input and parameter coordinate with a step of
//! 1e-4, and compare against the analytic gradients under a random fixed
//! projection of the output. Returned is the maximum relative error over
//! all coordinates.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use super::batchnorm::{batchnorm_backward_train, batchnorm_train};
use super::conv::{conv2d, conv2d_backward, separable_conv2d_backward, separable_conv2d_with_mid};
use super::dense::{dense, dense_backward};
use super::loss::{softmax, sparse_ce_loss};
use super::params::{BatchNormParams, ConvParams, DenseParams, SepConvParams};
use super::pool::{maxpool2d, maxpool2d_backward};
use super::tensor::TensorOf;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-4;

/// A layer primitive under test, at 64-bit precision.
#[derive(Debug, Clone)]
pub enum Primitive {
    Conv2d(ConvParams<f64>),
    SepConv2d(SepConvParams<f64>),
    BatchNorm(BatchNormParams<f64>),
    MaxPool2d,
    Dense(DenseParams<f64>),
    /// Fused softmax + sparse cross-entropy; the objective is the loss itself.
    SoftmaxCrossEntropy { labels: Vec<usize> },
}

/// Relative error with a floor that keeps near-zero gradients comparable.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

struct Projection {
    weights: Vec<f64>,
}

impl Projection {
    fn new(len: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weights: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    fn apply(&self, y: &TensorOf<f64>) -> f64 {
        y.data()
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| v * w)
            .sum()
    }
}

/// Max relative error between analytic and central-difference gradients for
/// one primitive on one input, over all input and parameter coordinates.
pub fn gradient_check(op: &Primitive, x: &TensorOf<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Scalar objective and its analytic gradients.
    let (analytic_dx, analytic_params, projection): (TensorOf<f64>, Vec<TensorOf<f64>>, Option<Projection>) =
        match op {
            Primitive::Conv2d(p) => {
                let y = conv2d(x, p).expect("forward");
                let proj = Projection::new(y.len(), &mut rng);
                let dy = TensorOf::from_vec(y.shape(), proj.weights.clone());
                let g = conv2d_backward(x, p, &dy);
                (g.dx, vec![g.dkernel, g.dbias], Some(proj))
            }
            Primitive::SepConv2d(p) => {
                let (y, mid) = separable_conv2d_with_mid(x, p).expect("forward");
                let proj = Projection::new(y.len(), &mut rng);
                let dy = TensorOf::from_vec(y.shape(), proj.weights.clone());
                let g = separable_conv2d_backward(x, &mid, p, &dy);
                (g.dx, vec![g.ddepthwise, g.dpointwise, g.dbias], Some(proj))
            }
            Primitive::BatchNorm(p) => {
                let (y, stats) = batchnorm_train(x, p).expect("forward");
                let proj = Projection::new(y.len(), &mut rng);
                let dy = TensorOf::from_vec(y.shape(), proj.weights.clone());
                let (dx, dgamma, dbeta) = batchnorm_backward_train(x, p, &stats, &dy);
                (dx, vec![dgamma, dbeta], Some(proj))
            }
            Primitive::MaxPool2d => {
                let (y, argmax) = maxpool2d(x);
                let proj = Projection::new(y.len(), &mut rng);
                let dy = TensorOf::from_vec(y.shape(), proj.weights.clone());
                let dx = maxpool2d_backward(x.shape(), &argmax, &dy);
                (dx, vec![], Some(proj))
            }
            Primitive::Dense(p) => {
                let y = dense(x, p).expect("forward");
                let proj = Projection::new(y.len(), &mut rng);
                let dy = TensorOf::from_vec(y.shape(), proj.weights.clone());
                let g = dense_backward(x, p, &dy);
                (g.dx, vec![g.dweight, g.dbias], Some(proj))
            }
            Primitive::SoftmaxCrossEntropy { labels } => {
                let probs = softmax(x);
                let (_, dlogits) = sparse_ce_loss(&probs, labels).expect("loss");
                (dlogits, vec![], None)
            }
        };

    // Objective evaluation with possibly perturbed input/params.
    let eval = |op: &Primitive, x: &TensorOf<f64>| -> f64 {
        match op {
            Primitive::Conv2d(p) => projection.as_ref().unwrap().apply(&conv2d(x, p).unwrap()),
            Primitive::SepConv2d(p) => {
                let (y, _) = separable_conv2d_with_mid(x, p).unwrap();
                projection.as_ref().unwrap().apply(&y)
            }
            Primitive::BatchNorm(p) => {
                let (y, _) = batchnorm_train(x, p).unwrap();
                projection.as_ref().unwrap().apply(&y)
            }
            Primitive::MaxPool2d => {
                let (y, _) = maxpool2d(x);
                projection.as_ref().unwrap().apply(&y)
            }
            Primitive::Dense(p) => projection.as_ref().unwrap().apply(&dense(x, p).unwrap()),
            Primitive::SoftmaxCrossEntropy { labels } => {
                let probs = softmax(x);
                sparse_ce_loss(&probs, labels).unwrap().0
            }
        }
    };

    let mut max_err: f64 = 0.0;

    // Input coordinates.
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + FD_STEP;
        let f_plus = eval(op, &xp);
        xp.data_mut()[i] = orig - FD_STEP;
        let f_minus = eval(op, &xp);
        xp.data_mut()[i] = orig;
        let numeric = (f_plus - f_minus) / (2.0 * FD_STEP);
        max_err = max_err.max(rel_err(analytic_dx.data()[i], numeric));
    }

    // Parameter coordinates, block by block.
    let mut op_p = op.clone();
    for (block, analytic) in analytic_params.iter().enumerate() {
        for i in 0..analytic.len() {
            let orig = perturb(&mut op_p, block, i, FD_STEP);
            let f_plus = eval(&op_p, x);
            set_param(&mut op_p, block, i, orig - FD_STEP);
            let f_minus = eval(&op_p, x);
            set_param(&mut op_p, block, i, orig);
            let numeric = (f_plus - f_minus) / (2.0 * FD_STEP);
            max_err = max_err.max(rel_err(analytic.data()[i], numeric));
        }
    }

    max_err
}

/// Adds `step` to parameter block/index and returns the original value.
fn perturb(op: &mut Primitive, block: usize, index: usize, step: f64) -> f64 {
    let slot = param_slot(op, block, index);
    let orig = *slot;
    *slot = orig + step;
    orig
}

fn set_param(op: &mut Primitive, block: usize, index: usize, value: f64) {
    *param_slot(op, block, index) = value;
}

fn param_slot(op: &mut Primitive, block: usize, index: usize) -> &mut f64 {
    let tensor = match (op, block) {
        (Primitive::Conv2d(p), 0) => &mut p.kernel,
        (Primitive::Conv2d(p), 1) => &mut p.bias,
        (Primitive::SepConv2d(p), 0) => &mut p.depthwise,
        (Primitive::SepConv2d(p), 1) => &mut p.pointwise,
        (Primitive::SepConv2d(p), 2) => &mut p.bias,
        (Primitive::BatchNorm(p), 0) => &mut p.gamma,
        (Primitive::BatchNorm(p), 1) => &mut p.beta,
        (Primitive::Dense(p), 0) => &mut p.weight,
        (Primitive::Dense(p), 1) => &mut p.bias,
        (op, block) => panic!("no parameter block {block} on {op:?}"),
    };
    &mut tensor.data_mut()[index]
}

/// Random tensor with entries in (-1, 1).
pub fn random_input(shape: &[usize], rng: &mut ChaCha8Rng) -> TensorOf<f64> {
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    TensorOf::from_vec(shape, data)
}

/// Random tensor whose 2x2 pool windows have clearly separated values, so a
/// 1e-4 probe can never flip an argmax.
pub fn pool_safe_input(shape: &[usize], rng: &mut ChaCha8Rng) -> TensorOf<f64> {
    loop {
        let t = random_input(shape, rng);
        let (batch, h, w, c) = t.dims4();
        let mut ok = true;
        'scan: for n in 0..batch {
            for oy in 0..h / 2 {
                for ox in 0..w / 2 {
                    for ch in 0..c {
                        let mut vals = [0.0f64; 4];
                        for (k, val) in vals.iter_mut().enumerate() {
                            let (dy, dx) = (k / 2, k % 2);
                            *val = t.data()[((n * h + oy * 2 + dy) * w + ox * 2 + dx) * c + ch];
                        }
                        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        if vals.windows(2).any(|p| p[1] - p[0] < 1e-2) {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if ok {
            return t;
        }
    }
}
