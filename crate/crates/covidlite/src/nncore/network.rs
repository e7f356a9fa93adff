//! Sequential layer container with tape-based backpropagation.

use rand_chacha::ChaCha8Rng;

use super::activation::{dropout, dropout_backward, relu, relu_backward};
use super::batchnorm::{
    batchnorm_backward_infer, batchnorm_backward_train, batchnorm_infer, batchnorm_train,
    update_moving_stats,
};
use super::conv::{conv2d, conv2d_backward, separable_conv2d_backward, separable_conv2d_with_mid};
use super::dense::{dense, dense_backward};
use super::params::{BatchNormParams, ConvParams, DenseParams, SepConvParams};
use super::pool::{maxpool2d, maxpool2d_backward};
use super::tape::{Frame, GradTape};
use super::tensor::{Scalar, TensorOf};
use super::NnError;

/// One step of the sequential network.
#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv2d(ConvParams<T>),
    SepConv2d(SepConvParams<T>),
    BatchNorm(BatchNormParams<T>),
    MaxPool2d,
    Relu,
    Dropout { rate: f64 },
    Flatten,
    Dense(DenseParams<T>),
}

impl<T> Layer<T> {
    /// Number of trainable parameter tensors this layer owns.
    fn trainable_tensors(&self) -> usize {
        match self {
            Layer::Conv2d(_) => 2,
            Layer::SepConv2d(_) => 3,
            Layer::BatchNorm(_) => 2,
            Layer::Dense(_) => 2,
            _ => 0,
        }
    }
}

/// Name, shape, and trainability of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

/// A named sequence of layers. Forward passes borrow the network immutably
/// (training mode needs `&mut` only for the batch-norm moving statistics);
/// gradients accumulate in a separate [`Gradients`] buffer so concurrent
/// inference on a shared network stays safe.
#[derive(Debug, Clone)]
pub struct Network<T> {
    layers: Vec<(String, Layer<T>)>,
}

/// Gradient buffer aligned with [`Network::trainable_param_names`] order.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    slots: Vec<TensorOf<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_for(net: &Network<T>) -> Self {
        let slots = net
            .params()
            .into_iter()
            .filter(|(info, _)| info.trainable)
            .map(|(info, _)| TensorOf::zeros(&info.shape))
            .collect();
        Self { slots }
    }

    pub fn reset(&mut self) {
        for slot in &mut self.slots {
            for v in slot.data_mut() {
                *v = T::zero();
            }
        }
    }

    pub fn slots(&self) -> &[TensorOf<T>] {
        &self.slots
    }

    pub fn slots_mut(&mut self) -> &mut [TensorOf<T>] {
        &mut self.slots
    }

    fn add_into(&mut self, slot: usize, grad: &TensorOf<T>) {
        let dst = self.slots[slot].data_mut();
        debug_assert_eq!(dst.len(), grad.len());
        for (d, &g) in dst.iter_mut().zip(grad.data()) {
            *d = *d + g;
        }
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<(String, Layer<T>)>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> impl Iterator<Item = (&str, &Layer<T>)> {
        self.layers.iter().map(|(n, l)| (n.as_str(), l))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, index: usize) -> &Layer<T> {
        &self.layers[index].1
    }

    /// Index of the last separable convolution, shifted past an immediately
    /// following ReLU. This is the Grad-CAM hook point: the deepest spatial
    /// activation map.
    pub fn last_sepconv_output(&self) -> Option<usize> {
        let idx = self
            .layers
            .iter()
            .rposition(|(_, l)| matches!(l, Layer::SepConv2d(_)))?;
        match self.layers.get(idx + 1) {
            Some((_, Layer::Relu)) => Some(idx + 1),
            _ => Some(idx),
        }
    }

    /// All parameter tensors in enumeration order (the order used by the
    /// gradient buffer, the optimizer, and the weight file).
    pub fn params(&self) -> Vec<(ParamInfo, &TensorOf<T>)> {
        fn entry<'a, T: Scalar>(
            name: &str,
            suffix: &str,
            tensor: &'a TensorOf<T>,
            trainable: bool,
        ) -> (ParamInfo, &'a TensorOf<T>) {
            let info = ParamInfo {
                name: format!("{name}.{suffix}"),
                shape: tensor.shape().to_vec(),
                trainable,
            };
            (info, tensor)
        }
        let mut out = Vec::new();
        for (name, layer) in &self.layers {
            match layer {
                Layer::Conv2d(p) => {
                    out.push(entry(name, "kernel", &p.kernel, true));
                    out.push(entry(name, "bias", &p.bias, true));
                }
                Layer::SepConv2d(p) => {
                    out.push(entry(name, "depthwise", &p.depthwise, true));
                    out.push(entry(name, "pointwise", &p.pointwise, true));
                    out.push(entry(name, "bias", &p.bias, true));
                }
                Layer::BatchNorm(p) => {
                    out.push(entry(name, "gamma", &p.gamma, true));
                    out.push(entry(name, "beta", &p.beta, true));
                    out.push(entry(name, "moving_mean", &p.moving_mean, false));
                    out.push(entry(name, "moving_var", &p.moving_var, false));
                }
                Layer::Dense(p) => {
                    out.push(entry(name, "weight", &p.weight, true));
                    out.push(entry(name, "bias", &p.bias, true));
                }
                _ => {}
            }
        }
        out
    }

    /// Mutable view of every parameter tensor, same order as [`Self::params`].
    pub fn params_mut(&mut self) -> Vec<(ParamInfo, &mut TensorOf<T>)> {
        let mut out: Vec<(ParamInfo, &mut TensorOf<T>)> = Vec::new();
        for (name, layer) in &mut self.layers {
            macro_rules! push {
                ($suffix:literal, $tensor:expr, $trainable:expr) => {{
                    let info = ParamInfo {
                        name: format!("{name}.{}", $suffix),
                        shape: $tensor.shape().to_vec(),
                        trainable: $trainable,
                    };
                    out.push((info, $tensor));
                }};
            }
            match layer {
                Layer::Conv2d(p) => {
                    push!("kernel", &mut p.kernel, true);
                    push!("bias", &mut p.bias, true);
                }
                Layer::SepConv2d(p) => {
                    push!("depthwise", &mut p.depthwise, true);
                    push!("pointwise", &mut p.pointwise, true);
                    push!("bias", &mut p.bias, true);
                }
                Layer::BatchNorm(p) => {
                    push!("gamma", &mut p.gamma, true);
                    push!("beta", &mut p.beta, true);
                    push!("moving_mean", &mut p.moving_mean, false);
                    push!("moving_var", &mut p.moving_var, false);
                }
                Layer::Dense(p) => {
                    push!("weight", &mut p.weight, true);
                    push!("bias", &mut p.bias, true);
                }
                _ => {}
            }
        }
        out
    }

    pub fn num_trainable_scalars(&self) -> usize {
        self.params()
            .iter()
            .filter(|(info, _)| info.trainable)
            .map(|(_, t)| t.len())
            .sum()
    }

    pub fn num_non_trainable_scalars(&self) -> usize {
        self.params()
            .iter()
            .filter(|(info, _)| !info.trainable)
            .map(|(_, t)| t.len())
            .sum()
    }

    /// First gradient-slot index of each layer.
    fn slot_bases(&self) -> Vec<usize> {
        let mut bases = Vec::with_capacity(self.layers.len());
        let mut cursor = 0;
        for (_, layer) in &self.layers {
            bases.push(cursor);
            cursor += layer.trainable_tensors();
        }
        bases
    }

    /// Inference forward pass.
    pub fn forward(&self, x: &TensorOf<T>) -> Result<TensorOf<T>, NnError> {
        let mut cur = x.clone();
        for (_, layer) in &self.layers {
            cur = infer_step(layer, cur)?.0;
            debug_assert!(cur.all_finite(), "non-finite activation");
        }
        Ok(cur)
    }

    /// Inference forward pass that records a tape (for explanation maps) and
    /// optionally captures the output of layer `capture`.
    pub fn forward_trace(
        &self,
        x: &TensorOf<T>,
        tape: &mut GradTape<T>,
        capture: Option<usize>,
    ) -> Result<(TensorOf<T>, Option<TensorOf<T>>), NnError> {
        let mut cur = x.clone();
        let mut captured = None;
        for (i, (_, layer)) in self.layers.iter().enumerate() {
            let (y, frame) = infer_step(layer, cur)?;
            tape.push(frame);
            if capture == Some(i) {
                captured = Some(y.clone());
            }
            cur = y;
        }
        Ok((cur, captured))
    }

    /// Training forward pass: batch-norm uses batch statistics (and folds
    /// them into the moving averages), dropout draws masks from `rng`.
    pub fn forward_train(
        &mut self,
        x: &TensorOf<T>,
        rng: &mut ChaCha8Rng,
        tape: &mut GradTape<T>,
    ) -> Result<TensorOf<T>, NnError> {
        let mut cur = x.clone();
        for (_, layer) in &mut self.layers {
            let (y, frame) = train_step(layer, cur, rng)?;
            tape.push(frame);
            debug_assert!(y.all_finite(), "non-finite activation");
            cur = y;
        }
        Ok(cur)
    }

    /// Consumes the tape in exact reverse order, accumulating parameter
    /// gradients into `grads` and returning the gradient with respect to the
    /// network input. When `capture` is set, also returns the gradient at
    /// the *output* of that layer.
    ///
    /// Panics if the tape does not match this network's layer sequence.
    pub fn backward(
        &self,
        tape: &mut GradTape<T>,
        dout: &TensorOf<T>,
        grads: &mut Gradients<T>,
        capture: Option<usize>,
    ) -> (TensorOf<T>, Option<TensorOf<T>>) {
        assert_eq!(
            tape.len(),
            self.layers.len(),
            "tape does not cover the whole network"
        );
        let bases = self.slot_bases();
        let mut g = dout.clone();
        let mut captured = None;
        for (i, (name, layer)) in self.layers.iter().enumerate().rev() {
            if capture == Some(i) {
                captured = Some(g.clone());
            }
            let frame = tape.pop().expect("tape length checked above");
            let base = bases[i];
            g = match (layer, frame) {
                (Layer::Conv2d(p), Frame::Conv2d { x }) => {
                    let out = conv2d_backward(&x, p, &g);
                    grads.add_into(base, &out.dkernel);
                    grads.add_into(base + 1, &out.dbias);
                    out.dx
                }
                (Layer::SepConv2d(p), Frame::SepConv2d { x, mid }) => {
                    let out = separable_conv2d_backward(&x, &mid, p, &g);
                    grads.add_into(base, &out.ddepthwise);
                    grads.add_into(base + 1, &out.dpointwise);
                    grads.add_into(base + 2, &out.dbias);
                    out.dx
                }
                (Layer::BatchNorm(p), Frame::BatchNorm { x, stats }) => {
                    let (dx, dgamma, dbeta) = match stats {
                        Some(stats) => batchnorm_backward_train(&x, p, &stats, &g),
                        None => batchnorm_backward_infer(&x, p, &g),
                    };
                    grads.add_into(base, &dgamma);
                    grads.add_into(base + 1, &dbeta);
                    dx
                }
                (Layer::MaxPool2d, Frame::MaxPool2d { in_shape, argmax }) => {
                    maxpool2d_backward(&in_shape, &argmax, &g)
                }
                (Layer::Relu, Frame::Relu { x }) => relu_backward(&x, &g),
                (Layer::Dropout { rate }, Frame::Dropout { mask }) => {
                    dropout_backward(&g, *rate, mask.as_deref())
                }
                (Layer::Flatten, Frame::Flatten { in_shape }) => g.reshape(&in_shape),
                (Layer::Dense(p), Frame::Dense { x }) => {
                    let out = dense_backward(&x, p, &g);
                    grads.add_into(base, &out.dweight);
                    grads.add_into(base + 1, &out.dbias);
                    out.dx
                }
                (_, frame) => panic!("tape frame {frame:?} does not match layer {name}"),
            };
        }
        (g, captured)
    }
}

fn flatten_shape(shape: &[usize]) -> Vec<usize> {
    vec![shape[0], shape[1..].iter().product()]
}

fn infer_step<T: Scalar>(
    layer: &Layer<T>,
    x: TensorOf<T>,
) -> Result<(TensorOf<T>, Frame<T>), NnError> {
    Ok(match layer {
        Layer::Conv2d(p) => {
            let y = conv2d(&x, p)?;
            (y, Frame::Conv2d { x })
        }
        Layer::SepConv2d(p) => {
            let (y, mid) = separable_conv2d_with_mid(&x, p)?;
            (y, Frame::SepConv2d { x, mid })
        }
        Layer::BatchNorm(p) => {
            let y = batchnorm_infer(&x, p)?;
            (y, Frame::BatchNorm { x, stats: None })
        }
        Layer::MaxPool2d => {
            let in_shape = x.shape().to_vec();
            let (y, argmax) = maxpool2d(&x);
            (y, Frame::MaxPool2d { in_shape, argmax })
        }
        Layer::Relu => {
            let y = relu(&x);
            (y, Frame::Relu { x })
        }
        Layer::Dropout { .. } => (x, Frame::Dropout { mask: None }),
        Layer::Flatten => {
            let in_shape = x.shape().to_vec();
            let y = x.reshape(&flatten_shape(&in_shape));
            (y, Frame::Flatten { in_shape })
        }
        Layer::Dense(p) => {
            let y = dense(&x, p)?;
            (y, Frame::Dense { x })
        }
    })
}

fn train_step<T: Scalar>(
    layer: &mut Layer<T>,
    x: TensorOf<T>,
    rng: &mut ChaCha8Rng,
) -> Result<(TensorOf<T>, Frame<T>), NnError> {
    Ok(match layer {
        Layer::BatchNorm(p) => {
            let (y, stats) = batchnorm_train(&x, p)?;
            update_moving_stats(p, &stats);
            (
                y,
                Frame::BatchNorm {
                    x,
                    stats: Some(stats),
                },
            )
        }
        Layer::Dropout { rate } => {
            let (y, mask) = dropout(&x, *rate, true, rng);
            (y, Frame::Dropout { mask })
        }
        other => infer_step(other, x)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn tiny_net(seed: u64) -> Network<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Network::new(vec![
            ("conv1".into(), Layer::Conv2d(ConvParams::glorot(3, 1, 2, &mut rng))),
            ("relu1".into(), Layer::Relu),
            ("pool1".into(), Layer::MaxPool2d),
            ("flatten".into(), Layer::Flatten),
            ("fc1".into(), Layer::Dense(DenseParams::glorot(8, 3, &mut rng))),
        ])
    }

    #[test]
    fn forward_shapes_flow_through() {
        let net = tiny_net(1);
        let x = TensorOf::<f32>::filled(&[2, 4, 4, 1], 0.3);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
    }

    #[test]
    fn backward_consumes_the_whole_tape() {
        let mut net = tiny_net(2);
        let x = TensorOf::<f32>::filled(&[1, 4, 4, 1], 0.5);
        let mut tape = GradTape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = net.forward_train(&x, &mut rng, &mut tape).unwrap();
        assert_eq!(tape.len(), net.len());
        let mut grads = Gradients::zeros_for(&net);
        let dy = TensorOf::filled(y.shape(), 1.0);
        let (dx, _) = net.backward(&mut tape, &dy, &mut grads, None);
        assert!(tape.is_empty());
        assert_eq!(dx.shape(), x.shape());
    }

    #[test]
    fn param_enumeration_is_stable() {
        let net = tiny_net(3);
        let names: Vec<String> = net.params().into_iter().map(|(i, _)| i.name).collect();
        assert_eq!(
            names,
            vec!["conv1.kernel", "conv1.bias", "fc1.weight", "fc1.bias"]
        );
        assert_eq!(net.num_trainable_scalars(), 3 * 3 * 1 * 2 + 2 + 8 * 3 + 3);
    }

    #[test]
    fn capture_returns_intermediate_gradient() {
        let mut net = tiny_net(4);
        let x = TensorOf::<f32>::filled(&[1, 4, 4, 1], 0.5);
        let mut tape = GradTape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = net.forward_train(&x, &mut rng, &mut tape).unwrap();
        let mut grads = Gradients::zeros_for(&net);
        let dy = TensorOf::filled(y.shape(), 1.0);
        // Capture the gradient at the conv output (layer 0).
        let (_, captured) = net.backward(&mut tape, &dy, &mut grads, Some(0));
        let captured = captured.unwrap();
        assert_eq!(captured.shape(), &[1, 4, 4, 2]);
    }
}
