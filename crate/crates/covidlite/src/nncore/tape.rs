//! Forward-pass recording for reverse-mode differentiation.

use super::batchnorm::BnStats;
use super::tensor::TensorOf;

/// Everything one layer's backward pass needs from its forward pass.
#[derive(Debug, Clone)]
pub(crate) enum Frame<T> {
    Conv2d {
        x: TensorOf<T>,
    },
    SepConv2d {
        x: TensorOf<T>,
        mid: TensorOf<T>,
    },
    /// `stats` is present in training mode (batch statistics) and absent in
    /// inference mode (moving statistics are constants).
    BatchNorm {
        x: TensorOf<T>,
        stats: Option<BnStats<T>>,
    },
    MaxPool2d {
        in_shape: Vec<usize>,
        argmax: Vec<u32>,
    },
    Relu {
        x: TensorOf<T>,
    },
    Dropout {
        mask: Option<Vec<bool>>,
    },
    Flatten {
        in_shape: Vec<usize>,
    },
    Dense {
        x: TensorOf<T>,
    },
}

/// Recorded operations and cached activations of one forward pass.
///
/// Frames are pushed in forward order and consumed strictly in reverse;
/// [`crate::nncore::Network::backward`] panics if a popped frame does not
/// match the layer being differentiated.
#[derive(Debug, Default)]
pub struct GradTape<T> {
    pub(crate) frames: Vec<Frame<T>>,
}

impl<T> GradTape<T> {
    pub fn new() -> Self {
        Self { frames: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub(crate) fn push(&mut self, frame: Frame<T>) {
        self.frames.push(frame);
    }

    pub(crate) fn pop(&mut self) -> Option<Frame<T>> {
        self.frames.pop()
    }
}
