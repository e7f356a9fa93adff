//! Model construction with seeded Glorot-uniform initialization.

use super::spec::{covidlite_spec, RowKind, RowMeta};
use super::{ModelError, ModelState};
use crate::nncore::{
    BatchNormParams, ConvParams, DenseParams, Layer, Network, SepConvParams,
};
use crate::rng::{stream_rng, Stream};

/// Defaults for the batch-norm layers (unstated upstream; framework-family
/// conventions).
pub(crate) const BN_MOMENTUM: f64 = 0.99;
pub(crate) const BN_EPSILON: f64 = 1e-3;

/// Builds the full model for 2 or 3 classes. Two builds with the same seed
/// produce bit-identical parameters.
pub fn build_covidlite(num_classes: usize, seed: u64) -> Result<ModelState, ModelError> {
    let spec = covidlite_spec(num_classes)?;
    let mut rng = stream_rng(seed, Stream::Init);

    let mut layers: Vec<(String, Layer<f32>)> = Vec::new();
    let mut rows: Vec<RowMeta> = Vec::new();
    let mut channels = 3usize;
    let mut side = spec.input_size;
    let mut units = 0usize;
    let (mut conv_n, mut sep_n, mut bn_n, mut pool_n, mut relu_n, mut drop_n, mut fc_n) =
        (0, 0, 0, 0, 0, 0, 0);

    for kind in &spec.rows {
        let start = layers.len();
        let (name, output_shape) = match *kind {
            RowKind::Input => ("input".to_string(), vec![side, side, channels]),
            RowKind::ConvBlock { filters } => {
                for _ in 0..2 {
                    conv_n += 1;
                    relu_n += 1;
                    layers.push((
                        format!("conv{conv_n}"),
                        Layer::Conv2d(ConvParams::glorot(3, channels, filters, &mut rng)),
                    ));
                    layers.push((format!("relu{relu_n}"), Layer::Relu));
                    channels = filters;
                }
                ("conv2d_x2".to_string(), vec![side, side, channels])
            }
            RowKind::SepConvBlock { filters } => {
                for _ in 0..2 {
                    sep_n += 1;
                    relu_n += 1;
                    layers.push((
                        format!("sep{sep_n}"),
                        Layer::SepConv2d(SepConvParams::glorot(3, channels, filters, &mut rng)),
                    ));
                    layers.push((format!("relu{relu_n}"), Layer::Relu));
                    channels = filters;
                }
                ("sepconv2d_x2".to_string(), vec![side, side, channels])
            }
            RowKind::BatchNorm => {
                bn_n += 1;
                layers.push((
                    format!("bn{bn_n}"),
                    Layer::BatchNorm(BatchNormParams::identity(channels, BN_MOMENTUM, BN_EPSILON)),
                ));
                ("batchnorm".to_string(), vec![side, side, channels])
            }
            RowKind::MaxPool { dropout } => {
                pool_n += 1;
                layers.push((format!("pool{pool_n}"), Layer::MaxPool2d));
                side /= 2;
                if dropout > 0.0 {
                    drop_n += 1;
                    layers.push((format!("drop{drop_n}"), Layer::Dropout { rate: dropout }));
                }
                ("maxpool2d".to_string(), vec![side, side, channels])
            }
            RowKind::Dense { units: out, dropout } => {
                fc_n += 1;
                if fc_n == 1 {
                    layers.push(("flatten".to_string(), Layer::Flatten));
                    units = side * side * channels;
                }
                layers.push((
                    format!("fc{fc_n}"),
                    Layer::Dense(DenseParams::glorot(units, out, &mut rng)),
                ));
                relu_n += 1;
                layers.push((format!("relu{relu_n}"), Layer::Relu));
                if dropout > 0.0 {
                    drop_n += 1;
                    layers.push((format!("drop{drop_n}"), Layer::Dropout { rate: dropout }));
                }
                units = out;
                (format!("fc{fc_n}"), vec![units])
            }
            RowKind::Head => {
                fc_n += 1;
                layers.push((
                    format!("fc{fc_n}"),
                    Layer::Dense(DenseParams::glorot(units, num_classes, &mut rng)),
                ));
                units = num_classes;
                (format!("fc{fc_n}"), vec![units])
            }
        };
        rows.push(RowMeta {
            kind: *kind,
            name,
            layers: start..layers.len(),
            output_shape,
        });
    }

    Ok(ModelState {
        network: Network::new(layers),
        spec,
        rows,
        seed,
    })
}
