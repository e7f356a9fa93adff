//! Declarative description of the architecture, row for row.

use super::ModelError;

/// One row of the architecture table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowKind {
    Input,
    /// Two 3x3 convolutions (ReLU) at `filters` channels.
    ConvBlock { filters: usize },
    /// Two 3x3 separable convolutions (ReLU) at `filters` channels.
    SepConvBlock { filters: usize },
    BatchNorm,
    /// 2x2 max pool; `dropout` > 0 adds a dropout layer after it.
    MaxPool { dropout: f64 },
    /// Fully connected ReLU layer with dropout after it.
    Dense { units: usize, dropout: f64 },
    /// Fully connected softmax head at `num_classes` units.
    Head,
}

/// The architecture description: an immutable 26-row sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub num_classes: usize,
    pub input_size: usize,
    pub rows: Vec<RowKind>,
}

/// Where a spec row landed in the built network, and what it outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    pub kind: RowKind,
    /// Functional row label ("conv2d_x2", "fc3", ...).
    pub name: String,
    /// Half-open range of layer indices in the network.
    pub layers: std::ops::Range<usize>,
    /// Output shape, (h, w, c) for spatial rows or (units,) for dense rows.
    pub output_shape: Vec<usize>,
}

/// The architecture: a 16-filter double-conv stem, six double separable-conv
/// blocks (32, 64, 128, 256, 256, 512 filters) each with batch norm and a
/// 2x2 pool (dropout 0.2 from the third pool on), then dense layers
/// 512/128/64/32 with dropouts 0.7/0.5/0.3/0.2 and a softmax head.
pub fn covidlite_spec(num_classes: usize) -> Result<ModelSpec, ModelError> {
    if num_classes != 2 && num_classes != 3 {
        return Err(ModelError::InvalidClassCount(num_classes));
    }
    let mut rows = vec![
        RowKind::Input,
        RowKind::ConvBlock { filters: 16 },
        RowKind::MaxPool { dropout: 0.0 },
    ];
    for (i, &filters) in [32, 64, 128, 256, 256, 512].iter().enumerate() {
        rows.push(RowKind::SepConvBlock { filters });
        rows.push(RowKind::BatchNorm);
        rows.push(RowKind::MaxPool {
            dropout: if i >= 1 { 0.2 } else { 0.0 },
        });
    }
    for &(units, dropout) in &[(512, 0.7), (128, 0.5), (64, 0.3), (32, 0.2)] {
        rows.push(RowKind::Dense { units, dropout });
    }
    rows.push(RowKind::Head);
    debug_assert_eq!(rows.len(), 26);
    Ok(ModelSpec {
        num_classes,
        input_size: 224,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_six_rows() {
        let spec = covidlite_spec(3).unwrap();
        assert_eq!(spec.rows.len(), 26);
        assert_eq!(spec.rows[0], RowKind::Input);
        assert_eq!(spec.rows[25], RowKind::Head);
        // Five pools carry dropout 0.2, the first two none.
        let drops: Vec<f64> = spec
            .rows
            .iter()
            .filter_map(|r| match r {
                RowKind::MaxPool { dropout } => Some(*dropout),
                _ => None,
            })
            .collect();
        assert_eq!(drops, vec![0.0, 0.0, 0.2, 0.2, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn class_count_is_validated() {
        assert!(covidlite_spec(2).is_ok());
        assert!(covidlite_spec(3).is_ok());
        assert!(matches!(
            covidlite_spec(4),
            Err(ModelError::InvalidClassCount(4))
        ));
    }
}
