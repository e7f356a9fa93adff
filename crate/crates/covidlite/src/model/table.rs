//! Per-row parameter accounting.

use super::ModelState;

/// One row of the parameter table, counted from the actual tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub name: String,
    pub output_shape: Vec<usize>,
    /// Bias-inclusive count, trainable + non-trainable.
    pub params_total: usize,
    pub params_trainable: usize,
}

/// The whole table plus its totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamTable {
    pub rows: Vec<TableRow>,
    pub trainable: usize,
    pub non_trainable: usize,
}

impl ParamTable {
    pub fn total(&self) -> usize {
        self.trainable + self.non_trainable
    }
}

/// Counts parameters row by row from the built model's tensors.
pub fn param_table(state: &ModelState) -> ParamTable {
    let params = state.network().params();
    // Map layer index -> (total, trainable) by walking enumeration order.
    let mut per_layer: Vec<(usize, usize)> = vec![(0, 0); state.network().len()];
    let mut layer_names: Vec<&str> = Vec::new();
    for (name, _) in state.network().layers() {
        layer_names.push(name);
    }
    for (info, tensor) in &params {
        let layer_name = info.name.split('.').next().unwrap();
        let idx = layer_names
            .iter()
            .position(|n| *n == layer_name)
            .expect("parameter names follow layer names");
        per_layer[idx].0 += tensor.len();
        if info.trainable {
            per_layer[idx].1 += tensor.len();
        }
    }

    let mut rows = Vec::with_capacity(state.rows().len());
    for meta in state.rows() {
        let (mut total, mut trainable) = (0, 0);
        for idx in meta.layers.clone() {
            total += per_layer[idx].0;
            trainable += per_layer[idx].1;
        }
        rows.push(TableRow {
            name: meta.name.clone(),
            output_shape: meta.output_shape.clone(),
            params_total: total,
            params_trainable: trainable,
        });
    }
    let trainable = rows.iter().map(|r| r.params_trainable).sum();
    let non_trainable = rows.iter().map(|r| r.params_total - r.params_trainable).sum();
    ParamTable {
        rows,
        trainable,
        non_trainable,
    }
}

impl std::fmt::Display for ParamTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<16} {:<14} {:>12} {:>12}",
            "layer", "output", "params", "trainable"
        )?;
        for row in &self.rows {
            let shape = format!(
                "({})",
                row.output_shape
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            writeln!(
                f,
                "{:<16} {:<14} {:>12} {:>12}",
                row.name,
                shape,
                group_thousands(row.params_total),
                group_thousands(row.params_trainable)
            )?;
        }
        writeln!(f, "total trainable:     {}", group_thousands(self.trainable))?;
        writeln!(
            f,
            "total non-trainable: {}",
            group_thousands(self.non_trainable)
        )
    }
}

/// 1019330 -> "1,019,330".
pub fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
