use num_rational::Ratio;
use serde::Serialize;

use super::cost::*;
use crate::error::{Error, Result};
use crate::nn::{Layer, ModelGraph};
use crate::scalar::Scalar;
use crate::segnet::SegNetConfig;

/// Published per-layer figures: parameters, model space (bytes),
/// operational space (bytes), operations.
pub const PUBLISHED_MEMORY_TABLE: [(&str, [u64; 4]); 6] = [
    ("Conv2D 1", [896, 7_168, 2_889_856, 8_242_560]),
    ("Conv2D 2", [18_496, 147_968, 1_322_752, 4_095_360]),
    ("Conv2D 3", [73_856, 590_848, 636_544, 2_021_760]),
    ("Dense 1", [2_457_616, 18_530_432, 39_322_368, 4_915_200]),
    ("Dense 2", [272, 2_176, 4_864, 512]),
    ("Output", [17, 136, 1_024, 32]),
];

/// Stated totals: operational space in bytes and operations.
pub const PUBLISHED_TOTAL_OPERATIONAL_SPACE: u64 = 44_177_408;
pub const PUBLISHED_TOTAL_OPERATIONS: u64 = 19_275_424;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableColumn {
    Parameters,
    ModelSpace,
    OperationalSpace,
    Operations,
}

impl TableColumn {
    pub const ALL: [TableColumn; 4] =
        [TableColumn::Parameters, TableColumn::ModelSpace, TableColumn::OperationalSpace, TableColumn::Operations];

    pub fn as_str(self) -> &'static str {
        match self {
            TableColumn::Parameters => "parameters",
            TableColumn::ModelSpace => "model_space",
            TableColumn::OperationalSpace => "operational_space",
            TableColumn::Operations => "operations",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerComplexity {
    pub name: String,
    pub layer_index: usize,
    pub inputs: LayerCostInputs,
    pub params: u64,
    pub model_space: u64,
    /// Conv only.
    pub input_image_memory: Option<u64>,
    pub generated_output_memory: Option<u64>,
    /// `TOSC` for conv, as-written `TSpDL` for dense.
    pub operational_space: u64,
    /// Dense only: the `2m_o`-for-`2n` variant.
    pub operational_space_compat: Option<u64>,
    /// `NOpL` for conv, `2 n m_o` for dense.
    pub operations: u64,
    /// Conv only.
    pub topl: Option<u64>,
}

impl LayerComplexity {
    pub fn conv(name: String, layer_index: usize, inputs: LayerCostInputs) -> Result<Self> {
        Ok(Self {
            name,
            layer_index,
            inputs,
            params: conv_params(&inputs)?,
            model_space: weight_memory(&inputs)?,
            input_image_memory: Some(input_image_memory(&inputs)?),
            generated_output_memory: Some(generated_output_memory(&inputs)?),
            operational_space: total_operational_space(&inputs)?,
            operational_space_compat: None,
            operations: conv_nopl(&inputs)?,
            topl: Some(conv_topl(&inputs)?),
        })
    }

    pub fn dense(name: String, layer_index: usize, inputs: LayerCostInputs) -> Result<Self> {
        let params = dense_params(&inputs)?;
        Ok(Self {
            name,
            layer_index,
            inputs,
            params,
            model_space: params * inputs.p,
            input_image_memory: None,
            generated_output_memory: None,
            operational_space: dense_space(&inputs)?,
            operational_space_compat: Some(dense_space_compat(&inputs)?),
            operations: dense_ops(&inputs)?,
            topl: None,
        })
    }

    fn column(&self, col: TableColumn) -> (u64, Option<(&'static str, u64)>) {
        match col {
            TableColumn::Parameters => (self.params, None),
            TableColumn::ModelSpace => (self.model_space, None),
            TableColumn::OperationalSpace => {
                (self.operational_space, self.operational_space_compat.map(|v| ("dense_space_compat", v)))
            }
            TableColumn::Operations => (self.operations, self.topl.map(|v| ("topl", v))),
        }
    }

    fn formula_name(&self, col: TableColumn) -> &'static str {
        let conv = self.inputs.kind == CostKind::Conv;
        match col {
            TableColumn::Parameters => "params",
            TableColumn::ModelSpace => "params*p",
            TableColumn::OperationalSpace if conv => "tosc",
            TableColumn::OperationalSpace => "dense_space",
            TableColumn::Operations if conv => "nopl",
            TableColumn::Operations => "2*n*m_o",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyCell {
    pub layer: &'static str,
    pub column: TableColumn,
    pub published: u64,
    pub formula_name: &'static str,
    /// `None` when the model has no layer for this table row.
    pub formula: Option<u64>,
    pub abs_diff: Option<u64>,
    pub rel_diff: Option<f64>,
    pub matches: bool,
    pub alternative_name: Option<&'static str>,
    pub alternative: Option<u64>,
    pub alternative_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub cells: Vec<DiscrepancyCell>,
}

impl DiscrepancyReport {
    pub fn matched(&self) -> usize {
        self.cells.iter().filter(|c| c.matches).count()
    }

    pub fn cell(&self, layer: &str, column: TableColumn) -> Option<&DiscrepancyCell> {
        self.cells.iter().find(|c| c.layer == layer && c.column == column)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub bytes_per_element: u64,
    pub rows: Vec<LayerComplexity>,
    pub total_params: u64,
    pub total_operational_space: u64,
    pub total_operations: u64,
    /// Column sums of the published table.
    pub published_total_operational_space: u64,
    pub published_total_operations: u64,
    pub discrepancies: DiscrepancyReport,
}

/// Cost rows for every conv and dense layer of `model`, diffed cell by cell
/// against [`PUBLISHED_MEMORY_TABLE`]. Rows are named `Conv2D i`, `Dense i` and
/// `Output` for the last dense layer.
pub fn model_complexity_report<T: Scalar>(model: &ModelGraph<T>, bytes_per_element: u64) -> Result<ComplexityReport> {
    if bytes_per_element == 0 {
        return Err(Error::input("bytes per element must be positive"));
    }
    let trace = model.shape_trace();
    let last_dense = model.output_layer();
    let (mut convs, mut denses) = (0, 0);
    let mut rows = Vec::new();
    for (idx, layer) in model.layers().iter().enumerate() {
        let input = &trace[idx];
        let u = |v: usize| v as u64;
        match layer {
            Layer::Conv(c) => {
                convs += 1;
                let k = u(c.kernel_size());
                let inputs =
                    LayerCostInputs::conv(u(c.filters()), u(c.channels()), k, k, u(c.stride), u(input[0]), u(input[1]))
                        .with_bytes(bytes_per_element);
                rows.push(LayerComplexity::conv(format!("Conv2D {convs}"), idx, inputs)?);
            }
            Layer::Dense(d) => {
                denses += 1;
                let name = if Some(idx) == last_dense { "Output".to_string() } else { format!("Dense {denses}") };
                let inputs = LayerCostInputs::dense(u(d.inputs()), u(d.outputs())).with_bytes(bytes_per_element);
                rows.push(LayerComplexity::dense(name, idx, inputs)?);
            }
            Layer::Pool(_) | Layer::Flatten => {}
        }
    }

    let mut cells = Vec::with_capacity(24);
    for (layer, published) in PUBLISHED_MEMORY_TABLE {
        let row = rows.iter().find(|r| r.name == layer);
        for (col, &published_value) in TableColumn::ALL.iter().zip(&published) {
            let (formula, alt) = match row {
                Some(r) => {
                    let (f, a) = r.column(*col);
                    (Some(f), a)
                }
                None => (None, None),
            };
            let abs = formula.map(|f| f.abs_diff(published_value));
            cells.push(DiscrepancyCell {
                layer,
                column: *col,
                published: published_value,
                formula_name: row.map(|r| r.formula_name(*col)).unwrap_or("-"),
                formula,
                abs_diff: abs,
                rel_diff: abs.map(|a| a as f64 / published_value as f64),
                matches: formula == Some(published_value),
                alternative_name: alt.map(|a| a.0),
                alternative: alt.map(|a| a.1),
                alternative_matches: alt.is_some_and(|a| a.1 == published_value),
            });
        }
    }

    Ok(ComplexityReport {
        bytes_per_element,
        total_params: rows.iter().map(|r| r.params).sum(),
        total_operational_space: rows.iter().map(|r| r.operational_space).sum(),
        total_operations: rows.iter().map(|r| r.operations).sum(),
        published_total_operational_space: PUBLISHED_MEMORY_TABLE.iter().map(|(_, v)| v[2]).sum(),
        published_total_operations: PUBLISHED_MEMORY_TABLE.iter().map(|(_, v)| v[3]).sum(),
        rows,
        discrepancies: DiscrepancyReport { cells },
    })
}

fn opt(v: Option<u64>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

impl std::fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<9} {:>10} {:>12} {:>12} {:>12} {:>14} {:>14} {:>12} {:>12}",
            "layer", "params", "model_space", "iim", "gom", "op_space", "op_space_alt", "ops", "topl"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<9} {:>10} {:>12} {:>12} {:>12} {:>14} {:>14} {:>12} {:>12}",
                r.name,
                r.params,
                r.model_space,
                opt(r.input_image_memory),
                opt(r.generated_output_memory),
                r.operational_space,
                opt(r.operational_space_compat),
                r.operations,
                opt(r.topl)
            )?;
        }
        writeln!(f, "total params {}", self.total_params)?;
        writeln!(
            f,
            "total operational space {} (published column sum {})",
            self.total_operational_space, self.published_total_operational_space
        )?;
        writeln!(f, "total operations {} (published column sum {})", self.total_operations, self.published_total_operations)?;
        writeln!(f)?;
        write!(f, "{}", self.discrepancies)
    }
}

impl std::fmt::Display for DiscrepancyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<9} {:<18} {:>12} {:>12} {:>12} {:>9} {:<6} {:>12} {:<6}",
            "layer", "column", "published", "formula", "abs_diff", "rel_diff", "match", "alternative", "match"
        )?;
        for c in &self.cells {
            writeln!(
                f,
                "{:<9} {:<18} {:>12} {:>12} {:>12} {:>9} {:<6} {:>12} {:<6}",
                c.layer,
                c.column.as_str(),
                c.published,
                opt(c.formula),
                opt(c.abs_diff),
                c.rel_diff.map_or_else(|| "-".into(), |r| format!("{r:.4}")),
                if c.matches { "yes" } else { "no" },
                opt(c.alternative),
                match (c.alternative, c.alternative_matches) {
                    (None, _) => "-",
                    (_, true) => "yes",
                    (_, false) => "no",
                }
            )?;
        }
        writeln!(f, "{} of {} cells match as written", self.matched(), self.cells.len())
    }
}

/// First-dense-layer size for a tile-input model against the same network
/// fed a whole frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DenseEconomy {
    pub tile_flatten: u64,
    pub frame_flatten: u64,
    pub dense_units: u64,
    pub tile_dense1_params: u64,
    pub frame_dense1_params: u64,
    pub flatten_ratio: Ratio<u64>,
    /// Weight-matrix ratio, biases excluded.
    pub weight_ratio: Ratio<u64>,
    /// `ratio * tile params - frame params`: the biases the tile model
    /// counts once per ratio step but the frame model counts once.
    pub bias_offset: i64,
}

pub fn dense_weight_economy(tile: &SegNetConfig, frame_shape: [usize; 3]) -> Result<DenseEconomy> {
    let units = *tile.dense_units.first().ok_or_else(|| Error::input("model has no hidden dense layer"))? as u64;
    let frame = SegNetConfig { input_shape: frame_shape, ..tile.clone() };
    let tf = tile.flatten_size()? as u64;
    let ff = frame.flatten_size()? as u64;
    let (tp, fp) = (tf * units + units, ff * units + units);
    let flatten_ratio = Ratio::new(ff, tf);
    let weight_ratio = Ratio::new(ff * units, tf * units);
    let bias_offset = if weight_ratio.is_integer() {
        (weight_ratio.to_integer() * tp) as i64 - fp as i64
    } else {
        0
    };
    Ok(DenseEconomy {
        tile_flatten: tf,
        frame_flatten: ff,
        dense_units: units,
        tile_dense1_params: tp,
        frame_dense1_params: fp,
        flatten_ratio,
        weight_ratio,
        bias_offset,
    })
}
