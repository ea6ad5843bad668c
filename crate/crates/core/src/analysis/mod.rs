//! Classification metrics and the per-layer memory / operation cost model,
//! with a cell-by-cell comparison against the published cost table.

mod cost;
mod metrics;
mod report;

pub use cost::{
    asymptotic_check, conv_nopl, conv_params, conv_topl, conv_topl_exact, dense_ops, dense_params, dense_space,
    dense_space_compat, generated_output_memory, input_image_memory, total_operational_space, weight_memory, CostKind,
    Dimension, LayerCostInputs, LinearityReport, F64_BYTES,
};
pub use metrics::{confusion, metrics, rate_f64, ConfusionCounts, MetricsReport, Rate};
pub use report::{
    dense_weight_economy, model_complexity_report, ComplexityReport, DenseEconomy, DiscrepancyCell, DiscrepancyReport,
    LayerComplexity, TableColumn, PUBLISHED_MEMORY_TABLE, PUBLISHED_TOTAL_OPERATIONAL_SPACE, PUBLISHED_TOTAL_OPERATIONS,
};
