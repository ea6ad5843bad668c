use num_rational::Ratio;
use proptest::prelude::*;
use segfire::analysis::*;
use segfire::nn::{Layer, ModelGraph, PoolMode};
use segfire::segnet::{build_segnet, feature_stack, SegNetConfig};
use segfire::Label;

fn preserve_report() -> ComplexityReport {
    let cfg = SegNetConfig::default().with_pool_mode(PoolMode::Preserve);
    let model: ModelGraph<f32> = cfg.build_zeroed().unwrap();
    model_complexity_report(&model, 8).unwrap()
}

#[test]
fn parameter_column_matches_table() {
    let report = preserve_report();
    let params: Vec<u64> = report.rows.iter().map(|r| r.params).collect();
    assert_eq!(params, [896, 18_496, 73_856, 2_457_616, 272, 17]);
    let conv_space: Vec<u64> = report.rows[..3].iter().map(|r| r.model_space).collect();
    assert_eq!(conv_space, [7_168, 147_968, 590_848]);
    for (row, (_, published)) in report.rows.iter().zip(PUBLISHED_MEMORY_TABLE) {
        assert_eq!(row.params, published[0], "{}", row.name);
    }
}

#[test]
fn dense_operations_and_published_totals() {
    let report = preserve_report();
    let ops: Vec<u64> = report.rows[3..].iter().map(|r| r.operations).collect();
    assert_eq!(ops, [4_915_200, 512, 32]);
    let col = |i: usize| PUBLISHED_MEMORY_TABLE.iter().map(|(_, v)| v[i]).sum::<u64>();
    assert_eq!(col(2), 44_177_408);
    assert_eq!(col(3), 19_275_424);
    assert_eq!(report.published_total_operational_space, col(2));
    assert_eq!(report.published_total_operations, col(3));
}

#[test]
fn every_table_cell_is_classified() {
    let report = preserve_report();
    let cells = &report.discrepancies.cells;
    assert_eq!(cells.len(), 24);
    for (layer, _) in PUBLISHED_MEMORY_TABLE {
        for column in [TableColumn::Parameters, TableColumn::ModelSpace, TableColumn::OperationalSpace, TableColumn::Operations] {
            let cell = report.discrepancies.cell(layer, column).expect("cell present");
            assert!(cell.formula.is_some(), "{layer} {column:?} has no computed value");
            assert_eq!(cell.matches, cell.formula == Some(cell.published));
        }
    }
    // The compat dense-space variant reproduces the Dense 1 cell.
    let d1 = report.discrepancies.cell("Dense 1", TableColumn::OperationalSpace).unwrap();
    assert!(!d1.matches);
    assert!(d1.alternative_matches);
    assert_eq!(d1.alternative, Some(39_322_368));
}

#[test]
fn conv1_costs_by_hand() {
    // 32 filters of 3x3x3 on a 240x320 input at stride 2, 8-byte scalars.
    let i = LayerCostInputs::conv(32, 3, 3, 3, 2, 240, 320);
    assert_eq!(conv_params(&i).unwrap(), 896);
    assert_eq!(weight_memory(&i).unwrap(), 7_168);
    assert_eq!(input_image_memory(&i).unwrap(), 3 * 240 * 320 * 8);
    // floor(32 (240 - 3 + 2)(320 - 3 + 2) / 2^2) elements of 8 bytes
    assert_eq!(generated_output_memory(&i).unwrap(), 32 * 239 * 319 / 4 * 8);
    assert_eq!(generated_output_memory(&i).unwrap(), 4_879_424);
}

#[test]
fn dense_economy_is_twelvefold() {
    let cfg = SegNetConfig::default().with_pool_mode(PoolMode::Preserve);
    let e = dense_weight_economy(&cfg, [720, 1280, 3]).unwrap();
    assert_eq!(e.tile_dense1_params, 2_457_616);
    assert_eq!(e.frame_dense1_params, 29_491_216);
    assert_eq!(e.frame_dense1_params, 16 * (1_843_200 + 1));
    assert_eq!(e.weight_ratio, Ratio::from_integer(12));
    assert_eq!(e.bias_offset, 11 * 16);
}

#[test]
fn operations_are_linear_in_each_dimension() {
    let i = LayerCostInputs::conv(32, 3, 3, 3, 2, 240, 320);
    for dim in [Dimension::M, Dimension::N] {
        let r = asymptotic_check(&i, dim).unwrap();
        assert!(r.affine, "{dim:?}");
        assert_eq!(r.slope, r.expected_slope, "{dim:?}");
    }
}

#[test]
fn reported_confusion_counts() {
    let m = metrics(&ConfusionCounts::new(235, 198, 5, 3)).unwrap();
    assert!((rate_f64(m.accuracy.unwrap()) - 0.98185).abs() < 1e-5);
    assert_eq!(m.precision, Some(Ratio::new(235, 240)));
    assert_eq!(m.recall, Some(Ratio::new(235, 238)));
    assert_eq!(m.fpr, Some(Ratio::new(5, 203)));
    assert_eq!(m.fnr, Some(Ratio::new(3, 238)));
    assert_eq!(m.tnr, Some(Ratio::new(198, 203)));
}

/// Independent tally of label vectors built from the counts.
fn oracle(tp: u64, tn: u64, fp: u64, fn_: u64) -> (Vec<Label>, Vec<Label>) {
    let mut preds = Vec::new();
    let mut actual = Vec::new();
    for (n, p, a) in [(tp, Label::Fire, Label::Fire), (tn, Label::NonFire, Label::NonFire), (fp, Label::Fire, Label::NonFire), (fn_, Label::NonFire, Label::Fire)] {
        for _ in 0..n {
            preds.push(p);
            actual.push(a);
        }
    }
    (preds, actual)
}

#[test]
fn metric_identities_exhaustive() {
    const MAX: u64 = 50;
    let one = Ratio::from_integer(1u64);
    for tp in 0..=MAX {
        for tn in 0..=MAX - tp {
            for fp in 0..=MAX - tp - tn {
                for fn_ in 0..=MAX - tp - tn - fp {
                    let c = ConfusionCounts::new(tp, tn, fp, fn_);
                    if c.total() == 0 {
                        assert!(metrics(&c).is_err());
                        continue;
                    }
                    if c.total() <= 12 {
                        let (p, a) = oracle(tp, tn, fp, fn_);
                        assert_eq!(confusion(&p, &a).unwrap(), c);
                    }
                    let m = metrics(&c).unwrap();
                    let pos = tp + fn_;
                    let neg = tn + fp;
                    assert_eq!(m.recall.is_some(), pos > 0);
                    assert_eq!(m.tnr.is_some(), neg > 0);
                    assert_eq!(m.precision.is_some(), tp + fp > 0);
                    if pos > 0 {
                        assert_eq!(m.recall.unwrap() + m.fnr.unwrap(), one);
                    }
                    if neg > 0 {
                        assert_eq!(m.tnr.unwrap() + m.fpr.unwrap(), one);
                    }
                    let acc = m.accuracy.unwrap();
                    assert_eq!(acc * Ratio::from_integer(c.total()), Ratio::from_integer(tp + tn));
                }
            }
        }
    }
}

fn segnet_strategy() -> impl Strategy<Value = SegNetConfig> {
    (1usize..=7, 8usize..=96, 8usize..=96, 1usize..=3, prop::collection::vec(1usize..=24, 0..=3), any::<bool>()).prop_map(
        |(depth, h, w, c, dense, preserve)| {
            let mode = if preserve { PoolMode::Preserve } else { PoolMode::Downsample };
            SegNetConfig {
                input_shape: [h, w, c],
                features: feature_stack(depth),
                dense_units: dense,
                ..SegNetConfig::default()
            }
            .with_pool_mode(mode)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// Graph parameter counts agree with the cost-model formulas, layer by layer.
    #[test]
    fn param_counts_agree_with_cost_model(cfg in segnet_strategy()) {
        let Ok(model) = cfg.build_zeroed::<f32>() else { return Ok(()) };
        let trace = model.shape_trace();
        let mut total = 0u64;
        for (i, layer) in model.layers().iter().enumerate() {
            let input = &trace[i];
            let expected = match layer {
                Layer::Conv(conv) => {
                    let k = conv.kernel_size() as u64;
                    let inputs = LayerCostInputs::conv(conv.filters() as u64, input[2] as u64, k, k, conv.stride as u64, input[0] as u64, input[1] as u64);
                    conv_params(&inputs).unwrap()
                }
                Layer::Dense(d) => dense_params(&LayerCostInputs::dense(d.inputs() as u64, d.outputs() as u64)).unwrap(),
                _ => 0,
            };
            prop_assert_eq!(layer.param_count() as u64, expected);
            total += expected;
        }
        prop_assert_eq!(model.param_count() as u64, total);
        prop_assert_eq!(cfg.flatten_size().unwrap(), trace[trace.len() - 1 - cfg.dense_units.len() - 2].iter().product::<usize>());
        let built = build_segnet::<f32>(&cfg).unwrap();
        prop_assert_eq!(built.param_count(), model.param_count());
    }
}
