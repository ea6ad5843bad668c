//! Architecture grid: feature-stack depth by number of hidden dense layers.

use std::time::Instant;

use anyhow::Result;
use segfire::analysis::model_complexity_report;
use segfire::dataset::Sample;
use segfire::nn::ModelGraph;
use segfire::pipeline::TILE_COUNT;
use segfire::segnet::{build_segnet, evaluate, feature_stack, train, SegNetConfig, TrainOptions};
use segfire::Error;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub conv_layers: usize,
    pub dense_layers: usize,
    pub feasible: bool,
    pub params: Option<usize>,
    pub operations: Option<u64>,
    pub test_accuracy: Option<f64>,
    pub ms_per_image: Option<f64>,
}

/// Architecture of one grid cell: the reference feature stack extended (or
/// truncated) to `conv_layers` entries, followed by `dense_layers` hidden
/// 16-unit layers and the output unit.
pub fn cell_config(base: &SegNetConfig, conv_layers: usize, dense_layers: usize) -> SegNetConfig {
    SegNetConfig { features: feature_stack(conv_layers), dense_units: vec![16; dense_layers], ..base.clone() }
}

/// Timing repetitions per cell; each repetition classifies one frame's tiles.
const TIMING_REPS: usize = 3;

pub fn sweep(
    train_set: &[Sample],
    test_set: &[Sample],
    conv_range: &[usize],
    dense_range: &[usize],
    base: &SegNetConfig,
    options: &TrainOptions,
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::new();
    for &dense in dense_range {
        for &conv in conv_range {
            let cfg = cell_config(base, conv, dense);
            let mut model: ModelGraph<f32> = match build_segnet(&cfg) {
                Ok(m) => m,
                Err(Error::Build(why)) => {
                    log::info!("{conv} conv / {dense} dense infeasible: {why}");
                    cells.push(SweepCell {
                        conv_layers: conv,
                        dense_layers: dense,
                        feasible: false,
                        params: None,
                        operations: None,
                        test_accuracy: None,
                        ms_per_image: None,
                    });
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            train(&mut model, train_set, None, options)?;
            let refs: Vec<&Sample> = test_set.iter().collect();
            let accuracy = if refs.is_empty() { None } else { Some(evaluate(&model, &refs, &options.loss)?.1) };
            let tile = segfire::Tensor::<f32>::zeros(&model.input_shape());
            model.score(&tile)?;
            let start = Instant::now();
            for _ in 0..TIMING_REPS * TILE_COUNT {
                model.score(&tile)?;
            }
            let ms = start.elapsed().as_secs_f64() * 1e3 / TIMING_REPS as f64;
            let ops = model_complexity_report(&model, 8)?.total_operations;
            log::info!("{conv} conv / {dense} dense: accuracy {accuracy:?}, {ms:.2} ms per frame");
            cells.push(SweepCell {
                conv_layers: conv,
                dense_layers: dense,
                feasible: true,
                params: Some(model.param_count()),
                operations: Some(ops),
                test_accuracy: accuracy,
                ms_per_image: Some(ms),
            });
        }
    }
    Ok(cells)
}

pub fn write_sweep_csv(cells: &[SweepCell], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

/// Table-shaped text: one row per dense count, one column per conv depth.
pub fn render_grid(cells: &[SweepCell], conv_range: &[usize], dense_range: &[usize]) -> String {
    let mut s = format!("{:<10}", "");
    for c in conv_range {
        s += &format!("{:>22}", format!("{c} conv"));
    }
    s.push('\n');
    for &d in dense_range {
        s += &format!("{:<10}", format!("{d} dense"));
        for &c in conv_range {
            let cell = cells.iter().find(|x| x.conv_layers == c && x.dense_layers == d);
            let text = match cell {
                Some(SweepCell { feasible: true, test_accuracy, ms_per_image: Some(ms), .. }) => {
                    let acc = test_accuracy.map_or_else(|| "-".into(), |a| format!("{:.2}%", 100.0 * a));
                    format!("{ms:.1} ms / {acc}")
                }
                Some(_) => "infeasible".into(),
                None => "-".into(),
            };
            s += &format!("{text:>22}");
        }
        s.push('\n');
    }
    s
}
