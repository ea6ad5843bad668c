//! Forward-pass latency per batch of tiles.

use std::time::Instant;

use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use segfire::imaging::{TILE_HEIGHT, TILE_WIDTH};
use segfire::nn::ModelGraph;
use segfire::pipeline::TILE_COUNT;
use segfire::{Scalar, Tensor};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub batch_size: usize,
    /// Mean wall-clock per batch.
    pub mean_ms: f64,
    pub per_segment_ms: f64,
    /// Twelve tiles make one frame.
    pub per_complete_image_ms: f64,
    #[serde(skip)]
    pub repetitions: usize,
}

impl BenchResult {
    fn new(batch_size: usize, mean_ms: f64, repetitions: usize) -> Self {
        let per_segment_ms = mean_ms / batch_size as f64;
        Self { batch_size, mean_ms, per_segment_ms, per_complete_image_ms: TILE_COUNT as f64 * per_segment_ms, repetitions }
    }
}

fn random_tiles<T: Scalar>(n: usize, shape: [usize; 3], seed: u64) -> Vec<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let data = (0..shape.iter().product::<usize>()).map(|_| T::from_f64_lossy(rng.random::<f64>())).collect();
            Tensor::new(shape.to_vec(), data).expect("shape matches data")
        })
        .collect()
}

/// Times `repetitions` forward passes over a batch of random tiles for each
/// batch size, after one untimed warm-up batch. Only the forward passes are
/// inside the timed region.
pub fn bench_latency<T: Scalar>(
    model: &ModelGraph<T>,
    batch_sizes: &[usize],
    repetitions: usize,
    parallel: bool,
    seed: u64,
) -> Result<Vec<BenchResult>> {
    ensure!(repetitions >= 1, "repetitions must be at least 1");
    ensure!(batch_sizes.iter().all(|&b| b >= 1), "batch sizes must be at least 1");
    let shape = model.input_shape();
    ensure!(shape == [TILE_HEIGHT, TILE_WIDTH, 3] || shape[2] == 3, "model input must be RGB");
    let mut results = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        let tiles = random_tiles::<T>(b, shape, seed ^ b as u64);
        let run = |tiles: &[Tensor<T>]| -> Result<()> {
            if parallel {
                tiles.par_iter().try_for_each(|t| model.score(t).map(drop))?;
            } else {
                for t in tiles {
                    model.score(t)?;
                }
            }
            Ok(())
        };
        run(&tiles)?;
        let mut total = 0.0;
        for _ in 0..repetitions {
            let start = Instant::now();
            run(&tiles)?;
            total += start.elapsed().as_secs_f64() * 1e3;
        }
        results.push(BenchResult::new(b, total / repetitions as f64, repetitions));
    }
    Ok(results)
}

pub fn write_bench_csv(results: &[BenchResult], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
