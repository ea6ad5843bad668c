//! Run configuration: defaults, an optional TOML file, then command-line
//! flags, each overriding the last.
//!
//! ```toml
//! seed = 0
//! epochs = 15
//! batch_size = 32
//! lr = 0.01
//! momentum = 0.9
//! enhancements = "none"          # or e.g. "early-stop,augment,l2"
//! patience = 3
//! l2_lambda = 0.01
//! l2_scope = "output-layer"      # or "all-dense"
//! pool_mode = "downsample"       # or "preserve"
//! keep_every = 20
//! fps = 60
//! conv_layers = [5, 6, 7, 9, 11]
//! dense_layers = [1, 2, 3]
//! bench_batch_sizes = [1, 8, 32, 64]
//! bench_repetitions = 10
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use segfire::nn::{PoolMode, RegScope};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub enhancements: String,
    pub patience: usize,
    pub l2_lambda: f64,
    pub l2_scope: RegScope,
    pub pool_mode: PoolMode,
    pub keep_every: usize,
    pub fps: u32,
    /// Feature-stack depths for the sweep; 5 is the reference stack.
    pub conv_layers: Vec<usize>,
    /// Hidden dense-16 layer counts for the sweep.
    pub dense_layers: Vec<usize>,
    pub bench_batch_sizes: Vec<usize>,
    pub bench_repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 15,
            batch_size: 32,
            lr: 0.01,
            momentum: 0.9,
            enhancements: "none".into(),
            patience: 3,
            l2_lambda: 0.01,
            l2_scope: RegScope::OutputLayer,
            pool_mode: PoolMode::Downsample,
            keep_every: 20,
            fps: 60,
            conv_layers: vec![5, 6, 7, 9, 11],
            dense_layers: vec![1, 2, 3],
            bench_batch_sizes: vec![1, 8, 32, 64],
            bench_repetitions: 10,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}
