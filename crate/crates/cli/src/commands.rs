use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use segfire::analysis::{confusion, dense_weight_economy, metrics, model_complexity_report, ConfusionCounts};
use segfire::dataset::{synthesize_tiles, Sample, TileDatasetSpec, TileOrigin};
use segfire::imaging::{
    generate_scene, load_image, save_image, Distractor, FRAME_HEIGHT, FRAME_WIDTH, TILE_HEIGHT, TILE_WIDTH,
};
use segfire::nn::{ModelGraph, PoolMode};
use segfire::pipeline::{
    decide, evaluate_frame, run_pipeline, Decision, FrameStream, JsonLinesSink, SamplerConfig, TileClassifier,
};
use segfire::segnet::{
    build_segnet, load_weights, save_weights, train, EnhancementFlags, SegNetConfig, TrainOptions,
};
use segfire::Label;

use crate::bench::{bench_latency, write_bench_csv};
use crate::config::RunConfig;
use crate::manifest::{load_manifest, load_samples, write_manifest, ManifestEntry, MissingPolicy, Origin};
use crate::sweep::{render_grid, sweep, write_sweep_csv};

/// Bad flags or configuration; maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "segfire", version, about = "Tile-based wildfire detection on drone frames")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Args, Default)]
pub struct Common {
    /// TOML file with any of the run settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub pool_mode: Option<PoolModeArg>,
    /// Comma-separated subset of early-stop, augment, l2 (or none / all).
    #[arg(long, global = true)]
    pub enhancements: Option<String>,
    #[arg(long, global = true)]
    pub keep_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolModeArg {
    Downsample,
    Preserve,
}

impl From<PoolModeArg> for PoolMode {
    fn from(p: PoolModeArg) -> Self {
        match p {
            PoolModeArg::Downsample => PoolMode::Downsample,
            PoolModeArg::Preserve => PoolMode::Preserve,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// 320 x 240 labelled tiles.
    Tiles,
    /// Whole 1280 x 720 scenes, also written as a frame directory.
    Frames,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled dataset with a manifest.
    Synth {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0.5)]
        fire_ratio: f64,
        #[arg(long, value_enum, default_value_t = SynthKind::Tiles)]
        kind: SynthKind,
        /// Output directory; receives manifest.csv and the images.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a manifest and write its weights.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Optional validation manifest; otherwise a seeded 80/20 split.
        #[arg(long)]
        val_manifest: Option<PathBuf>,
        /// Output weights file.
        #[arg(long)]
        weights: PathBuf,
        /// Per-epoch history as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MissingPolicy::Fail)]
        missing: MissingPolicy,
    },
    /// Confusion counts and metrics for a model on a manifest, or for a
    /// predictions file with `predicted,actual` columns.
    Eval {
        #[arg(long, required_unless_present = "predictions")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        weights: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["manifest", "weights"])]
        predictions: Option<PathBuf>,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MissingPolicy::Fail)]
        missing: MissingPolicy,
    },
    /// Classify one image: a tile directly, anything else as a frame.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        image: PathBuf,
    },
    /// Run the detection workflow over a directory of numbered frames.
    Pipeline {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        fps: Option<u32>,
        /// Event log (JSON lines); stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer memory and operation costs against the published table.
    Complexity {
        /// Input as HEIGHTxWIDTH.
        #[arg(long, default_value = "240x320")]
        input: String,
        #[arg(long, default_value_t = 8)]
        bytes: u64,
        /// Directory for layers.csv and discrepancies.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward-pass latency per batch size, as CSV.
    Bench {
        /// Weights to time; a freshly initialised model otherwise.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Classify the tiles of a batch concurrently.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and time every cell of a conv-depth by dense-count grid.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        test_manifest: PathBuf,
        #[arg(long, value_delimiter = ',')]
        conv: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        dense: Option<Vec<usize>>,
        /// Grid as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = common.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = common.lr {
        cfg.lr = v;
    }
    if let Some(v) = common.pool_mode {
        cfg.pool_mode = v.into();
    }
    if let Some(v) = &common.enhancements {
        cfg.enhancements = v.clone();
    }
    if let Some(v) = common.keep_every {
        cfg.keep_every = v;
    }
    if cfg.batch_size == 0 {
        return usage("batch size must be at least 1");
    }
    if cfg.keep_every == 0 || cfg.fps == 0 {
        return usage("keep-every and fps must be positive");
    }
    if !(cfg.lr > 0.0) {
        return usage("learning rate must be positive");
    }
    Ok(cfg)
}

fn enhancements(cfg: &RunConfig) -> Result<EnhancementFlags> {
    cfg.enhancements.parse().map_err(|e: segfire::Error| UsageError(e.to_string()).into())
}

fn model_config(cfg: &RunConfig) -> SegNetConfig {
    SegNetConfig::default().with_pool_mode(cfg.pool_mode).with_seed(cfg.seed)
}

fn train_options(cfg: &RunConfig) -> Result<TrainOptions> {
    let mut opts = TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.lr,
        momentum: cfg.momentum,
        enhancements: enhancements(cfg)?,
        patience: cfg.patience,
        seed: cfg.seed,
        ..TrainOptions::default()
    };
    opts.loss.l2_lambda = cfg.l2_lambda;
    opts.loss.scope = cfg.l2_scope;
    Ok(opts)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_model(path: &Path) -> Result<ModelGraph<f32>> {
    load_weights(path).with_context(|| format!("loading weights {}", path.display()))
}

fn manifest_samples(path: &Path, missing: MissingPolicy) -> Result<Vec<Sample>> {
    let entries = load_manifest(path, missing)?;
    load_samples(path, &entries)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::Synth { count, fire_ratio, kind, out } => synth(&cfg, count, fire_ratio, kind, &out),
        Command::Train { manifest, val_manifest, weights, out, missing } => {
            let train_set = manifest_samples(&manifest, missing)?;
            let val = val_manifest.as_deref().map(|p| manifest_samples(p, missing)).transpose()?;
            let mut model: ModelGraph<f32> = build_segnet(&model_config(&cfg))?;
            let opts = train_options(&cfg)?;
            let history = train(&mut model, &train_set, val.as_deref(), &opts)?;
            save_weights(&model, &weights)?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            for r in &history.epochs {
                w.serialize(r)?;
            }
            w.flush()?;
            if let Some(r) = history.last() {
                eprintln!(
                    "kept epoch {} of {}: val accuracy {:.4}{}",
                    r.epoch,
                    history.epochs.len(),
                    r.val_accuracy,
                    if history.stopped_early { " (stopped early)" } else { "" }
                );
            }
            Ok(())
        }
        Command::Eval { manifest, weights, predictions, out, missing } => {
            let counts = match (predictions, manifest) {
                (Some(p), _) => counts_from_predictions(&p)?,
                (None, Some(m)) => {
                    let Some(w) = weights else { return usage("eval on a manifest needs --weights") };
                    let model = load_model(&w)?;
                    let samples = manifest_samples(&m, missing)?;
                    let mut predicted = Vec::with_capacity(samples.len());
                    for s in &samples {
                        predicted.push(model.classify_tile(&s.image)?.0);
                    }
                    let actual: Vec<Label> = samples.iter().map(|s| s.label).collect();
                    confusion(&predicted, &actual)?
                }
                (None, None) => return usage("eval needs --manifest or --predictions"),
            };
            let report = metrics(&counts)?;
            println!(
                "TP {} TN {} FP {} FN {} (n = {})",
                counts.true_positive,
                counts.true_negative,
                counts.false_positive,
                counts.false_negative,
                counts.total()
            );
            print!("{report}");
            if let Some(p) = out {
                let json = serde_json::json!({ "counts": counts, "metrics": report });
                std::fs::write(&p, serde_json::to_string_pretty(&json)? + "\n")?;
            }
            Ok(())
        }
        Command::Infer { weights, image } => {
            let model = load_model(&weights)?;
            let img = load_image(&image).with_context(|| format!("loading {}", image.display()))?;
            if img.dims() == (TILE_WIDTH, TILE_HEIGHT) {
                let (label, score) = model.classify_tile(&img)?;
                println!("{label} {score:.6}");
            } else {
                let array = evaluate_frame(&img, &model)?;
                for (i, (v, s)) in array.verdicts.iter().zip(&array.scores).enumerate() {
                    println!("tile {i:>2} {} {s:.6}", if *v { Label::Fire } else { Label::NonFire });
                }
                println!(
                    "decision {}",
                    match decide(&array) {
                        Decision::Continue => "continue".to_string(),
                        Decision::Reprocess(t) => format!("reprocess {t}"),
                        Decision::Alert => "alert".to_string(),
                    }
                );
            }
            Ok(())
        }
        Command::Pipeline { weights, frames, fps, out } => {
            let model = load_model(&weights)?;
            let fps = fps.unwrap_or(cfg.fps);
            let stream = FrameStream::from_dir(&frames, fps)?;
            let sampler = SamplerConfig { keep_every: cfg.keep_every, fps };
            let mut sink = JsonLinesSink::new(output(out.as_deref())?);
            let log = run_pipeline(&stream, &model, &sampler, &mut sink)?;
            let alerts = log.iter().filter(|e| e.is_alert()).count();
            eprintln!("{} sampled frames, {alerts} alerts", log.len());
            Ok(())
        }
        Command::Complexity { input, bytes, out } => complexity(&cfg, &input, bytes, out.as_deref()),
        Command::Bench { weights, batch_sizes, repetitions, parallel, out } => {
            let model = match weights {
                Some(w) => load_model(&w)?,
                None => build_segnet(&model_config(&cfg))?,
            };
            let sizes = batch_sizes.unwrap_or_else(|| cfg.bench_batch_sizes.clone());
            let reps = repetitions.unwrap_or(cfg.bench_repetitions);
            if reps == 0 || sizes.is_empty() || sizes.contains(&0) {
                return usage("bench needs positive batch sizes and repetitions");
            }
            let results = bench_latency(&model, &sizes, reps, parallel, cfg.seed)?;
            write_bench_csv(&results, output(out.as_deref())?)
        }
        Command::Sweep { manifest, test_manifest, conv, dense, out } => {
            let conv = conv.unwrap_or_else(|| cfg.conv_layers.clone());
            let dense = dense.unwrap_or_else(|| cfg.dense_layers.clone());
            if conv.contains(&0) {
                return usage("conv depths must be positive");
            }
            let train_set = manifest_samples(&manifest, MissingPolicy::Fail)?;
            let test_set = manifest_samples(&test_manifest, MissingPolicy::Fail)?;
            let cells = sweep(&train_set, &test_set, &conv, &dense, &model_config(&cfg), &train_options(&cfg)?)?;
            eprint!("{}", render_grid(&cells, &conv, &dense));
            write_sweep_csv(&cells, output(out.as_deref())?)
        }
    }
}

fn synth(cfg: &RunConfig, count: usize, fire_ratio: f64, kind: SynthKind, out: &Path) -> Result<()> {
    if !(0.0..=1.0).contains(&fire_ratio) {
        return usage("fire ratio must lie in [0, 1]");
    }
    let images = out.join("images");
    std::fs::create_dir_all(&images).with_context(|| format!("cannot create {}", images.display()))?;
    let mut entries = Vec::with_capacity(count);
    match kind {
        SynthKind::Tiles => {
            let spec = TileDatasetSpec { count, fire_ratio, seed: cfg.seed, ..TileDatasetSpec::default() };
            for (i, t) in synthesize_tiles(&spec)?.into_iter().enumerate() {
                let rel = PathBuf::from("images").join(format!("{i:06}.ppm"));
                save_image(&t.sample.image, out.join(&rel))?;
                let origin = match t.origin {
                    TileOrigin::Tile => Origin::Segmented,
                    TileOrigin::Zoomed => Origin::Augmented,
                };
                entries.push(ManifestEntry { path: rel, label: t.sample.label, origin });
            }
        }
        SynthKind::Frames => {
            let fires = segfire::dataset::fire_quota(count, fire_ratio);
            let distractors = [Distractor::None, Distractor::Fog, Distractor::FallFoliage];
            for i in 0..count {
                let scene = generate_scene(cfg.seed.wrapping_add(i as u64), i < fires, distractors[i % 3]);
                debug_assert_eq!(scene.image.dims(), (FRAME_WIDTH, FRAME_HEIGHT));
                let rel = PathBuf::from("images").join(format!("{i:06}.ppm"));
                save_image(&scene.image, out.join(&rel))?;
                entries.push(ManifestEntry { path: rel, label: scene.label, origin: Origin::Synthetic });
            }
        }
    }
    write_manifest(&entries, &out.join("manifest.csv"))?;
    eprintln!("wrote {} images to {}", entries.len(), out.display());
    Ok(())
}

#[derive(serde::Deserialize)]
struct PredictionRow {
    predicted: Label,
    actual: Label,
}

fn counts_from_predictions(path: &Path) -> Result<ConfusionCounts> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let (mut predicted, mut actual) = (Vec::new(), Vec::new());
    for (i, row) in reader.deserialize::<PredictionRow>().enumerate() {
        let row = row.with_context(|| format!("{}:{}", path.display(), i + 2))?;
        predicted.push(row.predicted);
        actual.push(row.actual);
    }
    Ok(confusion(&predicted, &actual)?)
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let parsed = s.split_once(['x', 'X']).and_then(|(h, w)| Some((h.trim().parse().ok()?, w.trim().parse().ok()?)));
    match parsed {
        Some((h, w)) if h > 0 && w > 0 => Ok((h, w)),
        _ => usage(format!("input must look like HEIGHTxWIDTH, got `{s}`")),
    }
}

fn complexity(cfg: &RunConfig, input: &str, bytes: u64, out: Option<&Path>) -> Result<()> {
    let (h, w) = parse_dims(input)?;
    if bytes == 0 {
        return usage("bytes per element must be positive");
    }
    let config = SegNetConfig { input_shape: [h, w, 3], ..model_config(cfg) };
    // Zero-initialised: only the architecture matters here. f32 halves the
    // allocation for large inputs.
    let model: ModelGraph<f32> = config.build_zeroed()?;
    let report = model_complexity_report(&model, bytes)?;
    println!("pool mode {:?}, input {h}x{w}x3, {bytes} bytes per element", cfg.pool_mode);
    print!("{report}");
    let economy = dense_weight_economy(&config, [FRAME_HEIGHT, FRAME_WIDTH, 3])?;
    println!(
        "first dense layer: {} params for this input vs {} for a {FRAME_WIDTH}x{FRAME_HEIGHT} frame (weights ratio {}, flatten {} vs {})",
        economy.tile_dense1_params,
        economy.frame_dense1_params,
        economy.weight_ratio,
        economy.tile_flatten,
        economy.frame_flatten
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("layers.csv"))?;
        w.write_record([
            "layer",
            "params",
            "model_space",
            "input_image_memory",
            "generated_output_memory",
            "operational_space",
            "operational_space_compat",
            "operations",
            "topl",
        ])?;
        let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &report.rows {
            w.write_record([
                r.name.clone(),
                r.params.to_string(),
                r.model_space.to_string(),
                opt(r.input_image_memory),
                opt(r.generated_output_memory),
                r.operational_space.to_string(),
                opt(r.operational_space_compat),
                r.operations.to_string(),
                opt(r.topl),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("discrepancies.csv"))?;
        w.write_record([
            "layer",
            "column",
            "published",
            "formula_name",
            "formula",
            "abs_diff",
            "rel_diff",
            "matches",
            "alternative_name",
            "alternative",
            "alternative_matches",
        ])?;
        for c in &report.discrepancies.cells {
            w.write_record([
                c.layer.to_string(),
                c.column.as_str().to_string(),
                c.published.to_string(),
                c.formula_name.to_string(),
                opt(c.formula),
                opt(c.abs_diff),
                c.rel_diff.map(|r| format!("{r:.6}")).unwrap_or_default(),
                c.matches.to_string(),
                c.alternative_name.unwrap_or("").to_string(),
                opt(c.alternative),
                c.alternative_matches.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

