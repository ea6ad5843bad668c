use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_indices, Sample};
use crate::error::{Error, Result};
use crate::imaging::{augment, AugmentationSpec};
use crate::nn::{add_regularization_grad, regularized_weights, Gradients, HingeLossConfig, ModelGraph, Sgd};
use crate::scalar::Scalar;

/// Optional training enhancements; all off is plain training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnhancementFlags {
    pub early_stopping: bool,
    pub augmentation: bool,
    pub l2_regularization: bool,
}

impl EnhancementFlags {
    pub const PLAIN: Self = Self { early_stopping: false, augmentation: false, l2_regularization: false };
    pub const ALL: Self = Self { early_stopping: true, augmentation: true, l2_regularization: true };

    pub fn is_plain(&self) -> bool {
        *self == Self::PLAIN
    }
}

impl fmt::Display for EnhancementFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.early_stopping, "early-stop"),
            (self.augmentation, "augment"),
            (self.l2_regularization, "l2"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

/// Comma-separated list of `none`, `all`, `early-stop`, `augment`, `l2`.
impl FromStr for EnhancementFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = Self::PLAIN;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "none" | "plain" => {}
                "all" => flags = Self::ALL,
                "early-stop" | "early-stopping" => flags.early_stopping = true,
                "augment" | "augmentation" => flags.augmentation = true,
                "l2" => flags.l2_regularization = true,
                other => return Err(Error::input(format!("unknown enhancement `{other}`"))),
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub enhancements: EnhancementFlags,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub augmentation: AugmentationSpec,
    /// Used only when no validation set is supplied.
    pub validation_fraction: f64,
    /// `l2_lambda` applies only with the L2 enhancement.
    pub loss: HingeLossConfig,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            enhancements: EnhancementFlags::PLAIN,
            patience: 3,
            augmentation: AugmentationSpec::training_default(),
            validation_fraction: 0.2,
            loss: HingeLossConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub enhancements: EnhancementFlags,
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
    /// Epoch whose weights the model holds after training; with early
    /// stopping the best-validation weights are restored.
    pub final_epoch: Option<usize>,
}

impl TrainingHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.final_epoch.and_then(|e| self.epochs.iter().find(|r| r.epoch == e))
    }
}

/// Loss and accuracy of `model` over `samples`, using the per-batch
/// objective the trainer minimises (mean hinge term plus the L2 term).
pub fn evaluate<T: Scalar>(model: &ModelGraph<T>, samples: &[&Sample], loss: &HingeLossConfig) -> Result<(f64, f64)> {
    let scores: Vec<T> =
        samples.par_iter().map(|s| model.score(&s.image.to_tensor())).collect::<Result<_>>()?;
    Ok(summarize(model, samples, &scores, loss))
}

fn summarize<T: Scalar>(model: &ModelGraph<T>, samples: &[&Sample], scores: &[T], loss: &HingeLossConfig) -> (f64, f64) {
    let n = samples.len().max(1) as f64;
    let mut data = 0.0;
    let mut correct = 0usize;
    for (s, &score) in samples.iter().zip(scores) {
        data += loss.margin_loss(score, s.label.sign::<T>()).as_f64();
        correct += usize::from(crate::label::Label::from_score(score) == s.label);
    }
    let reg = loss.regularization(&regularized_weights(model, loss.scope), samples.len()).as_f64();
    (data / n + reg, correct as f64 / n)
}

fn validate(model_input: [usize; 3], samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::input("empty dataset"));
    }
    let want = (model_input[1], model_input[0]);
    if model_input[2] != 3 {
        return Err(Error::input("model input must have 3 channels"));
    }
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.image.dims() != want) {
        return Err(Error::input(format!("sample {i} is {:?}, model expects {want:?}", s.image.dims())));
    }
    Ok(())
}

/// Mini-batch momentum SGD on the squared-hinge objective.
///
/// Each step minimises `lambda / p * ||W||^2 + (C / p) * sum_i h_i` over a
/// batch of `p` samples, so the data term is a batch mean. Without a
/// validation set, a seeded 80/20 split of `train_set` is used.
pub fn train<T: Scalar>(
    model: &mut ModelGraph<T>,
    train_set: &[Sample],
    val_set: Option<&[Sample]>,
    options: &TrainOptions,
) -> Result<TrainingHistory> {
    if options.batch_size < 1 {
        return Err(Error::input("batch size must be at least 1"));
    }
    validate(model.input_shape(), train_set)?;
    options.loss.validate()?;
    let mut loss = options.loss;
    if !options.enhancements.l2_regularization {
        loss.l2_lambda = 0.0;
    }
    let mut history =
        TrainingHistory { enhancements: options.enhancements, epochs: Vec::new(), stopped_early: false, final_epoch: None };
    if options.epochs == 0 {
        return Ok(history);
    }

    let (train, val): (Vec<&Sample>, Vec<&Sample>) = match val_set {
        Some(v) => {
            validate(model.input_shape(), v)?;
            (train_set.iter().collect(), v.iter().collect())
        }
        None => {
            let (t, v) = split_indices(train_set.len(), options.validation_fraction, options.seed)?;
            if t.is_empty() || v.is_empty() {
                return Err(Error::input(format!(
                    "{} samples are too few for a {} validation split",
                    train_set.len(),
                    options.validation_fraction
                )));
            }
            (t.iter().map(|&i| &train_set[i]).collect(), v.iter().map(|&i| &train_set[i]).collect())
        }
    };

    let mut sgd = Sgd::new(T::from_f64_lossy(options.learning_rate), T::from_f64_lossy(options.momentum), T::zero())?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, ModelGraph<T>)> = None;
    let mut stale = 0;

    for epoch in 1..=options.epochs {
        order.shuffle(&mut rng);
        let mut data_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(options.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| rng.random()).collect();
            let (grads, data, hits) = batch_gradients(model, &train, batch, &seeds, &loss, options)?;
            data_sum += data;
            correct += hits;
            let mut grads = grads;
            add_regularization_grad(&mut grads, model, &loss, batch.len(), T::one());
            sgd.step(model, &grads)?;
        }
        let n = train.len() as f64;
        let reg = loss.regularization(&regularized_weights(model, loss.scope), options.batch_size.min(train.len()));
        let (val_loss, val_accuracy) = evaluate(model, &val, &loss)?;
        let record = EpochRecord {
            epoch,
            train_loss: data_sum / n + reg.as_f64(),
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.4} | val loss {:.4} acc {:.4}",
            record.train_loss,
            record.train_accuracy,
            record.val_loss,
            record.val_accuracy
        );
        history.epochs.push(record);
        history.final_epoch = Some(epoch);

        if options.enhancements.early_stopping {
            match &best {
                Some((b, _, _)) if val_loss >= *b => {
                    stale += 1;
                    if stale >= options.patience {
                        history.stopped_early = epoch < options.epochs;
                        break;
                    }
                }
                _ => {
                    best = Some((val_loss, epoch, model.clone()));
                    stale = 0;
                }
            }
        }
    }
    if let Some((_, epoch, weights)) = best {
        if Some(epoch) != history.final_epoch {
            *model = weights;
            history.final_epoch = Some(epoch);
        }
    }
    Ok(history)
}

/// Samples are processed in fixed-size chunks so the floating-point sum
/// order, and therefore the result, does not depend on thread scheduling.
const GRAD_CHUNK: usize = 4;

fn batch_gradients<T: Scalar>(
    model: &ModelGraph<T>,
    train: &[&Sample],
    batch: &[usize],
    seeds: &[u64],
    loss: &HingeLossConfig,
    options: &TrainOptions,
) -> Result<(Gradients<T>, f64, usize)> {
    let scale = T::one() / T::from_usize(batch.len()).unwrap();
    let jobs: Vec<(usize, u64)> = batch.iter().copied().zip(seeds.iter().copied()).collect();
    let partials: Vec<(Gradients<T>, f64, usize)> = jobs
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = Gradients::zeros_like(model);
            let (mut data, mut hits) = (0.0, 0usize);
            for &(i, seed) in chunk {
                let sample = train[i];
                let tensor = if options.enhancements.augmentation {
                    augment(&sample.image, &options.augmentation.with_seed(seed)).to_tensor()
                } else {
                    sample.image.to_tensor()
                };
                let (score, cache) = model.forward(&tensor)?;
                let y = sample.label.sign::<T>();
                data += loss.margin_loss(score, y).as_f64();
                hits += usize::from(crate::label::Label::from_score(score) == sample.label);
                let g = model.backward(&cache, loss.margin_grad(score, y) * scale)?;
                acc.add_scaled(T::one(), &g);
            }
            Ok((acc, data, hits))
        })
        .collect::<Result<_>>()?;
    let mut parts = partials.into_iter();
    let (mut grads, mut data, mut hits) = parts.next().expect("non-empty batch");
    for (g, d, h) in parts {
        grads.add_scaled(T::one(), &g);
        data += d;
        hits += h;
    }
    Ok((grads, data, hits))
}
