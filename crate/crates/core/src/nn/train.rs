use super::adam::{adam_step, AdamState};
use super::data::{volume_slices, DatasetManifest, SliceOptions, SliceSet, Split};
use super::layers::softmax;
use super::model::{argmax, batch_loss, model_backward, model_forward, ModelConfig, ModelParams, NUM_CLASSES};
use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, stream};
use crate::volume::{Slice2D, Volume3D};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Inference batch size; training uses [`TrainOptions::batch_size`].
const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Base seed for the per-epoch shuffles.
    pub seed: u64,
    pub slices: SliceOptions,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            lr: AdamState::DEFAULT_LR,
            seed: 0,
            slices: SliceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub adam: AdamState,
    pub history: Vec<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePrediction {
    pub class: usize,
    pub probs: [f64; NUM_CLASSES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumePrediction {
    /// Fraction of slices assigned to each class.
    pub pct: [f64; NUM_CLASSES],
    pub majority: usize,
    pub slices: Vec<SlicePrediction>,
}

/// Load the train and val splits and train on them.
pub fn train(
    manifest: &DatasetManifest,
    base: &Path,
    config: &ModelConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    for split in [Split::Train, Split::Val] {
        if manifest.count(split) == 0 {
            return Err(Error::Argument(format!("manifest has no {split:?} entries")));
        }
    }
    let train_set = SliceSet::from_manifest(manifest, base, Split::Train, config.input_size, &opts.slices)?;
    let val_set = SliceSet::from_manifest(manifest, base, Split::Val, config.input_size, &opts.slices)?;
    train_on_slices(&train_set, &val_set, config, opts, |_| {})
}

/// Minibatch Adam on prepared slices. `on_epoch` sees each epoch's metrics
/// as soon as they are known.
pub fn train_on_slices(
    train_set: &SliceSet,
    val_set: &SliceSet,
    config: &ModelConfig,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Argument("training and validation sets must be non-empty".into()));
    }
    if opts.batch_size == 0 || opts.epochs == 0 {
        return Err(Error::Argument("epochs and batch size must be positive".into()));
    }
    if !(opts.lr > 0.0 && opts.lr.is_finite()) {
        return Err(Error::Argument(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let mut params = ModelParams::<f32>::init(config)?;
    let mut adam = AdamState::new(&params, opts.lr);
    let mut history = Vec::with_capacity(opts.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..opts.epochs {
        order.sort_unstable();
        order.shuffle(&mut seeded(derive_seed(opts.seed, stream::SHUFFLE, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(opts.batch_size) {
            let x = train_set.batch(chunk)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set.labels()[i]).collect();
            let (logits, cache) = model_forward(&params, &x)?;
            let (loss, grad_logits, hits) = batch_loss(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became {loss} in epoch {}", epoch + 1)));
            }
            let grads = model_backward(&params, &cache, &grad_logits)?;
            adam_step(&mut params, &grads, &mut adam)?;
            loss_sum += loss as f64 * chunk.len() as f64;
            correct += hits;
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!("weights became non-finite in epoch {}", epoch + 1)));
        }
        let (val_loss, val_accuracy, _) = evaluate_slices(&params, val_set)?;
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        on_epoch(&m);
        history.push(m);
    }
    Ok(TrainOutcome { params, adam, history })
}

fn predictions_from_logits(logits: &[f32]) -> Vec<SlicePrediction> {
    logits
        .chunks_exact(NUM_CLASSES)
        .map(|row| {
            let p = softmax(&row.iter().map(|&v| v as f64).collect::<Vec<_>>());
            SlicePrediction {
                class: argmax(row),
                probs: [p[0], p[1], p[2]],
            }
        })
        .collect()
}

/// Logits for a batch of prepared slices, computed in fixed-size chunks
/// (in parallel when a rayon pool with several threads is active).
fn batch_logits(params: &ModelParams<f32>, x: &Tensor4<f32>) -> Result<Vec<f32>> {
    let [n, h, w, c] = x.dims();
    let per = h * w * c;
    let chunks: Vec<Vec<f32>> = x
        .data()
        .par_chunks(EVAL_BATCH * per)
        .map(|chunk| {
            let t = Tensor4::new([chunk.len() / per, h, w, c], chunk.to_vec())?;
            Ok(model_forward(params, &t)?.0)
        })
        .collect::<Result<_>>()?;
    let logits: Vec<f32> = chunks.concat();
    debug_assert_eq!(logits.len(), n * NUM_CLASSES);
    Ok(logits)
}

pub fn predict_batch(params: &ModelParams<f32>, x: &Tensor4<f32>) -> Result<Vec<SlicePrediction>> {
    Ok(predictions_from_logits(&batch_logits(params, x)?))
}

/// Classify one prepared slice.
pub fn predict_slice(params: &ModelParams<f32>, slice: &Slice2D) -> Result<SlicePrediction> {
    let (h, w) = slice.dims();
    let x = Tensor4::new([1, h, w, 1], slice.data().to_vec())?;
    Ok(predict_batch(params, &x)?.remove(0))
}

/// Slice-class fractions and majority label for a set of predictions.
pub fn tally(preds: &[SlicePrediction]) -> ([f64; NUM_CLASSES], usize) {
    let mut counts = [0usize; NUM_CLASSES];
    for p in preds {
        counts[p.class] += 1;
    }
    let n = preds.len().max(1) as f64;
    let pct = counts.map(|c| c as f64 / n);
    let mut majority = 0;
    for c in 1..NUM_CLASSES {
        if counts[c] > counts[majority] {
            majority = c;
        }
    }
    (pct, majority)
}

/// Normalize, slice, prepare and classify a whole volume.
pub fn predict_volume(params: &ModelParams<f32>, vol: &Volume3D, opts: &SliceOptions) -> Result<VolumePrediction> {
    let size = params.config().input_size;
    let slices = volume_slices(vol, size, opts)?;
    let mut data = Vec::with_capacity(slices.len() * size * size);
    for s in &slices {
        data.extend_from_slice(s.data());
    }
    let x = Tensor4::new([slices.len(), size, size, 1], data)?;
    let preds = predict_batch(params, &x)?;
    let (pct, majority) = tally(&preds);
    Ok(VolumePrediction {
        pct,
        majority,
        slices: preds,
    })
}

/// Mean loss, accuracy and per-slice predictions over a labelled set.
pub fn evaluate_slices(params: &ModelParams<f32>, set: &SliceSet) -> Result<(f64, f64, Vec<SlicePrediction>)> {
    if set.is_empty() {
        return Err(Error::Argument("cannot evaluate an empty slice set".into()));
    }
    let all: Vec<usize> = (0..set.len()).collect();
    let logits = batch_logits(params, &set.batch(&all)?)?;
    let wide: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
    let (loss, _, _) = batch_loss(&wide, set.labels())?;
    let preds = predictions_from_logits(&logits);
    let correct = preds.iter().zip(set.labels()).filter(|(p, &l)| p.class == l).count();
    Ok((loss, correct as f64 / set.len() as f64, preds))
}
