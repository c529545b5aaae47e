use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::example::ModelExample;
use super::network::{GroundingModel, LossBreakdown};
use super::ModelError;
use crate::neural::{clip_grad_norm, Adam, Gradients};
use crate::rng::{self, derive_seed};

const SHUFFLE: u64 = 1;
const DROPOUT: u64 = 2;

/// Gradient of `scale × loss` for one example with its own dropout stream.
pub fn example_gradient(
    model: &GroundingModel,
    ex: &ModelExample,
    dropout_seed: u64,
    scale: f64,
) -> Result<(Gradients, LossBreakdown), ModelError> {
    let mut grads = model.store().gradients();
    let mut rng = rng::seeded(dropout_seed);
    let dropout = (model.config().dropout > 0.0).then_some(&mut rng);
    let loss = model.example_loss(ex, dropout, Some(&mut grads), scale)?;
    Ok((grads, loss))
}

/// Computes batch gradients and evaluation losses. Implementations must sum
/// per-example gradients in batch order so results do not depend on the
/// degree of parallelism.
pub trait GradientBackend {
    fn batch_gradient(
        &self,
        model: &GroundingModel,
        batch: &[&ModelExample],
        seeds: &[u64],
    ) -> Result<(Gradients, LossBreakdown), ModelError>;

    /// Mean losses without dropout.
    fn evaluate(&self, model: &GroundingModel, examples: &[ModelExample]) -> Result<LossBreakdown, ModelError>;
}

/// Single-threaded backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl GradientBackend for Sequential {
    fn batch_gradient(
        &self,
        model: &GroundingModel,
        batch: &[&ModelExample],
        seeds: &[u64],
    ) -> Result<(Gradients, LossBreakdown), ModelError> {
        let scale = 1.0 / batch.len() as f64;
        let mut total = model.store().gradients();
        let mut loss = LossBreakdown::default();
        for (ex, seed) in batch.iter().zip(seeds) {
            let (g, l) = example_gradient(model, ex, *seed, scale)?;
            total.add(&g);
            loss.merge(&l);
        }
        Ok((total, loss))
    }

    fn evaluate(&self, model: &GroundingModel, examples: &[ModelExample]) -> Result<LossBreakdown, ModelError> {
        let mut loss = LossBreakdown::default();
        for ex in examples {
            loss.merge(&model.example_loss(ex, None, None, 1.0)?);
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub valid: LossBreakdown,
    /// Mean global gradient norm before clipping.
    pub grad_norm: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub model: GroundingModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mini-batch Adam on the joint loss with gradient clipping and early
/// stopping on validation loss (training loss when `valid` is empty).
/// Shuffling and dropout derive from the configured seed only.
pub fn train(
    mut model: GroundingModel,
    train: &[ModelExample],
    valid: &[ModelExample],
    backend: &dyn GradientBackend,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let config = model.config().clone();
    let mut adam = Adam::new(config.optimizer, model.store());
    let mut best = model.store().clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, SHUFFLE, epoch as u64));
        let dropout_base = derive_seed(derive_seed(config.seed, DROPOUT), epoch as u64);
        let mut train_loss = LossBreakdown::default();
        let mut norm_sum = 0.0;
        let batches = order.chunks(config.batch_size);
        let n_batches = batches.len();
        for (b, idx) in batches.enumerate() {
            let batch: Vec<&ModelExample> = idx.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = idx.iter().map(|&i| derive_seed(dropout_base, i as u64)).collect();
            let (mut grads, loss) = backend.batch_gradient(&model, &batch, &seeds)?;
            if !loss.is_finite() {
                return Err(ModelError::Divergence { epoch, batch: b, loss: loss.total });
            }
            norm_sum += clip_grad_norm(&mut grads, config.clip);
            adam.step(model.store_mut(), &grads)?;
            train_loss.merge(&loss);
        }
        let valid_loss = if valid.is_empty() { train_loss } else { backend.evaluate(&model, valid)? };
        if !valid_loss.is_finite() {
            return Err(ModelError::Divergence { epoch, batch: n_batches, loss: valid_loss.total });
        }
        let improved = valid_loss.total < best_loss;
        if improved {
            best_loss = valid_loss.total;
            best.clone_from(model.store());
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        let record = EpochRecord {
            epoch,
            train: train_loss,
            valid: valid_loss,
            grad_norm: norm_sum / n_batches as f64,
            improved,
        };
        on_epoch(&record);
        history.push(record);
        if stale >= config.patience {
            break;
        }
    }
    *model.store_mut() = best;
    Ok(TrainOutcome { model, history, best_epoch })
}
