use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LossReduction, Model, Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::rng;
use crate::survival::DiscreteLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reduction: LossReduction,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            optimizer: OptimizerKind::adam(),
            learning_rate: 1e-3,
            batch_size: 256,
            reduction: LossReduction::Mean,
            seed: 0,
        }
    }
}

/// One pass over `x` in shuffled mini-batches. Returns the average of the
/// batch losses.
pub fn train_epoch<R: Rng>(
    model: &mut Model,
    optimizer: &mut Optimizer,
    x: &Array2<f64>,
    labels: &[DiscreteLabel],
    batch_size: usize,
    reduction: LossReduction,
    rng: &mut R,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0;
    for chunk in order.chunks(batch_size) {
        let xb = x.select(Axis(0), chunk);
        let yb: Vec<DiscreteLabel> = chunk.iter().map(|&i| labels[i]).collect();
        let (loss, grads) = model.gradient(xb.view(), &yb, reduction)?;
        optimizer.step(&mut model.params, &grads)?;
        total += loss;
        batches += 1;
    }
    Ok(total / batches.max(1) as f64)
}

/// A trainer bound to one shard of data. The optimizer state lives here and
/// persists across calls to [`LocalTrainer::run`].
#[derive(Debug, Clone)]
pub struct LocalTrainer {
    pub centre_id: usize,
    pub x: Array2<f64>,
    pub labels: Vec<DiscreteLabel>,
    pub settings: TrainSettings,
    optimizer: Optimizer,
}

impl LocalTrainer {
    pub fn new(
        centre_id: usize,
        x: Array2<f64>,
        labels: Vec<DiscreteLabel>,
        settings: TrainSettings,
        template: &Model,
    ) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument(format!("centre {centre_id} holds no data")));
        }
        if x.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        let optimizer = Optimizer::new(settings.optimizer, settings.learning_rate, &template.params);
        Ok(LocalTrainer {
            centre_id,
            x,
            labels,
            settings,
            optimizer,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    /// Runs epochs `first_epoch .. first_epoch + epochs`. Each epoch shuffles
    /// with a seed derived from `(seed, centre_id, epoch)`, so the batch order
    /// depends only on the global epoch index and not on how epochs are
    /// grouped into rounds.
    pub fn run(&mut self, model: &mut Model, first_epoch: usize, epochs: usize) -> Result<f64> {
        let mut last = f64::NAN;
        for epoch in first_epoch..first_epoch + epochs {
            let seed = rng::derive_seed(self.settings.seed, &[self.centre_id as u64, epoch as u64]);
            last = train_epoch(
                model,
                &mut self.optimizer,
                &self.x,
                &self.labels,
                self.settings.batch_size,
                self.settings.reduction,
                &mut rng::seeded(seed),
            )?;
        }
        Ok(last)
    }

    pub fn loss(&self, model: &Model) -> Result<f64> {
        model.loss(self.x.view(), &self.labels, LossReduction::Mean)
    }
}

/// Trains on all of `x` for `epochs` epochs. Equivalent to a single-centre
/// federation with centre id 0.
pub fn train_pooled(
    model0: &Model,
    x: &Array2<f64>,
    labels: &[DiscreteLabel],
    epochs: usize,
    settings: TrainSettings,
) -> Result<Model> {
    let mut model = model0.clone();
    let mut trainer = LocalTrainer::new(0, x.clone(), labels.to_vec(), settings, model0)?;
    for epoch in 0..epochs {
        trainer.run(&mut model, epoch, 1)?;
        if !model.params.all_finite() {
            return Err(Error::NonFinite { round: epoch + 1, centre: 0 });
        }
    }
    Ok(model)
}
