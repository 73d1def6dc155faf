use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::{BatchedGraphs, GraphInput};
use super::model::{argmax_class, forward, loss_and_backward, ModelParams, NUM_CLASSES};
use super::optim::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::harness::evaluate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            epochs: 50,
            batch_size: 30,
            dropout: 0.3,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden, epochs and batch must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch (dropout active).
    pub train_loss: f64,
    /// Mean loss over the training set with dropout off, after the epoch.
    pub eval_loss: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the best validation F1 (later epoch on ties).
    pub params: ModelParams,
    pub best_epoch: usize,
    /// Training-set loss of the freshly initialized model.
    pub initial_loss: f64,
    pub history: Vec<EpochRecord>,
}

fn batches(inputs: &[GraphInput], batch_size: usize) -> impl Iterator<Item = Result<BatchedGraphs>> + '_ {
    inputs
        .chunks(batch_size)
        .map(|chunk| BatchedGraphs::new(&chunk.iter().collect::<Vec<_>>()))
}

/// Class probabilities for every input, evaluated without dropout.
pub fn predict_proba(params: &ModelParams, inputs: &[GraphInput], batch_size: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((inputs.len(), params.classes()));
    let mut row = 0;
    for batch in batches(inputs, batch_size.max(1)) {
        let trace = forward::<ChaCha8Rng>(&batch?, params, 0.0, None)?;
        for p in trace.probs.rows() {
            out.row_mut(row).assign(&p);
            row += 1;
        }
    }
    Ok(out)
}

pub fn predict(params: &ModelParams, inputs: &[GraphInput], batch_size: usize) -> Result<Vec<u8>> {
    Ok(argmax_class(&predict_proba(params, inputs, batch_size)?))
}

/// Mean cross-entropy over `inputs` with dropout off.
pub fn mean_loss(params: &ModelParams, inputs: &[GraphInput], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    for batch in batches(inputs, batch_size.max(1)) {
        let batch = batch?;
        let trace = forward::<ChaCha8Rng>(&batch, params, 0.0, None)?;
        let (loss, _) = loss_and_backward(&trace, &batch, params, false)?;
        total += loss * batch.num_graphs() as f64;
    }
    Ok(total / inputs.len() as f64)
}

/// Mini-batch Adam training with seeded init, shuffles and dropout.
///
/// Model selection uses `validation` when it is non-empty and the training
/// set otherwise.
pub fn train(train: &[GraphInput], validation: &[GraphInput], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let first = train
        .first()
        .ok_or_else(|| Error::Invalid("empty training set".into()))?;
    let input_dim = first.features.cols();
    if let Some(bad) = train.iter().chain(validation).find(|g| g.features.cols() != input_dim) {
        return Err(Error::Shape(format!(
            "mixed feature dimensions {} and {}",
            input_dim,
            bad.features.cols()
        )));
    }
    let selection = if validation.is_empty() { train } else { validation };
    let selection_labels: Vec<u8> = selection.iter().map(|g| g.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::glorot(input_dim, config.hidden, NUM_CLASSES, &mut rng);
    let mut adam = Adam::new(config.adam, &params);
    let initial_loss = mean_loss(&params, train, config.batch_size)?;

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let members: Vec<&GraphInput> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = BatchedGraphs::new(&members)?;
            let trace = forward(&batch, &params, config.dropout, Some(&mut rng))?;
            let (loss, grads) = loss_and_backward(&trace, &batch, &params, false).map_err(|e| match e {
                Error::Invalid(_) => Error::Divergence {
                    epoch,
                    batch: batch_no,
                    loss: f64::NAN,
                },
                other => other,
            })?;
            adam.step(&mut params, &grads.params);
            epoch_loss += loss * chunk.len() as f64;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let eval_loss = mean_loss(&params, train, config.batch_size)?;
        if !eval_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: eval_loss,
            });
        }
        let predictions = predict(&params, selection, config.batch_size)?;
        let val_f1 = evaluate(&predictions, &selection_labels)?.f1;
        history.push(EpochRecord {
            epoch,
            train_loss,
            eval_loss,
            val_f1,
        });
        if best.as_ref().is_none_or(|(f1, ..)| val_f1 >= *f1) {
            best = Some((val_f1, epoch, params.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        best_epoch,
        initial_loss,
        history,
    })
}
