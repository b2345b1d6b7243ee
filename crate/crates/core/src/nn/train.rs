//! Minibatch training loop.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::one_hot;
use super::{Model, ModelSpec, RmsProp};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Trains a fresh model from `spec`. Initialization, shuffling and dropout
/// all derive from `spec.seed`.
pub fn train(spec: &ModelSpec, inputs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<TrainOutcome> {
    let model = Model::new(spec.clone())?;
    train_from(model, inputs, labels)
}

/// Continues training an existing model for `model.spec.epochs` epochs.
pub fn train_from(mut model: Model, inputs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<TrainOutcome> {
    let spec = model.spec.clone();
    if inputs.nrows() != labels.len() {
        return Err(Error::shape(format!("{} labels", inputs.nrows()), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= spec.n_classes) {
        return Err(Error::OutOfRange {
            what: "class label",
            value: bad.to_string(),
        });
    }
    let targets = one_hot(labels, spec.n_classes);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    dropout_rng.set_stream(2);

    let mut optimizer = RmsProp::new(spec.optimizer, &model.net);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut loss_history = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(spec.batch_size) {
            let x: Array2<f64> = inputs.select(Axis(0), chunk);
            let t: Array2<f64> = targets.select(Axis(0), chunk);
            let mask = model.draw_mask(&mut dropout_rng, chunk.len());
            let (loss, grads) = model.loss_and_gradients(x.view(), t.view(), mask)?;
            optimizer.step(&mut model.net, &grads)?;
            total += loss * chunk.len() as f64;
        }
        let mean = total / labels.len() as f64;
        log::debug!("{} epoch {}: loss {mean:.6}", spec.kind, epoch + 1);
        loss_history.push(mean);
    }
    Ok(TrainOutcome { model, loss_history })
}

/// Fraction of rows whose prediction equals the label.
pub fn accuracy(model: &Model, inputs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let predicted = model.predict_batch(inputs)?;
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}
