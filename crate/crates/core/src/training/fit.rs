use alloc::vec::Vec;

use super::adam::{adam_step, clip_gradients, OptimizerState};
use super::batch::{batch_loss, make_batches, pad_batch};
use super::TrainConfig;
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};
use crate::evaluation::MetricsReport;
use crate::model::{HermitModel, TriPrediction};
use crate::numerics::Tape;
use crate::rng::{mix, seeded};

/// One line of training history.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Summed training loss over the epoch's batches.
    pub train_loss: f64,
    pub dev_metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters the model holds on return.
    pub best_epoch: usize,
    pub best_metric: f64,
}

pub fn predict_all(model: &HermitModel, corpus: &[AnnotatedSentence]) -> Result<Vec<TriPrediction>> {
    corpus.iter().map(|s| model.predict_sentence(s)).collect()
}

pub fn evaluate(model: &HermitModel, corpus: &[AnnotatedSentence]) -> Result<MetricsReport> {
    MetricsReport::compute(corpus, &predict_all(model, corpus)?)
}

/// Runs one epoch of minibatch updates and returns the summed loss.
pub fn train_epoch(
    model: &mut HermitModel,
    train: &[AnnotatedSentence],
    config: &TrainConfig,
    state: &mut OptimizerState,
    epoch: usize,
) -> Result<f64> {
    let mut order_rng = seeded(mix(config.seed ^ mix(epoch as u64)));
    let mut dropout_rng = seeded(mix(!config.seed ^ mix(epoch as u64)));
    let lengths: Vec<usize> = train.iter().map(AnnotatedSentence::len).collect();
    let mut tape = Tape::new();
    let mut total = 0.0;
    for indices in make_batches(&lengths, config.batch_size, &mut order_rng) {
        let members: Vec<&AnnotatedSentence> = indices.iter().map(|&i| &train[i]).collect();
        let batch = pad_batch(model, &members)?;
        tape.clear();
        let loss = batch_loss(model, &mut tape, &batch, Some(&mut dropout_rng))?;
        total += tape.value(loss).item().expect("scalar loss");
        tape.backward(loss)?;
        let store = model.params_mut();
        store.zero_grad();
        tape.flush_param_grads(store);
        if let Some(c) = config.clip_norm {
            clip_gradients(store, c);
        }
        adam_step(store, state, config)?;
    }
    Ok(total)
}

/// Trains with early stopping on `score(model, dev)`, higher is better.
/// Training ends after `patience` epochs without strict improvement, at
/// `max_epochs`, or once the score reaches `config.target`. The model is
/// left holding the best epoch's parameters.
pub fn fit_with<F, O>(
    model: &mut HermitModel,
    train: &[AnnotatedSentence],
    dev: &[AnnotatedSentence],
    config: &TrainConfig,
    mut score: F,
    mut on_epoch: O,
) -> Result<FitOutcome>
where
    F: FnMut(&HermitModel, &[AnnotatedSentence]) -> Result<f64>,
    O: FnMut(&EpochRecord),
{
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Empty { op: "fit" });
    }
    let mut state = OptimizerState::new(model.params());
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, crate::numerics::ParamStore)> = None;
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        let train_loss = train_epoch(model, train, config, &mut state, epoch)?;
        let dev_metric = score(model, dev)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            dev_metric,
        };
        on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(_, m, _)| dev_metric > *m) {
            best = Some((epoch, dev_metric, model.params().clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= config.patience || config.target.is_some_and(|t| dev_metric >= t) {
            break;
        }
    }
    let (best_epoch, best_metric, params) = best.expect("at least one epoch");
    model.params_mut().load_values(&params)?;
    Ok(FitOutcome {
        history,
        best_epoch,
        best_metric,
    })
}

/// [`fit_with`] scored by the configured dev metric.
pub fn fit(
    model: &mut HermitModel,
    train: &[AnnotatedSentence],
    dev: &[AnnotatedSentence],
    config: &TrainConfig,
) -> Result<FitOutcome> {
    let metric = config.dev_metric;
    fit_with(model, train, dev, config, |m, d| Ok(metric.value(&evaluate(m, d)?)), |_| {})
}
