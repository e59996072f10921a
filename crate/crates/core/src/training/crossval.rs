use alloc::sync::Arc;
use alloc::vec::Vec;

use super::fit::{evaluate, fit, EpochRecord};
use super::grid::{grid_search, GridResult, GridSpace};
use super::Hyperparameters;
use crate::corpus::{holdout_split, kfold_split, AnnotatedSentence, FoldSplit, TaskLabels};
use crate::error::Result;
use crate::evaluation::{aggregate_folds, AggregateRow, MetricsReport};
use crate::layers::{EmbeddingMode, PrecomputedEmbeddings, TokenVocabulary};
use crate::model::{HermitConfig, HermitModel, ModelSettings};
use crate::rng::mix;

/// Where each round's early-stopping data comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuningProtocol {
    /// Round `r` tunes on fold `r + 1` and trains on the remaining folds.
    NextFold,
    /// Train on every non-test fold minus a held-out fraction used for
    /// epoch selection.
    TrainFraction(f64),
}

/// Label sets cover `everything`, so test-only labels stay encodable; the
/// token vocabulary of trainable embeddings comes from `train` alone.
pub fn model_config(settings: &ModelSettings, train: &[AnnotatedSentence], everything: &[AnnotatedSentence]) -> HermitConfig {
    let tokens = (settings.embedding == EmbeddingMode::Trainable)
        .then(|| TokenVocabulary::build(train.iter().flat_map(|s| s.tokens.iter().map(|t| t.as_str()))));
    HermitConfig {
        settings: settings.clone(),
        labels: TaskLabels::from_corpus(everything),
        tokens,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub round: usize,
    pub report: MetricsReport,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalResult {
    pub folds: Vec<FoldResult>,
    pub aggregate: Vec<AggregateRow>,
}

fn pick(corpus: &[AnnotatedSentence], indices: &[usize]) -> Vec<AnnotatedSentence> {
    indices.iter().map(|&i| corpus[i].clone()).collect()
}

struct RoundData {
    seed: u64,
    train: Vec<AnnotatedSentence>,
    tuning: Vec<AnnotatedSentence>,
    test: Vec<AnnotatedSentence>,
}

fn round_data(
    corpus: &[AnnotatedSentence],
    split: &FoldSplit,
    round: usize,
    hyper: &Hyperparameters,
    protocol: TuningProtocol,
) -> Result<RoundData> {
    let r = split.round(round);
    let seed = mix(hyper.train.seed ^ mix(round as u64 + 1));
    let (train_idx, tune_idx) = match protocol {
        TuningProtocol::NextFold => (r.train, r.tuning),
        TuningProtocol::TrainFraction(f) => {
            let mut rest = r.train;
            if split.k > 2 {
                rest.extend_from_slice(&r.tuning);
                rest.sort_unstable();
            }
            holdout_split(&rest, f, seed)?
        }
    };
    Ok(RoundData {
        seed,
        train: pick(corpus, &train_idx),
        tuning: pick(corpus, &tune_idx),
        test: pick(corpus, &r.test),
    })
}

fn train_and_test(
    corpus: &[AnnotatedSentence],
    data: &RoundData,
    round: usize,
    hyper: &Hyperparameters,
    precomputed: Option<Arc<PrecomputedEmbeddings>>,
) -> Result<FoldResult> {
    let config = model_config(&hyper.model, &data.train, corpus);
    let mut model = HermitModel::build(config, data.seed, precomputed)?;
    let mut train_config = hyper.train.clone();
    train_config.seed = data.seed;
    let outcome = fit(&mut model, &data.train, &data.tuning, &train_config)?;
    Ok(FoldResult {
        round,
        report: evaluate(&model, &data.test)?,
        best_epoch: outcome.best_epoch,
        history: outcome.history,
    })
}

/// Trains and tests one round. Rounds share nothing and may run in parallel.
pub fn run_fold(
    corpus: &[AnnotatedSentence],
    split: &FoldSplit,
    round: usize,
    hyper: &Hyperparameters,
    protocol: TuningProtocol,
    precomputed: Option<Arc<PrecomputedEmbeddings>>,
) -> Result<FoldResult> {
    let data = round_data(corpus, split, round, hyper, protocol)?;
    train_and_test(corpus, &data, round, hyper, precomputed)
}

/// [`run_fold`] after choosing the round's settings by grid search on its
/// own train and tuning data; the test fold takes no part in the choice.
pub fn run_fold_with_grid(
    corpus: &[AnnotatedSentence],
    split: &FoldSplit,
    round: usize,
    hyper: &Hyperparameters,
    protocol: TuningProtocol,
    precomputed: Option<Arc<PrecomputedEmbeddings>>,
    space: &GridSpace,
) -> Result<(FoldResult, GridResult)> {
    let data = round_data(corpus, split, round, hyper, protocol)?;
    let mut base = hyper.clone();
    base.train.seed = data.seed;
    let grid = grid_search(space, &base, &data.train, &data.tuning, precomputed.clone())?;
    let mut chosen = grid.best.clone();
    chosen.train.seed = hyper.train.seed;
    let fold = train_and_test(corpus, &data, round, &chosen, precomputed)?;
    Ok((fold, grid))
}

pub fn aggregate_results(folds: Vec<FoldResult>) -> Result<CrossvalResult> {
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.report.clone()).collect();
    Ok(CrossvalResult {
        aggregate: aggregate_folds(&reports)?,
        folds,
    })
}

/// Sequential k-fold cross-validation.
pub fn run_crossval(
    corpus: &[AnnotatedSentence],
    k: usize,
    hyper: &Hyperparameters,
    protocol: TuningProtocol,
    precomputed: Option<Arc<PrecomputedEmbeddings>>,
) -> Result<CrossvalResult> {
    hyper.validate()?;
    let split = kfold_split(corpus, k, hyper.train.seed)?;
    let folds = (0..k)
        .map(|r| run_fold(corpus, &split, r, hyper, protocol, precomputed.clone()))
        .collect::<Result<Vec<_>>>()?;
    aggregate_results(folds)
}
