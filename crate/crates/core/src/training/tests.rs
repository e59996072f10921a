use super::*;
use crate::corpus::synthetic::{generate, toy_corpus};
use crate::corpus::AnnotatedSentence;
use crate::evaluation::aggregate;
use crate::layers::EmbeddingMode;
use crate::model::{HermitConfig, HermitModel, ModelSettings};
use alloc::vec::Vec;

fn tiny() -> ModelSettings {
    ModelSettings {
        embedding: EmbeddingMode::Trainable,
        embedding_dim: 8,
        hidden: 8,
        attention: 4,
        ..ModelSettings::default()
    }
}

fn build(settings: ModelSettings, corpus: &[AnnotatedSentence], seed: u64) -> HermitModel {
    HermitModel::build(HermitConfig::from_corpus(settings, corpus), seed, None).unwrap()
}

fn quick(max_epochs: usize, patience: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 8,
        max_epochs,
        patience,
        ..TrainConfig::default()
    }
}

#[test]
fn patience_one_returns_first_epoch() {
    let corpus = generate(12, 3);
    let mut m = build(tiny(), &corpus, 0);
    let mut snapshots = Vec::new();
    let mut calls = 0;
    let outcome = fit_with(
        &mut m,
        &corpus,
        &corpus,
        &quick(10, 1),
        |model, _| {
            calls += 1;
            snapshots.push(model.params().clone());
            Ok(1.0 / calls as f64)
        },
        |_| {},
    )
    .unwrap();
    assert_eq!(outcome.history.len(), 2);
    assert_eq!(outcome.best_epoch, 1);
    for ((_, a), (_, b)) in m.params().iter().zip(snapshots[0].iter()) {
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn best_checkpoint_dominates_history() {
    let corpus = generate(10, 5);
    let metrics = [0.3, 0.5, 0.5, 0.2, 0.6, 0.1, 0.1, 0.1];
    let mut m = build(tiny(), &corpus, 1);
    let mut i = 0;
    let outcome = fit_with(&mut m, &corpus, &corpus, &quick(8, 3), |_, _| {
        i += 1;
        Ok(metrics[i - 1])
    }, |_| {})
    .unwrap();
    // improves at 1, 2, 5; stale 6, 7, 8
    assert_eq!(outcome.best_epoch, 5);
    assert_eq!(outcome.history.len(), 8);
    assert!(outcome.history.iter().all(|r| r.dev_metric <= outcome.best_metric));
}

#[test]
fn target_stops_early_and_history_is_bounded() {
    let corpus = generate(10, 5);
    let mut m = build(tiny(), &corpus, 1);
    let config = TrainConfig {
        target: Some(0.5),
        ..quick(6, 6)
    };
    let outcome = fit_with(&mut m, &corpus, &corpus, &config, |_, _| Ok(0.5), |_| {}).unwrap();
    assert_eq!(outcome.history.len(), 1);
    let outcome = fit(&mut m, &corpus, &corpus, &quick(3, 3)).unwrap();
    assert!(outcome.history.len() <= 3);
}

#[test]
fn train_loss_decreases_on_toy_corpus() {
    let corpus = toy_corpus();
    let mut m = build(tiny(), &corpus, 2);
    let config = TrainConfig {
        max_epochs: 5,
        patience: 5,
        ..TrainConfig::default()
    };
    let outcome = fit(&mut m, &corpus, &corpus, &config).unwrap();
    let losses: Vec<f64> = outcome.history.iter().map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 5);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn identical_runs_are_bit_identical() {
    let corpus = generate(16, 9);
    let settings = ModelSettings {
        dropout: 0.2,
        ..tiny()
    };
    let run = || {
        let mut m = build(settings.clone(), &corpus, 4);
        let h = fit(&mut m, &corpus, &corpus, &quick(3, 3)).unwrap().history;
        (h, m.params().clone())
    };
    let (h1, p1) = run();
    let (h2, p2) = run();
    let bits = |h: &[EpochRecord]| h.iter().map(|r| (r.train_loss.to_bits(), r.dev_metric.to_bits())).collect::<Vec<_>>();
    assert_eq!(bits(&h1), bits(&h2));
    for ((_, a), (_, b)) in p1.iter().zip(p2.iter()) {
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn memorises_a_single_sentence() {
    let corpus = generate(1, 11);
    let mut m = build(tiny(), &corpus, 3);
    let config = TrainConfig {
        learning_rate: 0.05,
        dev_metric: crate::evaluation::DevMetric::CombinedEm,
        target: Some(1.0),
        ..quick(200, 200)
    };
    let outcome = fit(&mut m, &corpus, &corpus, &config).unwrap();
    assert_eq!(outcome.best_metric, 1.0);
    let p = m.predict_sentence(&corpus[0]).unwrap();
    assert_eq!((p.da, p.fr, p.ar), (corpus[0].da_tags.clone(), corpus[0].fr_tags.clone(), corpus[0].ar_tags.clone()));
}

#[test]
fn grid_enumeration_and_selection() {
    let base = Hyperparameters::default();
    let single = GridSpace::new().axis("hidden", ["16"]);
    let r = grid_search_with(&single, &base, |_| Ok(0.3)).unwrap();
    assert_eq!(r.best.model.hidden, 16);

    let space = GridSpace::new()
        .axis("hidden", ["8", "16"])
        .axis("learning_rate", ["0.01", "0.001"]);
    let mut runs = Vec::new();
    let r = grid_search_with(&space, &base, |h| {
        runs.push((h.model.hidden, h.train.learning_rate));
        Ok(if h.model.hidden == 16 && h.train.learning_rate == 0.01 { 0.9 } else { 0.1 })
    })
    .unwrap();
    assert_eq!(runs, [(8, 0.01), (8, 0.001), (16, 0.01), (16, 0.001)]);
    assert_eq!((r.best.model.hidden, r.best.train.learning_rate), (16, 0.01));
    let tie = grid_search_with(&space, &base, |_| Ok(0.5)).unwrap();
    assert_eq!(tie.best_point, space.points()[0]);
    assert!(grid_search_with(&GridSpace::new().axis("hidden", Vec::<&str>::new()), &base, |_| Ok(0.0)).is_err());
}

#[test]
fn concrete_grid_search_runs_every_cell() {
    let corpus = generate(12, 2);
    let base = Hyperparameters {
        model: tiny(),
        train: quick(1, 1),
    };
    let space = GridSpace::new().axis("hidden", ["2", "3"]);
    let r = grid_search(&space, &base, &corpus[..8], &corpus[8..], None).unwrap();
    assert_eq!(r.scores.len(), 2);
}

#[test]
fn two_fold_crossval() {
    let corpus = generate(20, 4);
    let hyper = Hyperparameters {
        model: tiny(),
        train: quick(2, 2),
    };
    let a = run_crossval(&corpus, 2, &hyper, TuningProtocol::NextFold, None).unwrap();
    assert_eq!(a.folds.len(), 2);
    let b = run_crossval(&corpus, 2, &hyper, TuningProtocol::NextFold, None).unwrap();
    assert_eq!(a, b);
    let values: Vec<f64> = a.folds.iter().map(|f| 100.0 * f.report.combined().f1()).collect();
    let row = a.aggregate.iter().find(|r| r.task == "combined" && r.metric == "f1").unwrap();
    let direct = aggregate(&values).unwrap();
    assert!((row.value.mean - direct.mean).abs() < 1e-12);
    assert!((row.value.std - direct.std).abs() < 1e-12);
    let tested: u64 = a.folds.iter().map(|f| f.report.sentences).sum();
    assert_eq!(tested, 20);
}

#[test]
fn held_out_fraction_protocol() {
    let corpus = generate(30, 6);
    let hyper = Hyperparameters {
        model: tiny(),
        train: quick(1, 1),
    };
    let r = run_crossval(&corpus, 3, &hyper, TuningProtocol::TrainFraction(0.1), None).unwrap();
    assert_eq!(r.folds.len(), 3);
}
