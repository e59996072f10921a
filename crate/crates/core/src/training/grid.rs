use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::crossval::model_config;
use super::fit::fit;
use super::Hyperparameters;
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};
use crate::layers::PrecomputedEmbeddings;
use crate::model::HermitModel;

/// Named value lists; the search covers their Cartesian product.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GridSpace {
    pub axes: Vec<(String, Vec<String>)>,
}

pub type GridPoint = Vec<(String, String)>;

impl GridSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis<S: Into<String>>(mut self, key: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        self.axes.push((key.into(), values.into_iter().map(Into::into).collect()));
        self
    }

    /// Every assignment, the last axis varying fastest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut points: Vec<GridPoint> = alloc::vec![Vec::new()];
        for (key, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: Hyperparameters,
    pub best_point: GridPoint,
    pub best_score: f64,
    /// Score of every point in enumeration order.
    pub scores: Vec<(GridPoint, f64)>,
}

/// Scores every point with `run`; ties go to the earliest point.
pub fn grid_search_with<F>(space: &GridSpace, base: &Hyperparameters, mut run: F) -> Result<GridResult>
where
    F: FnMut(&Hyperparameters) -> Result<f64>,
{
    if space.axes.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::Config("grid axis without values".into()));
    }
    let mut best: Option<(Hyperparameters, GridPoint, f64)> = None;
    let mut scores = Vec::new();
    for point in space.points() {
        let mut h = base.clone();
        for (k, v) in &point {
            h.set(k, v)?;
        }
        h.validate()?;
        let score = run(&h)?;
        scores.push((point.clone(), score));
        if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
            best = Some((h, point, score));
        }
    }
    let (best, best_point, best_score) = best.expect("at least one point");
    Ok(GridResult {
        best,
        best_point,
        best_score,
        scores,
    })
}

/// Fits one model per point on `train` with early stopping on `tuning` and
/// keeps the point with the best tuning score.
pub fn grid_search(
    space: &GridSpace,
    base: &Hyperparameters,
    train: &[AnnotatedSentence],
    tuning: &[AnnotatedSentence],
    precomputed: Option<Arc<PrecomputedEmbeddings>>,
) -> Result<GridResult> {
    let mut everything = train.to_vec();
    everything.extend_from_slice(tuning);
    grid_search_with(space, base, |h| {
        let config = model_config(&h.model, train, &everything);
        let mut model = HermitModel::build(config, h.train.seed, precomputed.clone())?;
        Ok(fit(&mut model, train, tuning, &h.train)?.best_metric)
    })
}
