use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded;

/// A seeded partition of sentence indices into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
}

/// One cross-validation round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRound {
    pub round: usize,
    pub test: Vec<usize>,
    pub tuning: Vec<usize>,
    pub train: Vec<usize>,
}

/// Shuffles indices with `seed` and deals them round-robin, so fold sizes
/// differ by at most one.
pub fn kfold_split<T>(corpus: &[T], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config("at least two folds are required".into()));
    }
    if corpus.len() < k {
        return Err(Error::CorpusTooSmall { size: corpus.len(), k });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut seeded(seed));
    let mut folds = alloc::vec![Vec::new(); k];
    for (i, idx) in order.into_iter().enumerate() {
        folds[i % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldSplit { k, folds })
}

impl FoldSplit {
    /// Round `r` tests on fold `r`, tunes on fold `(r + 1) mod k` and trains
    /// on the rest. With two folds the training set would be empty, so the
    /// tuning fold doubles as training data.
    pub fn round(&self, r: usize) -> FoldRound {
        let tuning_fold = (r + 1) % self.k;
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != r && *i != tuning_fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        if self.k == 2 {
            train = self.folds[tuning_fold].clone();
        }
        train.sort_unstable();
        FoldRound {
            round: r,
            test: self.folds[r].clone(),
            tuning: self.folds[tuning_fold].clone(),
            train,
        }
    }

    pub fn rounds(&self) -> impl Iterator<Item = FoldRound> + '_ {
        (0..self.k).map(|r| self.round(r))
    }
}

/// Splits `indices` into (train, held-out), holding out `ceil(fraction · n)`
/// of them (at least one, at most `n - 1`) chosen with `seed`.
pub fn holdout_split(indices: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config("held-out fraction must lie in (0, 1)".into()));
    }
    if indices.len() < 2 {
        return Err(Error::CorpusTooSmall { size: indices.len(), k: 2 });
    }
    let n = indices.len();
    let held = (libm::ceil(fraction * n as f64) as usize).clamp(1, n - 1);
    let mut order = indices.to_vec();
    order.shuffle(&mut seeded(seed));
    let mut holdout = order.split_off(n - held);
    order.sort_unstable();
    holdout.sort_unstable();
    Ok((order, holdout))
}
