use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};
use crate::layers::EmbeddingProvider;
use crate::model::HermitModel;
use crate::numerics::{Tape, Tensor, Var};
use crate::rng::Rng;

/// Model inputs of a padded batch.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchInputs {
    /// `[B, Tmax, D]` frozen vectors, zero at padding.
    Dense(Tensor),
    /// Vocabulary rows per position; padding uses row 0.
    TokenIds(Vec<Vec<usize>>),
}

/// Sentences padded to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub ids: Vec<alloc::string::String>,
    pub max_len: usize,
    pub inputs: BatchInputs,
    /// `mask[b][t]` is true exactly for `t < len(b)`.
    pub mask: Vec<Vec<bool>>,
    /// Gold label indices `[da, fr, ar]` per sentence; 0 at padding.
    pub gold: Vec<[Vec<usize>; 3]>,
}

impl PaddedBatch {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
}

pub fn pad_batch(model: &HermitModel, sentences: &[&AnnotatedSentence]) -> Result<PaddedBatch> {
    if sentences.is_empty() {
        return Err(Error::Empty { op: "pad_batch" });
    }
    let max_len = sentences.iter().map(|s| s.len()).max().unwrap_or(0);
    let mask = sentences
        .iter()
        .map(|s| (0..max_len).map(|t| t < s.len()).collect())
        .collect();
    let labels = &model.config().labels;
    let gold = sentences
        .iter()
        .map(|s| {
            let mut g = labels.encode(s)?;
            for row in &mut g {
                row.resize(max_len, 0);
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    let provider = model.embeddings();
    let inputs = match provider {
        EmbeddingProvider::Trainable { .. } => BatchInputs::TokenIds(
            sentences
                .iter()
                .map(|s| {
                    let mut ids = provider.token_ids(&s.tokens).expect("trainable mode");
                    ids.resize(max_len, 0);
                    ids
                })
                .collect(),
        ),
        _ => {
            let d = provider.dim();
            let mut data = vec![0.0; sentences.len() * max_len * d];
            for (b, s) in sentences.iter().enumerate() {
                let m = provider.lookup(model.params(), &s.id, &s.tokens)?;
                let at = b * max_len * d;
                data[at..at + m.len()].copy_from_slice(m.data());
            }
            BatchInputs::Dense(Tensor::new(vec![sentences.len(), max_len, d], data)?)
        }
    };
    Ok(PaddedBatch {
        ids: sentences.iter().map(|s| s.id.clone()).collect(),
        max_len,
        inputs,
        mask,
        gold,
    })
}

/// Summed loss of every sentence in the batch, recorded on `tape`.
pub fn batch_loss(model: &HermitModel, tape: &mut Tape, batch: &PaddedBatch, mut dropout: Option<&mut Rng>) -> Result<Var> {
    let mut losses = Vec::with_capacity(batch.len());
    for b in 0..batch.len() {
        let e = match &batch.inputs {
            BatchInputs::Dense(t) => {
                let d = t.shape()[2];
                let at = b * batch.max_len * d;
                let rows = t.data()[at..at + batch.max_len * d].to_vec();
                tape.constant(Tensor::matrix(batch.max_len, d, rows)?)
            }
            BatchInputs::TokenIds(ids) => {
                let EmbeddingProvider::Trainable { table, .. } = model.embeddings() else {
                    return Err(Error::Config("token-id batch for a model without a trainable table".into()));
                };
                let t = tape.param(model.params(), *table);
                tape.gather_rows(t, &ids[b])?
            }
        };
        let g = &batch.gold[b];
        losses.push(model.sentence_loss(tape, e, &batch.mask[b], [&g[0], &g[1], &g[2]], dropout.as_deref_mut())?);
    }
    tape.add_all(&losses)
}

/// Groups sentence indices into batches: a seeded shuffle, a stable sort by
/// length so that batches hold similar lengths, then a shuffle of the batch
/// order.
pub fn make_batches(lengths: &[usize], batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}
