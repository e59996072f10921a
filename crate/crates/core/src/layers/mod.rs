//! Neural building blocks: embeddings, BiLSTM, self-attention, CRF.

pub mod attention;
pub mod crf;
pub mod embedding;
pub mod lstm;
pub mod tagger;

pub use attention::{self_attention, SelfAttentionParams};
pub use crf::{crf_log_partition, crf_nll, crf_sequence_score, crf_viterbi, CrfParams, CrfWeights};
pub use embedding::{EmbeddingMode, EmbeddingProvider, PrecomputedEmbeddings, TokenVocabulary};
pub use lstm::{bilstm_forward, lstm_step, BiLstmParams, LstmParams};
pub use tagger::Tagger;

use alloc::vec::Vec;
use rand::Rng as _;

use crate::numerics::Tensor;
use crate::rng::Rng;

/// Uniform initialisation in `[-bound, bound]`.
pub(crate) fn uniform(rng: &mut Rng, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| if bound > 0.0 { rng.gen_range(-bound..=bound) } else { 0.0 })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Indices of unmasked positions.
pub(crate) fn active_steps(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, m)| m.then_some(i))
        .collect()
}
