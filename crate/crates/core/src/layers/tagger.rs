use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use super::crf::{crf_nll, crf_viterbi, CrfParams};
use super::active_steps;
use crate::error::{Error, Result};
use crate::math::{self, log_sum_exp};
use crate::numerics::{BackwardRule, ParamId, ParamStore, Tape, Tensor, Var};
use crate::rng::Rng;

/// Output layer of one task: a linear projection to label scores, followed
/// by a CRF or, when the CRF is ablated, an independent softmax per token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tagger {
    pub proj_w: ParamId,
    pub proj_b: ParamId,
    pub crf: Option<CrfParams>,
    pub input: usize,
    pub labels: usize,
}

impl Tagger {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        labels: usize,
        use_crf: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if labels == 0 {
            return Err(Error::Config(format!("{prefix}: empty label set")));
        }
        let bound = 1.0 / math::sqrt(input.max(1) as f64);
        let proj_w = store.add(format!("{prefix}.proj.w"), super::uniform(rng, &[input, labels], bound))?;
        let proj_b = store.add(format!("{prefix}.proj.b"), Tensor::zeros([labels]))?;
        let crf = if use_crf {
            Some(CrfParams::init(store, &format!("{prefix}.crf"), labels, rng)?)
        } else {
            None
        };
        Ok(Tagger {
            proj_w,
            proj_b,
            crf,
            input,
            labels,
        })
    }

    /// `[T, K]` label scores.
    pub fn emissions(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.proj_w);
        let b = tape.param(store, self.proj_b);
        let xw = tape.matmul(x, w)?;
        tape.add_bias(xw, b)
    }

    /// Negative log-likelihood of `gold` over the unmasked positions.
    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, emissions: Var, mask: &[bool], gold: &[usize]) -> Result<Var> {
        match &self.crf {
            Some(crf) => crf_nll(tape, store, crf, emissions, mask, gold),
            None => token_cross_entropy(tape, emissions, mask, gold),
        }
    }

    /// One label per unmasked position.
    pub fn decode(&self, store: &ParamStore, emissions: &Tensor, mask: &[bool]) -> Result<Vec<usize>> {
        match &self.crf {
            Some(crf) => Ok(crf_viterbi(store, crf, emissions, mask)?.0),
            None => {
                if emissions.rows() != mask.len() {
                    return Err(Error::LengthMismatch {
                        left: emissions.rows(),
                        right: mask.len(),
                    });
                }
                Ok(active_steps(mask)
                    .into_iter()
                    .map(|t| argmax(emissions.row(t)))
                    .collect())
            }
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug)]
struct CrossEntropyRule {
    steps: Vec<usize>,
    gold: Vec<usize>,
}

impl BackwardRule for CrossEntropyRule {
    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad_out: &[f64], grads: &mut [Vec<f64>]) {
        let logits = inputs[0];
        let k = logits.cols();
        for &t in &self.steps {
            let row = logits.row(t);
            let lse = log_sum_exp(row);
            for j in 0..k {
                grads[0][t * k + j] += grad_out[0] * math::exp(row[j] - lse);
            }
            grads[0][t * k + self.gold[t]] -= grad_out[0];
        }
    }
}

/// Σ over unmasked positions of `-ln softmax(logits_t)[gold_t]`.
pub fn token_cross_entropy(tape: &mut Tape, logits: Var, mask: &[bool], gold: &[usize]) -> Result<Var> {
    let l = tape.value(logits);
    if l.rank() != 2 || l.rows() != mask.len() || gold.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            op: "token_cross_entropy",
            left: l.shape().to_vec(),
            right: alloc::vec![mask.len(), gold.len()],
        });
    }
    let steps = active_steps(mask);
    if steps.is_empty() {
        return Err(Error::AllMasked {
            op: "token_cross_entropy",
        });
    }
    let k = l.cols();
    let mut total = 0.0;
    for &t in &steps {
        if gold[t] >= k {
            return Err(Error::IndexOutOfRange {
                what: "softmax labels",
                index: gold[t],
                size: k,
            });
        }
        let row = l.row(t);
        total += log_sum_exp(row) - row[gold[t]];
    }
    tape.custom(
        &[logits],
        Tensor::scalar(total),
        Box::new(CrossEntropyRule {
            steps,
            gold: gold.to_vec(),
        }),
    )
}
