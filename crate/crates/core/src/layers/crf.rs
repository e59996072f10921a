//! Linear-chain CRF: sequence scores, forward algorithm and Viterbi decoding.
//!
//! Masked steps are skipped entirely: they neither emit nor take part in a
//! transition, so the chain runs over the unmasked positions in order.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::active_steps;
use crate::error::{Error, Result};
use crate::math::{self, log_sum_exp};
use crate::numerics::{BackwardRule, ParamId, ParamStore, Tape, Tensor, Var};
use crate::rng::Rng;

/// `transitions[i, j]` scores label `i` followed by label `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrfParams {
    pub transitions: ParamId,
    pub start: ParamId,
    pub stop: ParamId,
    pub labels: usize,
}

impl CrfParams {
    pub fn init(store: &mut ParamStore, prefix: &str, labels: usize, rng: &mut Rng) -> Result<Self> {
        if labels == 0 {
            return Err(Error::Config(format!("{prefix}: empty label set")));
        }
        Ok(CrfParams {
            transitions: store.add(
                format!("{prefix}.transitions"),
                super::uniform(rng, &[labels, labels], 0.1),
            )?,
            start: store.add(format!("{prefix}.start"), super::uniform(rng, &[labels], 0.1))?,
            stop: store.add(format!("{prefix}.stop"), super::uniform(rng, &[labels], 0.1))?,
            labels,
        })
    }

    pub fn weights<'a>(&self, store: &'a ParamStore) -> CrfWeights<'a> {
        CrfWeights {
            transitions: store.value(self.transitions),
            start: store.value(self.start).data(),
            stop: store.value(self.stop).data(),
        }
    }
}

/// Borrowed CRF weights for value-level computations.
#[derive(Debug, Clone, Copy)]
pub struct CrfWeights<'a> {
    pub transitions: &'a Tensor,
    pub start: &'a [f64],
    pub stop: &'a [f64],
}

impl CrfWeights<'_> {
    pub fn labels(&self) -> usize {
        self.start.len()
    }

    #[inline]
    fn trans(&self, i: usize, j: usize) -> f64 {
        self.transitions.data()[i * self.labels() + j]
    }

    fn check(&self, emissions: &Tensor) -> Result<()> {
        let k = self.labels();
        if self.transitions.shape() != [k, k] || self.stop.len() != k {
            return Err(Error::ShapeMismatch {
                op: "crf",
                left: self.transitions.shape().to_vec(),
                right: vec![k, self.stop.len()],
            });
        }
        if emissions.rank() != 2 || emissions.cols() != k {
            return Err(Error::ShapeMismatch {
                op: "crf emissions",
                left: emissions.shape().to_vec(),
                right: vec![emissions.rows(), k],
            });
        }
        Ok(())
    }

    /// Score of `tags` over the active `steps` (tags indexed by position).
    pub fn sequence_score(&self, emissions: &Tensor, steps: &[usize], tags: &[usize]) -> f64 {
        let k = self.labels();
        let e = emissions.data();
        let mut score = 0.0;
        let mut prev: Option<usize> = None;
        for &t in steps {
            let y = tags[t];
            score += e[t * k + y];
            score += match prev {
                None => self.start[y],
                Some(p) => self.trans(p, y),
            };
            prev = Some(y);
        }
        if let Some(last) = prev {
            score += self.stop[last];
        }
        score
    }

    /// Forward variables `α[s][j]` over the active steps.
    pub fn alphas(&self, emissions: &Tensor, steps: &[usize]) -> Vec<Vec<f64>> {
        let k = self.labels();
        let e = emissions.data();
        let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(steps.len());
        let mut buf = vec![0.0; k];
        for (s, &t) in steps.iter().enumerate() {
            let row: Vec<f64> = if s == 0 {
                (0..k).map(|j| self.start[j] + e[t * k + j]).collect()
            } else {
                let prev = &alphas[s - 1];
                (0..k)
                    .map(|j| {
                        for i in 0..k {
                            buf[i] = prev[i] + self.trans(i, j);
                        }
                        log_sum_exp(&buf) + e[t * k + j]
                    })
                    .collect()
            };
            alphas.push(row);
        }
        alphas
    }

    /// Backward variables `β[s][i]` over the active steps.
    pub fn betas(&self, emissions: &Tensor, steps: &[usize]) -> Vec<Vec<f64>> {
        let k = self.labels();
        let e = emissions.data();
        let n = steps.len();
        let mut betas = vec![Vec::new(); n];
        let mut buf = vec![0.0; k];
        for s in (0..n).rev() {
            betas[s] = if s + 1 == n {
                self.stop.to_vec()
            } else {
                let t_next = steps[s + 1];
                let next = &betas[s + 1];
                (0..k)
                    .map(|i| {
                        for j in 0..k {
                            buf[j] = self.trans(i, j) + e[t_next * k + j] + next[j];
                        }
                        log_sum_exp(&buf)
                    })
                    .collect()
            };
        }
        betas
    }

    pub fn log_partition(&self, emissions: &Tensor, steps: &[usize]) -> f64 {
        let alphas = self.alphas(emissions, steps);
        let last = alphas.last().expect("at least one step");
        let terminal: Vec<f64> = last.iter().zip(self.stop).map(|(a, b)| a + b).collect();
        log_sum_exp(&terminal)
    }

    /// Best path over the active steps and its score. Ties resolve to the
    /// lowest label index.
    pub fn viterbi(&self, emissions: &Tensor, steps: &[usize]) -> (Vec<usize>, f64) {
        let k = self.labels();
        let e = emissions.data();
        let mut delta: Vec<f64> = Vec::new();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(steps.len());
        for (s, &t) in steps.iter().enumerate() {
            if s == 0 {
                delta = (0..k).map(|j| self.start[j] + e[t * k + j]).collect();
                back.push(Vec::new());
                continue;
            }
            let mut next = vec![0.0; k];
            let mut ptr = vec![0; k];
            for j in 0..k {
                let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
                for (i, d) in delta.iter().enumerate() {
                    let v = d + self.trans(i, j);
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                next[j] = best + e[t * k + j];
                ptr[j] = arg;
            }
            delta = next;
            back.push(ptr);
        }
        let (mut best, mut last) = (f64::NEG_INFINITY, 0);
        for (j, (d, s)) in delta.iter().zip(self.stop).enumerate() {
            let v = d + s;
            if v > best {
                best = v;
                last = j;
            }
        }
        let mut path = vec![0; steps.len()];
        let mut cur = last;
        for s in (0..steps.len()).rev() {
            path[s] = cur;
            if s > 0 {
                cur = back[s][cur];
            }
        }
        (path, best)
    }
}

fn weights_from<'a>(inputs: &[&'a Tensor]) -> CrfWeights<'a> {
    CrfWeights {
        transitions: inputs[1],
        start: inputs[2].data(),
        stop: inputs[3].data(),
    }
}

#[derive(Debug)]
struct SequenceScoreRule {
    steps: Vec<usize>,
    tags: Vec<usize>,
}

impl BackwardRule for SequenceScoreRule {
    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad_out: &[f64], grads: &mut [Vec<f64>]) {
        let g = grad_out[0];
        let k = inputs[2].len();
        let mut prev: Option<usize> = None;
        for &t in &self.steps {
            let y = self.tags[t];
            grads[0][t * k + y] += g;
            match prev {
                None => grads[2][y] += g,
                Some(p) => grads[1][p * k + y] += g,
            }
            prev = Some(y);
        }
        if let Some(last) = prev {
            grads[3][last] += g;
        }
    }
}

#[derive(Debug)]
struct LogPartitionRule {
    steps: Vec<usize>,
}

impl BackwardRule for LogPartitionRule {
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad_out: &[f64], grads: &mut [Vec<f64>]) {
        let g = grad_out[0];
        let log_z = output.data()[0];
        let w = weights_from(inputs);
        let k = w.labels();
        let e = inputs[0].data();
        let alphas = w.alphas(inputs[0], &self.steps);
        let betas = w.betas(inputs[0], &self.steps);
        let n = self.steps.len();
        for (s, &t) in self.steps.iter().enumerate() {
            for j in 0..k {
                let marginal = math::exp(alphas[s][j] + betas[s][j] - log_z);
                grads[0][t * k + j] += g * marginal;
                if s == 0 {
                    grads[2][j] += g * marginal;
                }
                if s + 1 == n {
                    grads[3][j] += g * marginal;
                }
            }
            if s + 1 < n {
                let t_next = self.steps[s + 1];
                for i in 0..k {
                    for j in 0..k {
                        let pair = alphas[s][i] + w.trans(i, j) + e[t_next * k + j] + betas[s + 1][j] - log_z;
                        grads[1][i * k + j] += g * math::exp(pair);
                    }
                }
            }
        }
    }
}

fn prepare(tape: &Tape, store: &ParamStore, p: &CrfParams, emissions: Var, mask: &[bool]) -> Result<Vec<usize>> {
    let e = tape.value(emissions);
    p.weights(store).check(e)?;
    if e.rows() != mask.len() {
        return Err(Error::LengthMismatch {
            left: e.rows(),
            right: mask.len(),
        });
    }
    let steps = active_steps(mask);
    if steps.is_empty() {
        return Err(Error::AllMasked { op: "crf" });
    }
    Ok(steps)
}

fn bind(tape: &mut Tape, store: &ParamStore, p: &CrfParams, emissions: Var) -> [Var; 4] {
    [
        emissions,
        tape.param(store, p.transitions),
        tape.param(store, p.start),
        tape.param(store, p.stop),
    ]
}

/// Unnormalised score of a tag sequence (tags indexed by position; entries
/// at masked positions are ignored).
pub fn crf_sequence_score(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CrfParams,
    emissions: Var,
    tags: &[usize],
    mask: &[bool],
) -> Result<Var> {
    let steps = prepare(tape, store, p, emissions, mask)?;
    if tags.len() != mask.len() {
        return Err(Error::LengthMismatch {
            left: tags.len(),
            right: mask.len(),
        });
    }
    for &t in &steps {
        if tags[t] >= p.labels {
            return Err(Error::IndexOutOfRange {
                what: "crf labels",
                index: tags[t],
                size: p.labels,
            });
        }
    }
    let score = p.weights(store).sequence_score(tape.value(emissions), &steps, tags);
    let inputs = bind(tape, store, p, emissions);
    tape.custom(
        &inputs,
        Tensor::scalar(score),
        Box::new(SequenceScoreRule {
            steps,
            tags: tags.to_vec(),
        }),
    )
}

/// `ln Σ_y exp(score(y))` over all label sequences, by the forward algorithm.
pub fn crf_log_partition(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CrfParams,
    emissions: Var,
    mask: &[bool],
) -> Result<Var> {
    let steps = prepare(tape, store, p, emissions, mask)?;
    let log_z = p.weights(store).log_partition(tape.value(emissions), &steps);
    let inputs = bind(tape, store, p, emissions);
    tape.custom(&inputs, Tensor::scalar(log_z), Box::new(LogPartitionRule { steps }))
}

/// Negative log-likelihood of the gold sequence.
pub fn crf_nll(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CrfParams,
    emissions: Var,
    mask: &[bool],
    gold: &[usize],
) -> Result<Var> {
    let score = crf_sequence_score(tape, store, p, emissions, gold, mask)?;
    let log_z = crf_log_partition(tape, store, p, emissions, mask)?;
    tape.sub(log_z, score)
}

/// Viterbi decoding; returns one label per unmasked position and the path
/// score.
pub fn crf_viterbi(
    store: &ParamStore,
    p: &CrfParams,
    emissions: &Tensor,
    mask: &[bool],
) -> Result<(Vec<usize>, f64)> {
    let w = p.weights(store);
    w.check(emissions)?;
    if emissions.rows() != mask.len() {
        return Err(Error::LengthMismatch {
            left: emissions.rows(),
            right: mask.len(),
        });
    }
    let steps = active_steps(mask);
    if steps.is_empty() {
        return Err(Error::AllMasked { op: "crf_viterbi" });
    }
    Ok(w.viterbi(emissions, &steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::testing::{random_tensor, relative_error};

    fn setup(k: usize, seed: u64) -> (ParamStore, CrfParams) {
        let mut store = ParamStore::new();
        let mut rng = seeded(seed);
        let p = CrfParams::init(&mut store, "crf", k, &mut rng).unwrap();
        for id in [p.transitions, p.start, p.stop] {
            let t = random_tensor(&mut rng, store.value(id).shape());
            store.get_mut(id).value = t;
        }
        (store, p)
    }

    fn zeroed(k: usize) -> (ParamStore, CrfParams) {
        let (mut store, p) = setup(k, 0);
        for id in [p.transitions, p.start, p.stop] {
            store.get_mut(id).value.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        (store, p)
    }

    /// Every sequence of `len` labels in `0..k`.
    fn all_sequences(k: usize, len: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..k).map(move |y| {
                        let mut s = s.clone();
                        s.push(y);
                        s
                    })
                })
                .collect();
        }
        out
    }

    /// Independent term-by-term score.
    fn direct_score(store: &ParamStore, p: &CrfParams, e: &Tensor, tags: &[usize]) -> f64 {
        let tr = store.value(p.transitions);
        let mut s = store.value(p.start).data()[tags[0]];
        for (t, y) in tags.iter().enumerate() {
            s += e.at(t, *y);
            if t > 0 {
                s += tr.at(tags[t - 1], *y);
            }
        }
        s + store.value(p.stop).data()[*tags.last().unwrap()]
    }

    fn scalar(tape: &Tape, v: Var) -> f64 {
        tape.value(v).item().unwrap()
    }

    #[test]
    fn zero_params_score_zero() {
        let (store, p) = zeroed(3);
        let mut tape = Tape::new();
        let e = tape.constant(Tensor::zeros(vec![4, 3]));
        let s = crf_sequence_score(&mut tape, &store, &p, e, &[0, 2, 1, 1], &[true; 4]).unwrap();
        assert_eq!(scalar(&tape, s), 0.0);
        let z = crf_log_partition(&mut tape, &store, &p, e, &[true; 4]).unwrap();
        assert!((scalar(&tape, z) - 4.0 * libm::log(3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_step_score() {
        let (store, p) = setup(3, 1);
        let mut rng = seeded(2);
        let e = random_tensor(&mut rng, &[1, 3]);
        let mut tape = Tape::new();
        let ev = tape.constant(e.clone());
        let s = crf_sequence_score(&mut tape, &store, &p, ev, &[2], &[true]).unwrap();
        let expected = store.value(p.start).data()[2] + e.at(0, 2) + store.value(p.stop).data()[2];
        assert_eq!(scalar(&tape, s), expected);
    }

    #[test]
    fn score_matches_direct_sum() {
        let (store, p) = setup(4, 3);
        let e = random_tensor(&mut seeded(4), &[5, 4]);
        let tags = [1, 3, 0, 0, 2];
        let mut tape = Tape::new();
        let ev = tape.constant(e.clone());
        let s = crf_sequence_score(&mut tape, &store, &p, ev, &tags, &[true; 5]).unwrap();
        assert!((scalar(&tape, s) - direct_score(&store, &p, &e, &tags)).abs() < 1e-12);
    }

    #[test]
    fn single_label_is_deterministic() {
        let (store, p) = setup(1, 5);
        let e = random_tensor(&mut seeded(6), &[3, 1]);
        let mut tape = Tape::new();
        let ev = tape.constant(e.clone());
        let z = crf_log_partition(&mut tape, &store, &p, ev, &[true; 3]).unwrap();
        let s = crf_sequence_score(&mut tape, &store, &p, ev, &[0; 3], &[true; 3]).unwrap();
        assert!((scalar(&tape, z) - scalar(&tape, s)).abs() < 1e-12);
        let nll = crf_nll(&mut tape, &store, &p, ev, &[true; 3], &[0; 3]).unwrap();
        assert!(scalar(&tape, nll).abs() < 1e-12);
        let (path, _) = crf_viterbi(&store, &p, &e, &[true; 3]).unwrap();
        assert_eq!(path, vec![0, 0, 0]);
    }

    #[test]
    fn partition_matches_enumeration() {
        let (store, p) = setup(4, 7);
        let e = random_tensor(&mut seeded(8), &[6, 4]);
        let scores: Vec<f64> = all_sequences(4, 6)
            .iter()
            .map(|y| direct_score(&store, &p, &e, y))
            .collect();
        assert_eq!(scores.len(), 4096);
        let brute = log_sum_exp(&scores);
        let mut tape = Tape::new();
        let ev = tape.constant(e);
        let z = crf_log_partition(&mut tape, &store, &p, ev, &[true; 6]).unwrap();
        assert!((scalar(&tape, z) - brute).abs() <= 1e-6);
    }

    #[test]
    fn nll_matches_enumeration_and_probabilities_sum_to_one() {
        let (store, p) = setup(3, 9);
        let e = random_tensor(&mut seeded(10), &[4, 3]);
        let seqs = all_sequences(3, 4);
        let scores: Vec<f64> = seqs.iter().map(|y| direct_score(&store, &p, &e, y)).collect();
        let log_z = log_sum_exp(&scores);
        let total: f64 = scores.iter().map(|s| libm::exp(s - log_z)).sum();
        assert!((total - 1.0).abs() <= 1e-9);
        let gold = [2, 0, 1, 1];
        let expected = -(direct_score(&store, &p, &e, &gold) - log_z);
        let mut tape = Tape::new();
        let ev = tape.constant(e);
        let nll = crf_nll(&mut tape, &store, &p, ev, &[true; 4], &gold).unwrap();
        assert!((scalar(&tape, nll) - expected).abs() <= 1e-6);
        assert!(scalar(&tape, nll) >= -1e-9);
    }

    #[test]
    fn viterbi_peaked_emissions_without_transitions() {
        let (store, p) = zeroed(3);
        let e = Tensor::from_rows(&[[5.0, 0.0, 0.0], [0.0, 0.0, 5.0], [0.0, 5.0, 0.0]]).unwrap();
        let (path, score) = crf_viterbi(&store, &p, &e, &[true; 3]).unwrap();
        assert_eq!(path, vec![0, 2, 1]);
        assert_eq!(score, 15.0);
    }

    #[test]
    fn viterbi_ties_choose_lowest_label() {
        let (store, p) = zeroed(3);
        let e = Tensor::zeros(vec![2, 3]);
        let (path, _) = crf_viterbi(&store, &p, &e, &[true; 2]).unwrap();
        assert_eq!(path, vec![0, 0]);
    }

    #[test]
    fn viterbi_matches_enumeration() {
        let (store, p) = setup(5, 11);
        let e = random_tensor(&mut seeded(12), &[7, 5]);
        let seqs = all_sequences(5, 7);
        assert_eq!(seqs.len(), 78125);
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for (i, y) in seqs.iter().enumerate() {
            let s = direct_score(&store, &p, &e, y);
            if s > best {
                best = s;
                arg = i;
            }
        }
        let (path, score) = crf_viterbi(&store, &p, &e, &[true; 7]).unwrap();
        assert_eq!(path, seqs[arg]);
        assert!((score - best).abs() < 1e-12);
    }

    #[test]
    fn masked_steps_are_skipped() {
        let (store, p) = setup(3, 13);
        let e = random_tensor(&mut seeded(14), &[5, 3]);
        let mask = [true, false, true, true, false];
        let compact = Tensor::from_rows(&[e.row(0), e.row(2), e.row(3)]).unwrap();
        let mut tape = Tape::new();
        let ev = tape.constant(e.clone());
        let cv = tape.constant(compact.clone());
        let z_masked = crf_log_partition(&mut tape, &store, &p, ev, &mask).unwrap();
        let z_compact = crf_log_partition(&mut tape, &store, &p, cv, &[true; 3]).unwrap();
        assert!((scalar(&tape, z_masked) - scalar(&tape, z_compact)).abs() < 1e-12);
        let (a, _) = crf_viterbi(&store, &p, &e, &mask).unwrap();
        let (b, _) = crf_viterbi(&store, &p, &compact, &[true; 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nll_gradients_match_finite_differences() {
        let (mut store, p) = setup(3, 15);
        let e = random_tensor(&mut seeded(16), &[4, 3]);
        let mask = [true, true, true, false];
        let gold = [1, 0, 2, 0];
        let nll_of = |store: &ParamStore, e: &Tensor| -> f64 {
            let mut tape = Tape::new();
            let ev = tape.constant(e.clone());
            let v = crf_nll(&mut tape, store, &p, ev, &mask, &gold).unwrap();
            tape.value(v).item().unwrap()
        };
        let mut tape = Tape::new();
        let ev = tape.variable(e.clone());
        let loss = crf_nll(&mut tape, &store, &p, ev, &mask, &gold).unwrap();
        tape.backward(loss).unwrap();
        let ge = tape.grad(ev).unwrap().to_vec();
        tape.flush_param_grads(&mut store);
        let h = 1e-5;
        for i in 0..e.len() {
            let (mut a, mut b) = (e.clone(), e.clone());
            a.data_mut()[i] += h;
            b.data_mut()[i] -= h;
            let numeric = (nll_of(&store, &a) - nll_of(&store, &b)) / (2.0 * h);
            assert!(relative_error(ge[i], numeric) <= 1e-4, "emission {i}");
        }
        for id in [p.transitions, p.start, p.stop] {
            let analytic = store.get(id).grad.data().to_vec();
            for i in 0..analytic.len() {
                let mut sp = store.clone();
                sp.get_mut(id).value.data_mut()[i] += h;
                let mut sm = store.clone();
                sm.get_mut(id).value.data_mut()[i] -= h;
                let numeric = (nll_of(&sp, &e) - nll_of(&sm, &e)) / (2.0 * h);
                assert!(relative_error(analytic[i], numeric) <= 1e-4);
            }
        }
    }

    #[test]
    fn out_of_range_tag_rejected() {
        let (store, p) = setup(2, 17);
        let mut tape = Tape::new();
        let e = tape.constant(Tensor::zeros(vec![2, 2]));
        assert!(matches!(
            crf_sequence_score(&mut tape, &store, &p, e, &[0, 2], &[true, true]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(crf_log_partition(&mut tape, &store, &p, e, &[false, false]).is_err());
    }
}
