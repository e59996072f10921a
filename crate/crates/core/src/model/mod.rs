//! The hierarchical tagger.
//!
//! ```text
//! s_da = BiLSTM_da(e)          a_da = SelfAtt_da(s_da)
//! s_fr = BiLSTM_fr(e ⊕ a_da)   a_fr = SelfAtt_fr(s_fr)
//! s_ar = BiLSTM_ar(e ⊕ a_fr)
//! ```
//!
//! Each level feeds its top representation to a tagger. Without shortcuts
//! the `e ⊕` concatenations are dropped; without self-attention `a = s`.

mod config;

pub use config::{Ablation, HermitConfig, ModelSettings};
pub(crate) use config::parse_value;

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use rand::Rng as _;

use crate::corpus::{AnnotatedSentence, Task};
use crate::error::{Error, Result};
use crate::layers::{
    bilstm_forward, self_attention, BiLstmParams, EmbeddingMode, EmbeddingProvider, PrecomputedEmbeddings,
    SelfAttentionParams, Tagger,
};
use crate::numerics::{ParamStore, Tape, Tensor, Var};
use crate::rng::{seeded, Rng};

/// Predicted IOB2 rows for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TriPrediction {
    pub da: Vec<String>,
    pub fr: Vec<String>,
    pub ar: Vec<String>,
}

impl TriPrediction {
    pub fn get(&self, task: Task) -> &[String] {
        match task {
            Task::Da => &self.da,
            Task::Fr => &self.fr,
            Task::Ar => &self.ar,
        }
    }

    pub fn len(&self) -> usize {
        self.da.len()
    }

    pub fn is_empty(&self) -> bool {
        self.da.is_empty()
    }
}

/// Encoder, optional attention and tagger of one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub encoder: BiLstmParams,
    pub attention: Option<SelfAttentionParams>,
    pub tagger: Tagger,
}

impl Level {
    pub fn input_width(&self) -> usize {
        self.encoder.forward.input
    }

    pub fn output_width(&self) -> usize {
        self.encoder.output_width()
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LevelOutput {
    pub input: Var,
    pub encoded: Var,
    pub attended: Option<Var>,
    pub emissions: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardPass {
    pub embeddings: Var,
    pub levels: [LevelOutput; 3],
}

#[derive(Debug, Clone)]
pub struct HermitModel {
    config: HermitConfig,
    store: ParamStore,
    embeddings: EmbeddingProvider,
    levels: [Level; 3],
}

impl HermitModel {
    /// Initialises every parameter from `seed`. Precomputed embedding mode
    /// needs the embedding table up front; other modes ignore it.
    pub fn build(config: HermitConfig, seed: u64, precomputed: Option<Arc<PrecomputedEmbeddings>>) -> Result<Self> {
        config.validate()?;
        let s = &config.settings;
        let mut rng = seeded(seed);
        let mut store = ParamStore::new();
        let embeddings = match s.embedding {
            EmbeddingMode::Precomputed => {
                let table = precomputed
                    .ok_or_else(|| Error::Config("precomputed embeddings were not supplied".into()))?;
                if table.dim() != s.embedding_dim {
                    return Err(Error::Config(format!(
                        "embedding_dim is {} but the embedding table has width {}",
                        s.embedding_dim,
                        table.dim()
                    )));
                }
                EmbeddingProvider::Precomputed(table)
            }
            EmbeddingMode::Trainable => {
                let vocab = config.tokens.clone().expect("validated");
                EmbeddingProvider::trainable(&mut store, vocab, s.embedding_dim, &mut rng)?
            }
            EmbeddingMode::FixedRandom => EmbeddingProvider::FixedRandom {
                dim: s.embedding_dim,
                seed: s.embedding_seed,
            },
        };
        let d = s.embedding_dim;
        let shortcut = if s.use_shortcuts { d } else { 0 };
        let mut levels = Vec::with_capacity(3);
        let mut below = 0;
        for task in Task::ALL {
            let input = if task == Task::Da { d } else { shortcut + below };
            let name = task.name();
            let encoder = BiLstmParams::init(&mut store, &format!("{name}.bilstm"), input, s.hidden, &mut rng)?;
            let width = encoder.output_width();
            let attention = if s.use_self_attention && task != Task::Ar {
                Some(SelfAttentionParams::init(&mut store, &format!("{name}.attn"), width, s.attention, &mut rng)?)
            } else {
                None
            };
            let labels = config.labels.get(task).len();
            let tagger = Tagger::init(&mut store, &format!("{name}.tagger"), width, labels, s.use_crf, &mut rng)?;
            levels.push(Level {
                encoder,
                attention,
                tagger,
            });
            below = width;
        }
        let levels: [Level; 3] = levels.try_into().expect("three levels");
        Ok(HermitModel {
            config,
            store,
            embeddings,
            levels,
        })
    }

    pub fn config(&self) -> &HermitConfig {
        &self.config
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.config.settings
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn level(&self, task: Task) -> &Level {
        &self.levels[task.index()]
    }

    pub fn embeddings(&self) -> &EmbeddingProvider {
        &self.embeddings
    }

    /// Swaps in a precomputed embedding table of the configured width.
    pub fn set_precomputed(&mut self, table: Arc<PrecomputedEmbeddings>) -> Result<()> {
        if self.settings().embedding != EmbeddingMode::Precomputed || table.dim() != self.settings().embedding_dim {
            return Err(Error::Config("embedding table does not fit this model".into()));
        }
        self.embeddings = EmbeddingProvider::Precomputed(table);
        Ok(())
    }

    /// `[T, D]` embedding of a sentence on `tape`.
    pub fn embed<S: AsRef<str>>(&self, tape: &mut Tape, id: &str, tokens: &[S]) -> Result<Var> {
        self.embeddings.embed(tape, &self.store, id, tokens)
    }

    /// Runs the three levels on `e[T, D]`. Passing `dropout` enables
    /// inverted dropout with the configured rate.
    pub fn forward(&self, tape: &mut Tape, e: Var, mask: &[bool], mut dropout: Option<&mut Rng>) -> Result<ForwardPass> {
        let rate = self.settings().dropout;
        let mut drop = |tape: &mut Tape, v: Var| -> Result<Var> {
            match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => {
                    let shape = tape.shape(v).to_vec();
                    let n = shape.iter().product();
                    let keep = 1.0 / (1.0 - rate);
                    let m: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
                    let m = tape.constant(Tensor::new(shape, m)?);
                    tape.mul(v, m)
                }
                _ => Ok(v),
            }
        };
        let e_in = drop(tape, e)?;
        let mut outputs = Vec::with_capacity(3);
        let mut below: Option<Var> = None;
        for level in &self.levels {
            let input = match below {
                None => e_in,
                Some(prev) if self.settings().use_shortcuts => tape.concat(e_in, prev)?,
                Some(prev) => prev,
            };
            let encoded = bilstm_forward(tape, &self.store, &level.encoder, input, mask)?;
            let attended = match &level.attention {
                Some(att) => Some(self_attention(tape, &self.store, att, encoded, mask)?),
                None => None,
            };
            let top = drop(tape, attended.unwrap_or(encoded))?;
            let emissions = level.tagger.emissions(tape, &self.store, top)?;
            outputs.push(LevelOutput {
                input,
                encoded,
                attended,
                emissions,
            });
            below = Some(top);
        }
        Ok(ForwardPass {
            embeddings: e,
            levels: outputs.try_into().expect("three levels"),
        })
    }

    /// Sum of the three task losses for one (possibly padded) sentence.
    pub fn sentence_loss(
        &self,
        tape: &mut Tape,
        e: Var,
        mask: &[bool],
        gold: [&[usize]; 3],
        dropout: Option<&mut Rng>,
    ) -> Result<Var> {
        let pass = self.forward(tape, e, mask, dropout)?;
        let mut losses = Vec::with_capacity(3);
        for (i, level) in self.levels.iter().enumerate() {
            losses.push(level.tagger.loss(tape, &self.store, pass.levels[i].emissions, mask, gold[i])?);
        }
        tape.add_all(&losses)
    }

    /// Total loss over unpadded sentences, without dropout.
    pub fn loss(&self, sentences: &[AnnotatedSentence]) -> Result<f64> {
        let mut total = 0.0;
        let mut tape = Tape::new();
        for s in sentences {
            tape.clear();
            let gold = self.config.labels.encode(s)?;
            let e = self.embed(&mut tape, &s.id, &s.tokens)?;
            let mask = alloc::vec![true; s.len()];
            let l = self.sentence_loss(&mut tape, e, &mask, [&gold[0], &gold[1], &gold[2]], None)?;
            total += tape.value(l).item().expect("scalar loss");
        }
        Ok(total)
    }

    /// Decodes the three levels of a sentence.
    pub fn predict<S: AsRef<str>>(&self, id: &str, tokens: &[S]) -> Result<TriPrediction> {
        let mut tape = Tape::new();
        let e = self.embed(&mut tape, id, tokens)?;
        let mask = alloc::vec![true; tokens.len()];
        let pass = self.forward(&mut tape, e, &mask, None)?;
        let mut rows = Vec::with_capacity(3);
        for (task, level) in Task::ALL.into_iter().zip(&self.levels) {
            let emissions = tape.value(pass.levels[task.index()].emissions);
            let indices = level.tagger.decode(&self.store, emissions, &mask)?;
            rows.push(self.config.labels.get(task).decode(&indices)?);
        }
        let [da, fr, ar]: [Vec<String>; 3] = rows.try_into().expect("three rows");
        Ok(TriPrediction { da, fr, ar })
    }

    pub fn predict_sentence(&self, sentence: &AnnotatedSentence) -> Result<TriPrediction> {
        self.predict(&sentence.id, &sentence.tokens)
    }
}
