use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingMode {
    /// Contextual vectors computed elsewhere, keyed by sentence id.
    Precomputed,
    /// Learned lookup table over a token vocabulary.
    Trainable,
    /// Frozen pseudo-random vector per token string.
    #[default]
    FixedRandom,
}

impl EmbeddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMode::Precomputed => "precomputed",
            EmbeddingMode::Trainable => "trainable",
            EmbeddingMode::FixedRandom => "fixed-random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "precomputed" => Some(EmbeddingMode::Precomputed),
            "trainable" => Some(EmbeddingMode::Trainable),
            "fixed-random" => Some(EmbeddingMode::FixedRandom),
            _ => None,
        }
    }
}

/// Per-sentence embedding matrices of a fixed width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    entries: BTreeMap<String, Tensor>,
}

impl PrecomputedEmbeddings {
    pub fn new(dim: usize) -> Self {
        PrecomputedEmbeddings {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores a `[T, dim]` matrix for sentence `id`.
    pub fn insert(&mut self, id: impl Into<String>, matrix: Tensor) -> Result<()> {
        let id = id.into();
        if matrix.rank() != 2 || matrix.shape()[1] != self.dim {
            return Err(Error::EmbeddingMismatch {
                expected: matrix.rows(),
                dim: self.dim,
                found: matrix.shape().to_vec(),
                id,
            });
        }
        self.entries.insert(id, matrix);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

pub const UNKNOWN_TOKEN: &str = "<unk>";

/// Token strings with the unknown-token entry at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Default for TokenVocabulary {
    fn default() -> Self {
        Self::from_ordered(core::iter::empty::<&str>())
    }
}

impl TokenVocabulary {
    /// Vocabulary over the distinct tokens, sorted.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut distinct: Vec<&str> = tokens.into_iter().collect();
        distinct.sort_unstable();
        distinct.dedup();
        Self::from_ordered(distinct)
    }

    /// Keeps the given order after the unknown token; duplicates are dropped.
    pub fn from_ordered<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let mut vocab = TokenVocabulary {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        vocab.push(UNKNOWN_TOKEN);
        for t in tokens {
            vocab.push(t.as_ref());
        }
        vocab
    }

    fn push(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of `token`, or 0 (unknown) when absent.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Source of per-token input vectors.
#[derive(Debug, Clone)]
pub enum EmbeddingProvider {
    Precomputed(Arc<PrecomputedEmbeddings>),
    Trainable {
        vocab: TokenVocabulary,
        table: ParamId,
        dim: usize,
    },
    FixedRandom { dim: usize, seed: u64 },
}

impl EmbeddingProvider {
    pub fn mode(&self) -> EmbeddingMode {
        match self {
            EmbeddingProvider::Precomputed(_) => EmbeddingMode::Precomputed,
            EmbeddingProvider::Trainable { .. } => EmbeddingMode::Trainable,
            EmbeddingProvider::FixedRandom { .. } => EmbeddingMode::FixedRandom,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::Precomputed(p) => p.dim(),
            EmbeddingProvider::Trainable { dim, .. } | EmbeddingProvider::FixedRandom { dim, .. } => *dim,
        }
    }

    /// Registers a lookup table of `vocab.len()` rows in `store`.
    pub fn trainable(
        store: &mut ParamStore,
        vocab: TokenVocabulary,
        dim: usize,
        rng: &mut rng::Rng,
    ) -> Result<Self> {
        let table = super::uniform(rng, &[vocab.len(), dim], 0.5);
        let table = store.add("embedding.table", table)?;
        Ok(EmbeddingProvider::Trainable { vocab, table, dim })
    }

    /// The frozen vector of one token in fixed-random mode.
    pub fn fixed_vector(token: &str, dim: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(rng::mix(rng::fnv1a(token.as_bytes()) ^ rng::mix(seed)));
        (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    /// Row indices of `tokens` in trainable mode.
    pub fn token_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<usize>> {
        match self {
            EmbeddingProvider::Trainable { vocab, .. } => {
                Some(tokens.iter().map(|t| vocab.id(t.as_ref())).collect())
            }
            _ => None,
        }
    }

    /// Non-trainable `[T, D]` matrix for a sentence. Trainable mode reads the
    /// current table values from `store`.
    pub fn lookup<S: AsRef<str>>(&self, store: &ParamStore, id: &str, tokens: &[S]) -> Result<Tensor> {
        if tokens.is_empty() {
            return Err(Error::Empty { op: "embed" });
        }
        let dim = self.dim();
        match self {
            EmbeddingProvider::Precomputed(p) => {
                let m = p.get(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
                if m.rows() != tokens.len() {
                    return Err(Error::EmbeddingMismatch {
                        id: id.to_string(),
                        expected: tokens.len(),
                        dim,
                        found: m.shape().to_vec(),
                    });
                }
                Ok(m.clone())
            }
            EmbeddingProvider::Trainable { vocab, table, .. } => {
                let t = store.value(*table);
                let mut data = Vec::with_capacity(tokens.len() * dim);
                for tok in tokens {
                    data.extend_from_slice(t.row(vocab.id(tok.as_ref())));
                }
                Tensor::matrix(tokens.len(), dim, data)
            }
            EmbeddingProvider::FixedRandom { seed, .. } => {
                let mut data = Vec::with_capacity(tokens.len() * dim);
                for tok in tokens {
                    data.extend(Self::fixed_vector(tok.as_ref(), dim, *seed));
                }
                Tensor::matrix(tokens.len(), dim, data)
            }
        }
    }

    /// Records the `[T, D]` embedding of a sentence on `tape`.
    pub fn embed<S: AsRef<str>>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        id: &str,
        tokens: &[S],
    ) -> Result<Var> {
        match self {
            EmbeddingProvider::Trainable { table, .. } => {
                if tokens.is_empty() {
                    return Err(Error::Empty { op: "embed" });
                }
                let ids = self.token_ids(tokens).expect("trainable mode");
                let t = tape.param(store, *table);
                tape.gather_rows(t, &ids)
            }
            _ => {
                let m = self.lookup(store, id, tokens)?;
                Ok(tape.constant(m))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fixed_random_is_deterministic_per_token() {
        let p = EmbeddingProvider::FixedRandom { dim: 8, seed: 42 };
        let m = p.lookup(&ParamStore::new(), "s", &["find", "x", "find"]).unwrap();
        assert_eq!(m.row(0), m.row(2));
        assert_ne!(m.row(0), m.row(1));
        let other = EmbeddingProvider::FixedRandom { dim: 8, seed: 43 };
        let m2 = other.lookup(&ParamStore::new(), "s", &["find"]).unwrap();
        assert_ne!(m.row(0), m2.row(0));
    }

    #[test]
    fn precomputed_lookup_and_errors() {
        let tokens = ["Where", "can", "I", "find", "Starbucks", "?"];
        let mut store = PrecomputedEmbeddings::new(1024);
        store
            .insert("fig1", Tensor::filled(vec![6, 1024], 0.25))
            .unwrap();
        let p = EmbeddingProvider::Precomputed(Arc::new(store));
        let m = p.lookup(&ParamStore::new(), "fig1", &tokens).unwrap();
        assert_eq!(m.shape(), &[6, 1024]);
        assert!(matches!(
            p.lookup(&ParamStore::new(), "other", &tokens),
            Err(Error::MissingEmbedding(_))
        ));
        assert!(matches!(
            p.lookup(&ParamStore::new(), "fig1", &tokens[..3]),
            Err(Error::EmbeddingMismatch { .. })
        ));
        let mut bad = PrecomputedEmbeddings::new(4);
        assert!(bad.insert("x", Tensor::zeros(vec![2, 3])).is_err());
    }

    #[test]
    fn unknown_token_maps_to_designated_row() {
        let mut store = ParamStore::new();
        let vocab = TokenVocabulary::build(["a", "b"]);
        let p = EmbeddingProvider::trainable(&mut store, vocab, 3, &mut rng::seeded(1)).unwrap();
        let m = p.lookup(&store, "s", &["zzz", "a"]).unwrap();
        let table = store.value(store.find("embedding.table").unwrap());
        assert_eq!(m.row(0), table.row(0));
        assert_eq!(m.row(1), table.row(1));
        assert_eq!(p.token_ids(&["b", "nope"]).unwrap(), vec![2, 0]);
    }
}
