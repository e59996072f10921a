use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::{AnnotatedSentence, TaskLabels};
use crate::error::{Error, Result};
use crate::layers::{EmbeddingMode, TokenVocabulary};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub embedding: EmbeddingMode,
    pub embedding_dim: usize,
    /// Seed of the fixed-random embedding hash.
    pub embedding_seed: u64,
    pub hidden: usize,
    pub attention: usize,
    /// Inverted-dropout rate on the embeddings and on each level's output.
    pub dropout: f64,
    pub use_self_attention: bool,
    pub use_shortcuts: bool,
    pub use_crf: bool,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            embedding: EmbeddingMode::FixedRandom,
            embedding_dim: 64,
            embedding_seed: 0,
            hidden: 200,
            attention: 64,
            dropout: 0.0,
            use_self_attention: true,
            use_shortcuts: true,
            use_crf: true,
        }
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl ModelSettings {
    pub const KEYS: [&'static str; 9] = [
        "embedding",
        "embedding_dim",
        "embedding_seed",
        "hidden",
        "attention",
        "dropout",
        "self_attention",
        "shortcuts",
        "crf",
    ];

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        alloc::vec![
            ("embedding", self.embedding.as_str().to_string()),
            ("embedding_dim", self.embedding_dim.to_string()),
            ("embedding_seed", self.embedding_seed.to_string()),
            ("hidden", self.hidden.to_string()),
            ("attention", self.attention.to_string()),
            ("dropout", format!("{:?}", self.dropout)),
            ("self_attention", self.use_self_attention.to_string()),
            ("shortcuts", self.use_shortcuts.to_string()),
            ("crf", self.use_crf.to_string()),
        ]
    }

    /// Applies one `key = value` setting; `Ok(false)` for keys it does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "embedding" => {
                self.embedding = EmbeddingMode::parse(value.trim())
                    .ok_or_else(|| Error::Config(format!("unknown embedding mode {value:?}")))?
            }
            "embedding_dim" => self.embedding_dim = parse_value(key, value)?,
            "embedding_seed" => self.embedding_seed = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "attention" => self.attention = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "self_attention" => self.use_self_attention = parse_value(key, value)?,
            "shortcuts" => self.use_shortcuts = parse_value(key, value)?,
            "crf" => self.use_crf = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden == 0 || self.attention == 0 {
            return Err(Error::Config("embedding_dim, hidden and attention must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        let (sa, cn, crf) = ablation.flags();
        self.use_self_attention = sa;
        self.use_shortcuts = cn;
        self.use_crf = crf;
        self
    }

    /// The preset whose flags equal these settings, if any.
    pub fn ablation(&self) -> Option<Ablation> {
        let flags = (self.use_self_attention, self.use_shortcuts, self.use_crf);
        Ablation::ALL.into_iter().find(|a| a.flags() == flags)
    }
}

/// The five component-removal presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ablation {
    Full,
    NoSa,
    NoSaCn,
    NoSaCrf,
    NoSaCnCrf,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::Full,
        Ablation::NoSa,
        Ablation::NoSaCn,
        Ablation::NoSaCrf,
        Ablation::NoSaCnCrf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoSa => "-sa",
            Ablation::NoSaCn => "-sa-cn",
            Ablation::NoSaCrf => "-sa-crf",
            Ablation::NoSaCnCrf => "-sa-cn-crf",
        }
    }

    /// `(self-attention, shortcuts, crf)`.
    pub fn flags(self) -> (bool, bool, bool) {
        match self {
            Ablation::Full => (true, true, true),
            Ablation::NoSa => (false, true, true),
            Ablation::NoSaCn => (false, false, true),
            Ablation::NoSaCrf => (false, true, false),
            Ablation::NoSaCnCrf => (false, false, false),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation preset {s:?}")))
    }
}

/// Everything needed to rebuild a model's shape: settings, label sets and,
/// for trainable embeddings, the token vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitConfig {
    pub settings: ModelSettings,
    pub labels: TaskLabels,
    pub tokens: Option<TokenVocabulary>,
}

impl HermitConfig {
    pub fn from_corpus(settings: ModelSettings, corpus: &[AnnotatedSentence]) -> Self {
        let tokens = (settings.embedding == EmbeddingMode::Trainable)
            .then(|| TokenVocabulary::build(corpus.iter().flat_map(|s| s.tokens.iter().map(String::as_str))));
        HermitConfig {
            settings,
            labels: TaskLabels::from_corpus(corpus),
            tokens,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if (self.settings.embedding == EmbeddingMode::Trainable) != self.tokens.is_some() {
            return Err(Error::Config(
                "a token vocabulary is required exactly when embeddings are trainable".into(),
            ));
        }
        Ok(())
    }
}
