//! Tri-layer IOB2 corpora: data model, validation, formats, folds.

mod conll;
mod folds;
mod iob2;
mod nlubm;
pub mod synthetic;
mod vocab;

pub use conll::{
    parse_conll, parse_predictions, parse_tagged, serialize_conll, serialize_tagged, write_rows, PredictedSentence,
    TaggedSentence,
};
pub use folds::{holdout_split, kfold_split, FoldRound, FoldSplit};
pub use iob2::{chunks_to_tags, extract_chunks, extract_chunks_lenient, validate_iob2, Chunk, Iob2Report, Iob2Violation, Tag};
pub use nlubm::{convert_nlubm, intent_name, ConvertOptions, EntitySpan, NluBmRecord};
pub use vocab::{LabelVocabulary, TaskLabels};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// The three tagging levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    /// Dialogue acts.
    Da,
    /// Frames.
    Fr,
    /// Frame arguments.
    Ar,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Da, Task::Fr, Task::Ar];

    pub fn name(self) -> &'static str {
        match self {
            Task::Da => "da",
            Task::Fr => "fr",
            Task::Ar => "ar",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Tokens with one IOB2 row per task.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnotatedSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub da_tags: Vec<String>,
    pub fr_tags: Vec<String>,
    pub ar_tags: Vec<String>,
}

impl AnnotatedSentence {
    /// Builds a sentence and checks every invariant.
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        da_tags: Vec<String>,
        fr_tags: Vec<String>,
        ar_tags: Vec<String>,
    ) -> Result<Self> {
        let s = AnnotatedSentence {
            id: id.into(),
            tokens,
            da_tags,
            fr_tags,
            ar_tags,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidSentence {
            id: self.id.clone(),
            reason,
        };
        if self.tokens.is_empty() {
            return Err(bad("no tokens".into()));
        }
        if let Some(t) = self
            .tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(bad(format!("token {t:?} is empty or contains whitespace")));
        }
        for task in Task::ALL {
            let tags = self.tags(task);
            if tags.len() != self.tokens.len() {
                return Err(bad(format!(
                    "{} row has {} tags for {} tokens",
                    task.name(),
                    tags.len(),
                    self.tokens.len()
                )));
            }
            if let Some(v) = validate_iob2(tags).violation {
                return Err(bad(format!("{} row: {}", task.name(), v)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tags(&self, task: Task) -> &[String] {
        match task {
            Task::Da => &self.da_tags,
            Task::Fr => &self.fr_tags,
            Task::Ar => &self.ar_tags,
        }
    }

    pub fn rows(&self) -> [&[String]; 3] {
        [&self.da_tags, &self.fr_tags, &self.ar_tags]
    }
}

/// Whitespace tokenisation used for raw text.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

#[cfg(test)]
pub(crate) fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| String::from(*s)).collect()
}
