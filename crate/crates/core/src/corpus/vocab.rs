use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{AnnotatedSentence, Task};
use crate::error::{Error, Result};

/// IOB2 tag inventory of one task. `O` is always index 0, the remaining tags
/// follow in byte order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl LabelVocabulary {
    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a str>) -> Self {
        let rest: BTreeSet<&str> = tags.into_iter().filter(|t| *t != "O").collect();
        let mut labels = Vec::with_capacity(rest.len() + 1);
        labels.push(String::from("O"));
        labels.extend(rest.into_iter().map(String::from));
        Self::indexed(labels)
    }

    /// Restores a vocabulary from labels in index order.
    pub fn from_ordered<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(|s| String::from(s.as_ref())).collect();
        if labels.first().map(String::as_str) != Some("O") {
            return Err(Error::Config("label vocabulary must start with O".into()));
        }
        let vocab = Self::indexed(labels);
        if vocab.index.len() != vocab.labels.len() {
            return Err(Error::Config("duplicate label in vocabulary".into()));
        }
        Ok(vocab)
    }

    fn indexed(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        LabelVocabulary { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, task: Task, tags: &[S]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.index(t.as_ref()).ok_or_else(|| Error::UnknownLabel {
                    task: task.name(),
                    label: String::from(t.as_ref()),
                })
            })
            .collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Result<Vec<String>> {
        indices
            .iter()
            .map(|&i| {
                self.label(i).map(String::from).ok_or(Error::IndexOutOfRange {
                    what: "label vocabulary",
                    index: i,
                    size: self.len(),
                })
            })
            .collect()
    }
}

/// One vocabulary per task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskLabels {
    pub da: LabelVocabulary,
    pub fr: LabelVocabulary,
    pub ar: LabelVocabulary,
}

impl TaskLabels {
    pub fn from_corpus(corpus: &[AnnotatedSentence]) -> Self {
        let collect = |task: Task| {
            LabelVocabulary::from_tags(corpus.iter().flat_map(|s| s.tags(task).iter().map(String::as_str)))
        };
        TaskLabels {
            da: collect(Task::Da),
            fr: collect(Task::Fr),
            ar: collect(Task::Ar),
        }
    }

    pub fn get(&self, task: Task) -> &LabelVocabulary {
        match task {
            Task::Da => &self.da,
            Task::Fr => &self.fr,
            Task::Ar => &self.ar,
        }
    }

    /// Gold indices `[da, fr, ar]` for one sentence.
    pub fn encode(&self, sentence: &AnnotatedSentence) -> Result<[Vec<usize>; 3]> {
        let enc = |task: Task| {
            self.get(task).encode(task, sentence.tags(task)).map_err(|e| Error::InvalidSentence {
                id: sentence.id.clone(),
                reason: format!("{e}"),
            })
        };
        Ok([enc(Task::Da)?, enc(Task::Fr)?, enc(Task::Ar)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outside_first_then_sorted() {
        let v = LabelVocabulary::from_tags(["I-B", "O", "B-B", "B-A", "B-B"]);
        assert_eq!(v.labels(), ["O", "B-A", "B-B", "I-B"]);
        assert_eq!(v.index("B-B"), Some(2));
        assert_eq!(LabelVocabulary::from_tags([]).labels(), ["O"]);
    }

    #[test]
    fn encode_unknown_label_fails() {
        let v = LabelVocabulary::from_tags(["B-A"]);
        assert_eq!(v.encode(Task::Da, &["O", "B-A"]).unwrap(), [0, 1]);
        assert!(matches!(v.encode(Task::Da, &["B-Z"]), Err(Error::UnknownLabel { .. })));
        assert_eq!(v.decode(&[1, 0]).unwrap(), ["B-A", "O"]);
        assert!(v.decode(&[5]).is_err());
    }

    #[test]
    fn ordered_round_trip() {
        let v = LabelVocabulary::from_tags(["B-X", "I-X"]);
        assert_eq!(LabelVocabulary::from_ordered(v.labels()).unwrap(), v);
        assert!(LabelVocabulary::from_ordered(["B-X", "O"]).is_err());
        assert!(LabelVocabulary::from_ordered(["O", "B-X", "B-X"]).is_err());
    }
}
