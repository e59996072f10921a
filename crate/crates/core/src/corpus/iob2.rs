use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// A parsed IOB2 tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, label) = tag.split_at_checked(2)?;
        if label.is_empty() {
            return None;
        }
        match prefix {
            "B-" => Some(Tag::Begin(label)),
            "I-" => Some(Tag::Inside(label)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iob2Violation {
    pub index: usize,
    pub tag: String,
    pub reason: String,
}

impl fmt::Display for Iob2Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "position {} ({}): {}", self.index, self.tag, self.reason)
    }
}

/// Outcome of [`validate_iob2`]; lists the first violation only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iob2Report {
    pub violation: Option<Iob2Violation>,
}

impl Iob2Report {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Every `I-X` must follow `B-X` or `I-X`.
pub fn validate_iob2<S: AsRef<str>>(tags: &[S]) -> Iob2Report {
    let mut prev: Option<Tag<'_>> = None;
    for (index, raw) in tags.iter().enumerate() {
        let raw = raw.as_ref();
        let violation = |reason: String| Iob2Report {
            violation: Some(Iob2Violation {
                index,
                tag: raw.to_string(),
                reason,
            }),
        };
        let Some(tag) = Tag::parse(raw) else {
            return violation("not an IOB2 tag".into());
        };
        if let Tag::Inside(label) = tag {
            let continues = matches!(prev, Some(Tag::Begin(l)) | Some(Tag::Inside(l)) if l == label);
            if !continues {
                return violation(format!("I-{label} does not continue a {label} chunk"));
            }
        }
        prev = Some(tag);
    }
    Iob2Report { violation: None }
}

/// A labelled span `[start, end)` of token positions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Chunk {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Chunk {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn overlaps(&self, other: &Chunk) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Maximal `B-X I-X*` runs of a valid sequence.
pub fn extract_chunks<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Chunk>> {
    if let Some(v) = validate_iob2(tags).violation {
        return Err(Error::InvalidIob2 {
            index: v.index,
            reason: v.reason,
        });
    }
    Ok(extract_chunks_lenient(tags))
}

/// Chunk extraction that repairs a dangling `I-X` by opening a new chunk,
/// as if it were `B-X`. Unparseable tags count as `O`.
pub fn extract_chunks_lenient<S: AsRef<str>>(tags: &[S]) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, raw) in tags.iter().enumerate() {
        let tag = Tag::parse(raw.as_ref()).unwrap_or(Tag::Outside);
        let continues = matches!((tag, open), (Tag::Inside(l), Some((_, o))) if l == o);
        if continues {
            continue;
        }
        if let Some((start, label)) = open.take() {
            chunks.push(Chunk::new(start, i, label));
        }
        match tag {
            Tag::Begin(l) | Tag::Inside(l) => open = Some((i, l)),
            Tag::Outside => {}
        }
    }
    if let Some((start, label)) = open {
        chunks.push(Chunk::new(start, tags.len(), label));
    }
    chunks
}

/// Inverse of chunk extraction for non-overlapping chunks within `len`.
pub fn chunks_to_tags(chunks: &[Chunk], len: usize) -> Result<Vec<String>> {
    let mut tags = vec![String::from("O"); len];
    let mut taken = vec![false; len];
    for c in chunks {
        if c.start >= c.end || c.end > len {
            return Err(Error::invalid(
                "chunks_to_tags",
                format!("span {}..{} outside 0..{len}", c.start, c.end),
            ));
        }
        for i in c.start..c.end {
            if taken[i] {
                return Err(Error::invalid(
                    "chunks_to_tags",
                    format!("overlapping chunks at position {i}"),
                ));
            }
            taken[i] = true;
            tags[i] = if i == c.start {
                format!("B-{}", c.label)
            } else {
                format!("I-{}", c.label)
            };
        }
    }
    Ok(tags)
}
