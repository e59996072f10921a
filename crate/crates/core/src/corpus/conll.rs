//! Column text format.
//!
//! One token per line with tab-separated columns, sentences separated by
//! blank lines. A line starting with `#` and containing no tab is a comment;
//! `# id: <id>` names the sentence that follows. Gold files carry four
//! columns (token, DA, FR, AR); tagged files append three predicted columns.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::AnnotatedSentence;
use crate::error::{Error, Result};
use crate::model::TriPrediction;

/// A gold sentence paired with predicted rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub gold: AnnotatedSentence,
    pub predicted: TriPrediction,
}

struct Block {
    id: Option<String>,
    first_line: usize,
    rows: Vec<Vec<String>>,
}

fn blocks(text: &str, columns: usize) -> Result<Vec<Block>> {
    let mut out = Vec::new();
    let mut current: Option<Block> = None;
    let mut pending_id: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            out.extend(current.take());
            continue;
        }
        if line.starts_with('#') && !line.contains('\t') {
            if let Some(id) = line.strip_prefix("# id:") {
                if current.is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: "id comment inside a sentence".into(),
                    });
                }
                let id = id.trim();
                if id.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: "empty sentence id".into(),
                    });
                }
                pending_id = Some(String::from(id));
            }
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(|f| String::from(f.trim())).collect();
        if fields.len() != columns {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected {columns} tab-separated columns, found {}", fields.len()),
            });
        }
        if fields.iter().any(String::is_empty) {
            return Err(Error::Parse {
                line: line_no,
                reason: "empty column".into(),
            });
        }
        current
            .get_or_insert_with(|| Block {
                id: pending_id.take(),
                first_line: line_no,
                rows: Vec::new(),
            })
            .rows
            .push(fields);
    }
    out.extend(current);
    Ok(out)
}

fn column(rows: &[Vec<String>], c: usize) -> Vec<String> {
    rows.iter().map(|r| r[c].clone()).collect()
}

fn gold_sentence(block: &Block, ordinal: usize, seen: &mut BTreeSet<String>) -> Result<AnnotatedSentence> {
    let id = block.id.clone().unwrap_or_else(|| format!("s{ordinal}"));
    if !seen.insert(id.clone()) {
        return Err(Error::Parse {
            line: block.first_line,
            reason: format!("duplicate sentence id {id:?}"),
        });
    }
    AnnotatedSentence::new(
        id,
        column(&block.rows, 0),
        column(&block.rows, 1),
        column(&block.rows, 2),
        column(&block.rows, 3),
    )
    .map_err(|e| Error::Parse {
        line: block.first_line,
        reason: format!("{e}"),
    })
}

/// Parses a four-column gold file. Sentences without an id comment are
/// named `s<n>` by their 1-based position.
pub fn parse_conll(text: &str) -> Result<Vec<AnnotatedSentence>> {
    let mut seen = BTreeSet::new();
    blocks(text, 4)?
        .iter()
        .enumerate()
        .map(|(i, b)| gold_sentence(b, i + 1, &mut seen))
        .collect()
}

/// Parses a seven-column file of gold and predicted rows. Predicted rows are
/// kept verbatim even when they are not valid IOB2.
pub fn parse_tagged(text: &str) -> Result<Vec<TaggedSentence>> {
    let mut seen = BTreeSet::new();
    blocks(text, 7)?
        .iter()
        .enumerate()
        .map(|(i, b)| {
            Ok(TaggedSentence {
                gold: gold_sentence(b, i + 1, &mut seen)?,
                predicted: TriPrediction {
                    da: column(&b.rows, 4),
                    fr: column(&b.rows, 5),
                    ar: column(&b.rows, 6),
                },
            })
        })
        .collect()
}

/// A sentence of predicted rows, read without IOB2 validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub predicted: TriPrediction,
}

/// Parses a four-column file whose tag columns are predictions; rows are
/// kept verbatim.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictedSentence>> {
    let mut seen = BTreeSet::new();
    blocks(text, 4)?
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let id = b.id.clone().unwrap_or_else(|| format!("s{}", i + 1));
            if !seen.insert(id.clone()) {
                return Err(Error::Parse {
                    line: b.first_line,
                    reason: format!("duplicate sentence id {id:?}"),
                });
            }
            Ok(PredictedSentence {
                id,
                tokens: column(&b.rows, 0),
                predicted: TriPrediction {
                    da: column(&b.rows, 1),
                    fr: column(&b.rows, 2),
                    ar: column(&b.rows, 3),
                },
            })
        })
        .collect()
}

/// Appends one sentence: an id comment, then `tokens[t]` followed by
/// `rows[*][t]` on each line, then a blank line.
pub fn write_rows<S: AsRef<str>>(out: &mut String, id: &str, tokens: &[S], rows: &[&[String]]) {
    let _ = writeln!(out, "# id: {id}");
    for (t, token) in tokens.iter().enumerate() {
        out.push_str(token.as_ref());
        for row in rows {
            out.push('\t');
            out.push_str(&row[t]);
        }
        out.push('\n');
    }
    out.push('\n');
}

pub fn serialize_conll(corpus: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in corpus {
        write_rows(&mut out, &s.id, &s.tokens, &s.rows());
    }
    out
}

pub fn serialize_tagged(sentences: &[TaggedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let g = &s.gold;
        let p = &s.predicted;
        write_rows(
            &mut out,
            &g.id,
            &g.tokens,
            &[&g.da_tags, &g.fr_tags, &g.ar_tags, &p.da, &p.fr, &p.ar],
        );
    }
    out
}
