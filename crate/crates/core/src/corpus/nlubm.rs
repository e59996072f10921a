use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{chunks_to_tags, tokenize, AnnotatedSentence, Chunk};
use crate::error::{Error, Result};

/// Entity span over token indices, `end` exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntitySpan {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// One utterance of a scenario/action/entity corpus. When `tokens` is empty
/// the text is split on whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NluBmRecord {
    pub id: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub text: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub tokens: Vec<String>,
    pub scenario: String,
    pub action: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub entities: Vec<EntitySpan>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvertOptions {
    /// Leave a final punctuation-only token outside the DA and FR spans.
    pub strip_final_punct: bool,
}

/// `scenario_action`, the utterance-level intent.
pub fn intent_name(scenario: &str, action: &str) -> String {
    format!("{scenario}_{action}")
}

fn whole_span(label: &str, len: usize) -> Vec<String> {
    (0..len)
        .map(|i| if i == 0 { format!("B-{label}") } else { format!("I-{label}") })
        .collect()
}

/// Scenario becomes a DA span and action an FR span over the utterance;
/// entities become AR chunks.
pub fn convert_nlubm(record: &NluBmRecord, options: ConvertOptions) -> Result<AnnotatedSentence> {
    let tokens = if record.tokens.is_empty() {
        tokenize(&record.text)
    } else {
        record.tokens.clone()
    };
    let bad = |reason: String| Error::InvalidSentence {
        id: record.id.clone(),
        reason,
    };
    if tokens.is_empty() {
        return Err(bad("no tokens".into()));
    }
    for (name, label) in [("scenario", &record.scenario), ("action", &record.action)] {
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(bad(format!("invalid {name} {label:?}")));
        }
    }
    let mut spans: Vec<Chunk> = record
        .entities
        .iter()
        .map(|e| Chunk::new(e.start, e.end, e.label.clone()))
        .collect();
    spans.sort();
    for c in &spans {
        if c.start >= c.end || c.end > tokens.len() {
            return Err(bad(format!("entity {} span {}..{} out of bounds", c.label, c.start, c.end)));
        }
        if c.label.is_empty() || c.label.chars().any(char::is_whitespace) {
            return Err(bad(format!("invalid entity label {:?}", c.label)));
        }
    }
    if let Some(w) = spans.windows(2).find(|w| w[0].overlaps(&w[1])) {
        return Err(bad(format!("overlapping entities {} and {}", w[0].label, w[1].label)));
    }
    let ar = chunks_to_tags(&spans, tokens.len())?;
    let last_is_punct = tokens
        .last()
        .is_some_and(|t| t.chars().all(|c| c.is_ascii_punctuation()));
    let covered = if options.strip_final_punct && last_is_punct && tokens.len() > 1 {
        tokens.len() - 1
    } else {
        tokens.len()
    };
    let mut da = whole_span(&record.scenario, covered);
    let mut fr = whole_span(&record.action, covered);
    da.resize(tokens.len(), String::from("O"));
    fr.resize(tokens.len(), String::from("O"));
    AnnotatedSentence::new(record.id.clone(), tokens, da, fr, ar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_chunks, strings, validate_iob2};
    use proptest::prelude::*;

    fn schedule() -> NluBmRecord {
        NluBmRecord {
            id: String::from("u1"),
            text: String::from("schedule a call with Lisa on Monday morning"),
            tokens: Vec::new(),
            scenario: String::from("calendar"),
            action: String::from("set_event"),
            entities: alloc::vec![
                EntitySpan { label: String::from("event_name"), start: 1, end: 5 },
                EntitySpan { label: String::from("date"), start: 6, end: 8 },
            ],
        }
    }

    #[test]
    fn converts_calendar_example() {
        let s = convert_nlubm(&schedule(), ConvertOptions::default()).unwrap();
        assert_eq!(s.tokens.len(), 8);
        assert_eq!(s.da_tags[0], "B-calendar");
        assert!(s.da_tags[1..].iter().all(|t| t == "I-calendar"));
        assert!(s.fr_tags[1..].iter().all(|t| t == "I-set_event"));
        assert_eq!(
            s.ar_tags,
            strings(&["O", "B-event_name", "I-event_name", "I-event_name", "I-event_name", "O", "B-date", "I-date"])
        );
        assert_eq!(intent_name(&schedule().scenario, &schedule().action), "calendar_set_event");
    }

    #[test]
    fn overlapping_entities_rejected() {
        let mut r = schedule();
        r.entities[1].start = 4;
        assert!(convert_nlubm(&r, ConvertOptions::default()).is_err());
        r.entities[1] = EntitySpan { label: String::from("date"), start: 6, end: 9 };
        assert!(convert_nlubm(&r, ConvertOptions::default()).is_err());
    }

    #[test]
    fn final_punctuation_handling() {
        let mut r = schedule();
        r.text.push_str(" ?");
        let kept = convert_nlubm(&r, ConvertOptions::default()).unwrap();
        assert_eq!(kept.da_tags[8], "I-calendar");
        let stripped = convert_nlubm(&r, ConvertOptions { strip_final_punct: true }).unwrap();
        assert_eq!(stripped.da_tags[8], "O");
        assert_eq!(stripped.fr_tags[8], "O");
        assert_eq!(extract_chunks(&stripped.da_tags).unwrap(), [Chunk::new(0, 8, "calendar")]);
    }

    proptest! {
        #[test]
        fn output_is_valid_iob2(len in 1usize..12, cuts in prop::collection::vec(0usize..12, 0..8), strip in any::<bool>()) {
            let mut bounds: Vec<usize> = cuts.into_iter().filter(|c| *c <= len).collect();
            bounds.sort_unstable();
            bounds.dedup();
            let entities = bounds
                .chunks_exact(2)
                .filter(|w| w[0] < w[1])
                .map(|w| EntitySpan { label: String::from("e"), start: w[0], end: w[1] })
                .collect();
            let record = NluBmRecord {
                id: String::from("p"),
                text: String::new(),
                tokens: (0..len).map(|i| format!("t{i}")).chain(core::iter::once(String::from("."))).collect(),
                scenario: String::from("s"),
                action: String::from("a"),
                entities,
            };
            let s = convert_nlubm(&record, ConvertOptions { strip_final_punct: strip }).unwrap();
            for row in s.rows() {
                prop_assert!(validate_iob2(row).is_valid());
            }
        }
    }
}
