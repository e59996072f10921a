//! A small templated corpus for smoke tests and memorisation checks.
//!
//! 64 distinct sentences, a 35-word vocabulary, 4 dialogue-act, 6 frame and
//! 8 argument labels, at most 10 tokens per sentence.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use super::AnnotatedSentence;
use crate::rng::seeded;

pub const TOY_SIZE: usize = 64;
const TOY_SEED: u64 = 0x7e57;

const PLACES: [&[&str]; 5] = [&["kitchen"], &["bedroom"], &["coffee", "shop"], &["bank"], &["pharmacy"]];
const OBJECTS: [&[&str]; 4] = [&["a", "coffee"], &["the", "keys"], &["a", "glass", "of", "water"], &["my", "phone"]];
const TIMES: [&str; 3] = ["now", "tomorrow", "later"];
const DIRECTIONS: [&str; 2] = ["left", "right"];
const MANNERS: [&str; 2] = ["slowly", "quickly"];

#[derive(Clone, Copy)]
enum Span {
    Begin(&'static str),
    Cont(&'static str),
    Out,
}
use Span::{Begin as B, Cont as C, Out as O};

#[derive(Default)]
struct Builder {
    tokens: Vec<String>,
    rows: [Vec<String>; 3],
}

impl Builder {
    fn push(mut self, words: &[&str], da: Span, fr: Span, ar: Span) -> Self {
        for (i, w) in words.iter().enumerate() {
            self.tokens.push(String::from(*w));
            for (row, span) in self.rows.iter_mut().zip([da, fr, ar]) {
                row.push(match span {
                    Span::Begin(l) if i == 0 => format!("B-{l}"),
                    Span::Begin(l) | Span::Cont(l) => format!("I-{l}"),
                    Span::Out => String::from("O"),
                });
            }
        }
        self
    }

    fn build(self, id: String) -> AnnotatedSentence {
        let [da, fr, ar] = self.rows;
        AnnotatedSentence::new(id, self.tokens, da, fr, ar).expect("templates produce valid IOB2")
    }
}

fn the(place: &[&'static str]) -> Vec<&'static str> {
    let mut v = alloc::vec!["the"];
    v.extend_from_slice(place);
    v
}

fn to_the(place: &[&'static str]) -> Vec<&'static str> {
    let mut v = alloc::vec!["to"];
    v.extend(the(place));
    v
}

fn find(thing: &[&str]) -> Builder {
    Builder::default()
        .push(&["where", "can"], B("Req_info"), B("Locating"), O)
        .push(&["i"], C("Req_info"), C("Locating"), B("Cognizer"))
        .push(&["find"], C("Req_info"), C("Locating"), B("Lexical_unit"))
        .push(thing, C("Req_info"), C("Locating"), B("Entity"))
        .push(&["?"], O, O, O)
}

fn want(b: Builder, object: &[&str]) -> Builder {
    b.push(&["i"], B("Inform"), B("Desiring"), B("Cognizer"))
        .push(&["want"], C("Inform"), C("Desiring"), B("Lexical_unit"))
        .push(object, C("Inform"), C("Desiring"), B("Theme"))
}

fn bring(b: Builder, object: &[&str]) -> Builder {
    b.push(&["bring"], B("Instruction"), B("Bringing"), B("Lexical_unit"))
        .push(&["me"], C("Instruction"), C("Bringing"), B("Goal"))
        .push(object, C("Instruction"), C("Bringing"), B("Theme"))
}

fn go(place: &[&'static str]) -> Builder {
    Builder::default()
        .push(&["go"], B("Instruction"), B("Motion"), B("Lexical_unit"))
        .push(&to_the(place), C("Instruction"), C("Motion"), B("Goal"))
}

fn hello() -> Builder {
    Builder::default().push(&["hello"], B("Opening"), B("Greeting"), O)
}

fn all_templates() -> Vec<Builder> {
    let mut out = Vec::new();
    for p in PLACES {
        out.push(find(p));
        out.push(go(p));
        out.push(
            hello()
                .push(&["where"], B("Req_info"), B("Being_located"), O)
                .push(&["is"], C("Req_info"), C("Being_located"), B("Lexical_unit"))
                .push(&the(p), C("Req_info"), C("Being_located"), B("Entity")),
        );
        for d in DIRECTIONS {
            out.push(
                Builder::default()
                    .push(&["turn"], B("Instruction"), B("Motion"), B("Lexical_unit"))
                    .push(&[d], C("Instruction"), C("Motion"), B("Direction"))
                    .push(&["and"], C("Instruction"), O, O)
                    .push(&["go"], C("Instruction"), B("Motion"), B("Lexical_unit"))
                    .push(&to_the(p), C("Instruction"), C("Motion"), B("Goal")),
            );
        }
        for m in MANNERS {
            out.push(go(p).push(&[m], C("Instruction"), C("Motion"), B("Manner")));
        }
    }
    for o in OBJECTS {
        out.push(find(o));
        out.push(want(Builder::default(), o));
        out.push(want(hello(), o));
        out.push(bring(hello(), o));
        out.push(bring(Builder::default(), o));
        for t in TIMES {
            out.push(bring(Builder::default(), o).push(&[t], C("Instruction"), C("Bringing"), B("Time")));
        }
    }
    for d in DIRECTIONS {
        for m in MANNERS {
            out.push(
                Builder::default()
                    .push(&["turn"], B("Instruction"), B("Motion"), B("Lexical_unit"))
                    .push(&[d], C("Instruction"), C("Motion"), B("Direction"))
                    .push(&[m], C("Instruction"), C("Motion"), B("Manner")),
            );
        }
    }
    out
}

/// `count` distinct templated sentences (capped at the template total),
/// selected and ordered by `seed`, with ids `toy-01`, `toy-02`, ...
pub fn generate(count: usize, seed: u64) -> Vec<AnnotatedSentence> {
    let mut all = all_templates();
    all.shuffle(&mut seeded(seed));
    all.truncate(count);
    all.into_iter()
        .enumerate()
        .map(|(i, b)| b.build(format!("toy-{:02}", i + 1)))
        .collect()
}

/// The fixed 64-sentence toy corpus.
pub fn toy_corpus() -> Vec<AnnotatedSentence> {
    generate(TOY_SIZE, TOY_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_chunks, Task};
    use alloc::collections::BTreeSet;

    #[test]
    fn toy_corpus_shape() {
        let corpus = toy_corpus();
        assert_eq!(corpus.len(), TOY_SIZE);
        assert!(all_templates().len() >= TOY_SIZE);
        let distinct: BTreeSet<&Vec<String>> = corpus.iter().map(|s| &s.tokens).collect();
        assert_eq!(distinct.len(), TOY_SIZE);
        let vocab: BTreeSet<&str> = corpus.iter().flat_map(|s| s.tokens.iter().map(String::as_str)).collect();
        assert!(vocab.len() <= 40);
        assert!(corpus.iter().all(|s| s.len() <= 10));
        for (task, expected) in [(Task::Da, 4), (Task::Fr, 6), (Task::Ar, 8)] {
            let labels: BTreeSet<String> = corpus
                .iter()
                .flat_map(|s| extract_chunks(s.tags(task)).unwrap())
                .map(|c| c.label)
                .collect();
            assert_eq!(labels.len(), expected, "{task:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(toy_corpus(), toy_corpus());
        assert_ne!(generate(10, 1), generate(10, 2));
    }
}
