use alloc::string::String;
use alloc::vec::Vec;
use core::iter::Sum;
use core::ops::{Add, AddAssign};

use crate::corpus::{extract_chunks_lenient, Chunk};
use crate::error::{Error, Result};

/// Micro-averaged confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: u64,
}

/// Precision, recall and F1; each is 0 when its denominator is 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionCounts {
    pub const fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_ }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), Add::add)
    }
}

/// One label per utterance: a match is a TP, a mismatch one FP and one FN.
pub fn intent_counts<S: AsRef<str>>(gold: &[S], predicted: &[S]) -> Result<ConfusionCounts> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: predicted.len(),
        });
    }
    let tp = gold.iter().zip(predicted).filter(|(g, p)| g.as_ref() == p.as_ref()).count() as u64;
    let wrong = gold.len() as u64 - tp;
    Ok(ConfusionCounts::new(tp, wrong, wrong))
}

/// Overlap matching within one sentence. Gold chunks are visited in order;
/// each takes the first unmatched predicted chunk with the same label that
/// shares at least one token.
pub fn entity_counts(gold: &[Chunk], predicted: &[Chunk]) -> ConfusionCounts {
    let mut used = alloc::vec![false; predicted.len()];
    let mut tp = 0;
    for g in gold {
        if let Some(j) = (0..predicted.len()).find(|&j| !used[j] && predicted[j].label == g.label && predicted[j].overlaps(g)) {
            used[j] = true;
            tp += 1;
        }
    }
    ConfusionCounts::new(tp, predicted.len() as u64 - tp, gold.len() as u64 - tp)
}

/// Exact `(start, end, label)` matches within one sentence.
pub fn exact_chunk_counts(gold: &[Chunk], predicted: &[Chunk]) -> ConfusionCounts {
    let tp = predicted.iter().filter(|p| gold.contains(p)).count() as u64;
    ConfusionCounts::new(tp, predicted.len() as u64 - tp, gold.len() as u64 - tp)
}

/// Field-wise sum of intent and entity counts.
pub fn combined_counts(intent: ConfusionCounts, entity: ConfusionCounts) -> ConfusionCounts {
    intent + entity
}

/// Corpus-level span scoring of aligned tag rows. Rows are read with the
/// lenient chunk reader, so stray `I-X` tags open chunks.
pub fn span_counts<S: AsRef<str>>(gold: &[Vec<S>], predicted: &[Vec<S>]) -> Result<ConfusionCounts> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: predicted.len(),
        });
    }
    let mut total = ConfusionCounts::default();
    for (g, p) in gold.iter().zip(predicted) {
        if g.len() != p.len() {
            return Err(Error::LengthMismatch {
                left: g.len(),
                right: p.len(),
            });
        }
        total += exact_chunk_counts(&extract_chunks_lenient(g), &extract_chunks_lenient(p));
    }
    Ok(total)
}

pub fn span_f1<S: AsRef<str>>(gold: &[Vec<S>], predicted: &[Vec<S>]) -> Result<Prf> {
    Ok(span_counts(gold, predicted)?.prf())
}

/// Fraction of rows predicted exactly; 0 for an empty corpus.
pub fn exact_match<S: AsRef<str>>(gold: &[Vec<S>], predicted: &[Vec<S>]) -> Result<f64> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: predicted.len(),
        });
    }
    let hits = gold.iter().zip(predicted).filter(|(g, p)| same_row(g, p)).count();
    Ok(ratio(hits as u64, gold.len() as u64))
}

/// Fraction of sentences whose three rows are all exact.
pub fn combined_em<S: AsRef<str>>(gold: [&[Vec<S>]; 3], predicted: [&[Vec<S>]; 3]) -> Result<f64> {
    let n = gold[0].len();
    for rows in gold.iter().chain(&predicted) {
        if rows.len() != n {
            return Err(Error::LengthMismatch { left: n, right: rows.len() });
        }
    }
    let hits = (0..n)
        .filter(|&i| (0..3).all(|t| same_row(&gold[t][i], &predicted[t][i])))
        .count();
    Ok(ratio(hits as u64, n as u64))
}

fn same_row<S: AsRef<str>>(a: &[S], b: &[S]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.as_ref() == y.as_ref())
}

/// Utterance-level intent of a sentence: its DA chunk labels and its FR
/// chunk labels, each joined with `+`, then joined with `_`. For a sentence
/// with one scenario-wide DA and one action-wide FR this is
/// `scenario_action`.
pub fn intent_label<S: AsRef<str>>(da: &[S], fr: &[S]) -> String {
    let join = |tags: &[S]| {
        let labels: Vec<String> = extract_chunks_lenient(tags).into_iter().map(|c| c.label).collect();
        if labels.is_empty() {
            String::from("O")
        } else {
            labels.join("+")
        }
    };
    let mut out = join(da);
    out.push('_');
    out.push_str(&join(fr));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::strings;
    use alloc::format;
    use proptest::prelude::*;

    #[test]
    fn intent_examples() {
        let g = ["a", "b", "c", "d", "e"];
        let c = intent_counts(&g, &g).unwrap();
        assert_eq!(c, ConfusionCounts::new(5, 0, 0));
        assert_eq!(c.prf(), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        let wrong = intent_counts(&g, &["x"; 5]).unwrap();
        assert_eq!((wrong.tp, wrong.f1()), (0, 0.0));
        let one_off = intent_counts(&["a", "b", "a", "c"], &["a", "b", "b", "c"]).unwrap();
        assert_eq!(one_off, ConfusionCounts::new(3, 1, 1));
        assert_eq!((one_off.precision(), one_off.recall()), (0.75, 0.75));
        assert!(intent_counts(&["a"], &[]).is_err());
    }

    #[test]
    fn entity_examples() {
        let date = |s, e| Chunk::new(s, e, "date");
        assert_eq!(entity_counts(&[date(2, 5)], &[date(3, 6)]), ConfusionCounts::new(1, 0, 0));
        assert_eq!(
            entity_counts(&[date(2, 5)], &[Chunk::new(2, 5, "time")]),
            ConfusionCounts::new(0, 1, 1)
        );
        let x = |s, e| Chunk::new(s, e, "X");
        let gold = [x(0, 2), x(3, 5)];
        let pred = [x(0, 1), x(1, 4), x(4, 5)];
        assert_eq!(entity_counts(&gold, &pred), ConfusionCounts::new(2, 1, 0));
        assert_eq!(max_matching(&gold, &pred), 2);
        // exact spans are stricter
        assert_eq!(exact_chunk_counts(&[x(0, 2)], &[x(0, 1)]).tp, 0);
    }

    #[test]
    fn combined_examples() {
        let c = combined_counts(ConfusionCounts::new(2, 1, 1), ConfusionCounts::new(3, 0, 2));
        assert_eq!(c, ConfusionCounts::new(5, 1, 3));
        assert_eq!(c.precision(), 5.0 / 6.0);
        assert_eq!(c.recall(), 5.0 / 8.0);
        let i = ConfusionCounts::new(2, 1, 1);
        let e = ConfusionCounts::new(3, 0, 2);
        assert!((c.f1() - (i.f1() + e.f1()) / 2.0).abs() > 1e-3);
        assert_eq!(combined_counts(i, ConfusionCounts::default()), i);
    }

    #[test]
    fn exact_match_examples() {
        let g = alloc::vec![strings(&["B-A", "I-A"]), strings(&["O"])];
        let p = alloc::vec![strings(&["B-A", "O"]), strings(&["O"])];
        assert_eq!(exact_match(&g, &p).unwrap(), 0.5);
        assert_eq!(combined_em([&g, &g, &g], [&g, &g, &g]).unwrap(), 1.0);
        assert_eq!(combined_em([&g, &g, &g], [&g, &g, &p]).unwrap(), 0.5);
        assert_eq!(exact_match::<String>(&[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn intent_label_joins_levels() {
        let da = strings(&["B-calendar", "I-calendar"]);
        let fr = strings(&["B-set_event", "I-set_event"]);
        assert_eq!(intent_label(&da, &fr), "calendar_set_event");
        let da = strings(&["B-Opening", "B-Req_info"]);
        assert_eq!(intent_label(&da, &strings(&["O", "O"])), "Opening+Req_info_O");
    }

    /// Size of the largest one-to-one matching, by exhaustive search.
    fn max_matching(gold: &[Chunk], pred: &[Chunk]) -> u64 {
        fn go(gold: &[Chunk], pred: &[Chunk], used: &mut Vec<bool>) -> u64 {
            let Some((g, rest)) = gold.split_first() else { return 0 };
            let mut best = go(rest, pred, used);
            for j in 0..pred.len() {
                if !used[j] && pred[j].label == g.label && pred[j].overlaps(g) {
                    used[j] = true;
                    best = best.max(1 + go(rest, pred, used));
                    used[j] = false;
                }
            }
            best
        }
        go(gold, pred, &mut alloc::vec![false; pred.len()])
    }

    /// Token-level state machine in the manner of the conlleval script.
    fn conlleval(gold: &[Vec<String>], pred: &[Vec<String>]) -> (u64, u64, u64) {
        fn split(tag: &str) -> (char, &str) {
            if tag == "O" {
                ('O', "")
            } else {
                (tag.chars().next().unwrap(), &tag[2..])
            }
        }
        fn ends(prev: (char, &str), cur: (char, &str)) -> bool {
            let (p, pt) = prev;
            let (c, ct) = cur;
            (p == 'B' && c == 'B') || (p == 'B' && c == 'O') || (p == 'I' && c == 'B') || (p == 'I' && c == 'O')
                || (p != 'O' && pt != ct)
        }
        fn starts(prev: (char, &str), cur: (char, &str)) -> bool {
            let (p, pt) = prev;
            let (c, ct) = cur;
            (p == 'B' && c == 'B') || (p == 'I' && c == 'B') || (p == 'O' && c == 'B') || (p == 'O' && c == 'I')
                || (c != 'O' && pt != ct)
        }
        let (mut correct, mut found_guessed, mut found_correct) = (0, 0, 0);
        for (g, p) in gold.iter().zip(pred) {
            let mut in_correct = false;
            let (mut pg, mut pp) = (('O', ""), ('O', ""));
            for (gt, ptag) in g.iter().chain(core::iter::once(&String::from("O"))).zip(p.iter().chain(core::iter::once(&String::from("O")))) {
                let (cg, cp) = (split(gt), split(ptag));
                if in_correct {
                    let ge = ends(pg, cg);
                    let pe = ends(pp, cp);
                    if ge && pe && pg.1 == pp.1 {
                        in_correct = false;
                        correct += 1;
                    } else if ge != pe || cg.1 != cp.1 {
                        in_correct = false;
                    }
                }
                let gs = starts(pg, cg);
                let ps = starts(pp, cp);
                if gs && ps && cg.1 == cp.1 {
                    in_correct = true;
                }
                found_correct += u64::from(gs);
                found_guessed += u64::from(ps);
                pg = cg;
                pp = cp;
            }
        }
        (correct, found_guessed - correct, found_correct - correct)
    }

    #[test]
    fn span_counts_match_conlleval_procedure() {
        let gold = alloc::vec![
            strings(&["B-Req_info", "I-Req_info", "I-Req_info", "I-Req_info", "I-Req_info", "O"]),
            strings(&["B-Opening", "B-Instruction", "I-Instruction", "I-Instruction"]),
            strings(&["O", "B-Entity", "I-Entity", "O", "B-Goal"]),
        ];
        let pred = alloc::vec![
            strings(&["B-Req_info", "I-Req_info", "I-Req_info", "I-Req_info", "I-Req_info", "I-Req_info"]),
            strings(&["I-Opening", "B-Instruction", "I-Instruction", "I-Instruction"]),
            strings(&["O", "B-Entity", "O", "I-Goal", "I-Goal"]),
        ];
        let c = span_counts(&gold, &pred).unwrap();
        let (tp, fp, fn_) = conlleval(&gold, &pred);
        assert_eq!((c.tp, c.fp, c.fn_), (tp, fp, fn_));
        assert_eq!((tp, fp, fn_), (2, 3, 3));
        let f = span_f1(&gold, &pred).unwrap();
        assert_eq!(format!("{:.4}", f.f1), "0.4000");
    }

    proptest! {
        #[test]
        fn span_counts_agree_with_conlleval(rows in prop::collection::vec(
            prop::collection::vec((0usize..5, 0usize..5), 1..7), 1..5)
        ) {
            let tags = ["O", "B-A", "I-A", "B-B", "I-B"];
            let gold: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|(g, _)| String::from(tags[*g])).collect()).collect();
            let pred: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|(_, p)| String::from(tags[*p])).collect()).collect();
            let c = span_counts(&gold, &pred).unwrap();
            prop_assert_eq!((c.tp, c.fp, c.fn_), conlleval(&gold, &pred));
        }
    }

    fn chunks() -> impl Strategy<Value = Vec<Chunk>> {
        prop::collection::vec((0usize..8, 1usize..4, 0usize..2), 0..5).prop_map(|v| {
            v.into_iter()
                .map(|(s, l, lab)| Chunk::new(s, s + l, ["A", "B"][lab]))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn entity_count_invariants(gold in chunks(), pred in chunks()) {
            let c = entity_counts(&gold, &pred);
            prop_assert_eq!(c.tp + c.fn_, gold.len() as u64);
            prop_assert_eq!(c.tp + c.fp, pred.len() as u64);
            prop_assert!(c.tp <= max_matching(&gold, &pred));
        }

        #[test]
        fn counts_are_additive(a in (0u64..50, 0u64..50, 0u64..50), b in (0u64..50, 0u64..50, 0u64..50)) {
            let x = ConfusionCounts::new(a.0, a.1, a.2);
            let y = ConfusionCounts::new(b.0, b.1, b.2);
            let s = x + y;
            prop_assert_eq!(s, [x, y].into_iter().sum());
            for v in [s.precision(), s.recall(), s.f1()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
