use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::str::FromStr;

use super::aggregate::{aggregate, Aggregate};
use super::counts::{combined_counts, entity_counts, exact_chunk_counts, intent_label, ConfusionCounts};
use crate::corpus::{extract_chunks_lenient, AnnotatedSentence, Task};
use crate::error::{Error, Result};
use crate::model::TriPrediction;

/// Scores of one tagging level.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaskReport {
    /// Label-matching chunks sharing at least one token.
    pub overlap: ConfusionCounts,
    /// Chunks with identical boundaries and label.
    pub span: ConfusionCounts,
    pub exact_matches: u64,
}

/// The full metric battery over a corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub sentences: u64,
    pub tasks: [TaskReport; 3],
    pub intent: ConfusionCounts,
    pub entity: ConfusionCounts,
    pub combined_exact_matches: u64,
}

/// One `(task, metric, value)` entry of a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub task: &'static str,
    pub metric: &'static str,
    pub value: f64,
}

fn rate(hits: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

impl MetricsReport {
    /// Scores predictions aligned with `gold`. Predicted rows may be
    /// malformed IOB2; they are read leniently.
    pub fn compute(gold: &[AnnotatedSentence], predicted: &[TriPrediction]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: gold.len(),
                right: predicted.len(),
            });
        }
        let mut r = MetricsReport::default();
        for (g, p) in gold.iter().zip(predicted) {
            r.add(g, p)?;
        }
        Ok(r)
    }

    pub fn add(&mut self, gold: &AnnotatedSentence, predicted: &TriPrediction) -> Result<()> {
        for task in Task::ALL {
            if predicted.get(task).len() != gold.len() {
                return Err(Error::InvalidSentence {
                    id: gold.id.clone(),
                    reason: format!(
                        "{} prediction has {} tags for {} tokens",
                        task.name(),
                        predicted.get(task).len(),
                        gold.len()
                    ),
                });
            }
        }
        self.sentences += 1;
        let mut all_exact = true;
        for task in Task::ALL {
            let (g, p) = (gold.tags(task), predicted.get(task));
            let gc = extract_chunks_lenient(g);
            let pc = extract_chunks_lenient(p);
            let t = &mut self.tasks[task.index()];
            t.overlap += entity_counts(&gc, &pc);
            t.span += exact_chunk_counts(&gc, &pc);
            let exact = g == p;
            t.exact_matches += u64::from(exact);
            all_exact &= exact;
        }
        self.combined_exact_matches += u64::from(all_exact);
        let gi = intent_label(&gold.da_tags, &gold.fr_tags);
        let pi = intent_label(&predicted.da, &predicted.fr);
        self.intent += if gi == pi {
            ConfusionCounts::new(1, 0, 0)
        } else {
            ConfusionCounts::new(0, 1, 1)
        };
        self.entity = self.tasks[Task::Ar.index()].overlap;
        Ok(())
    }

    pub fn task(&self, task: Task) -> &TaskReport {
        &self.tasks[task.index()]
    }

    /// Intent and entity counts summed.
    pub fn combined(&self) -> ConfusionCounts {
        combined_counts(self.intent, self.entity)
    }

    /// Exact chunk counts pooled over the three levels.
    pub fn span_all(&self) -> ConfusionCounts {
        self.tasks.iter().map(|t| t.span).sum()
    }

    pub fn exact_match(&self, task: Task) -> f64 {
        rate(self.task(task).exact_matches, self.sentences)
    }

    pub fn combined_em(&self) -> f64 {
        rate(self.combined_exact_matches, self.sentences)
    }

    /// Every reported value as a fraction in `[0, 1]`, in a fixed order.
    pub fn metrics(&self) -> Vec<Metric> {
        let mut out = Vec::new();
        let mut prf = |task: &'static str, prefix: [&'static str; 3], c: ConfusionCounts| {
            for (metric, value) in prefix.into_iter().zip([c.precision(), c.recall(), c.f1()]) {
                out.push(Metric { task, metric, value });
            }
        };
        prf("intent", ["p", "r", "f1"], self.intent);
        prf("entity", ["p", "r", "f1"], self.entity);
        prf("combined", ["p", "r", "f1"], self.combined());
        for task in Task::ALL {
            let t = self.task(task);
            prf(task.name(), ["overlap_p", "overlap_r", "overlap_f1"], t.overlap);
            prf(task.name(), ["span_p", "span_r", "span_f1"], t.span);
        }
        prf("all", ["span_p", "span_r", "span_f1"], self.span_all());
        for task in Task::ALL {
            out.push(Metric {
                task: task.name(),
                metric: "em",
                value: self.exact_match(task),
            });
        }
        out.push(Metric {
            task: "all",
            metric: "combined_em",
            value: self.combined_em(),
        });
        out
    }

    /// Human-readable summary, values in percent.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sentences: {}", self.sentences);
        let _ = writeln!(s, "{:<10} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}", "", "tp", "fp", "fn", "P", "R", "F1");
        let mut row = |name: &str, c: ConfusionCounts| {
            let _ = writeln!(
                s,
                "{:<10} {:>6} {:>6} {:>6} {:>8.2} {:>8.2} {:>8.2}",
                name,
                c.tp,
                c.fp,
                c.fn_,
                100.0 * c.precision(),
                100.0 * c.recall(),
                100.0 * c.f1()
            );
        };
        row("intent", self.intent);
        row("entity", self.entity);
        row("combined", self.combined());
        for task in Task::ALL {
            row(&format!("{}-overlap", task.name()), self.task(task).overlap);
            row(&format!("{}-span", task.name()), self.task(task).span);
        }
        row("all-span", self.span_all());
        for task in Task::ALL {
            let _ = writeln!(s, "{} exact match: {:.2}", task.name(), 100.0 * self.exact_match(task));
        }
        let _ = writeln!(s, "combined exact match: {:.2}", 100.0 * self.combined_em());
        s
    }
}

/// Which report value model selection maximises.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DevMetric {
    #[default]
    CombinedF1,
    CombinedEm,
    IntentF1,
    EntityF1,
    SpanF1,
}

impl DevMetric {
    pub const ALL: [DevMetric; 5] = [
        DevMetric::CombinedF1,
        DevMetric::CombinedEm,
        DevMetric::IntentF1,
        DevMetric::EntityF1,
        DevMetric::SpanF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DevMetric::CombinedF1 => "combined-f1",
            DevMetric::CombinedEm => "combined-em",
            DevMetric::IntentF1 => "intent-f1",
            DevMetric::EntityF1 => "entity-f1",
            DevMetric::SpanF1 => "span-f1",
        }
    }

    pub fn value(self, r: &MetricsReport) -> f64 {
        match self {
            DevMetric::CombinedF1 => r.combined().f1(),
            DevMetric::CombinedEm => r.combined_em(),
            DevMetric::IntentF1 => r.intent.f1(),
            DevMetric::EntityF1 => r.entity.f1(),
            DevMetric::SpanF1 => r.span_all().f1(),
        }
    }
}

impl FromStr for DevMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DevMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown dev metric {s:?}")))
    }
}

/// Mean ± std of one metric over folds, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub task: &'static str,
    pub metric: &'static str,
    pub value: Aggregate,
}

/// Per-metric mean and population std across fold reports, in percent.
pub fn aggregate_folds(reports: &[MetricsReport]) -> Result<Vec<AggregateRow>> {
    let first = reports.first().ok_or(Error::Empty { op: "aggregate_folds" })?;
    let per_fold: Vec<Vec<Metric>> = reports.iter().map(MetricsReport::metrics).collect();
    first
        .metrics()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let values: Vec<f64> = per_fold.iter().map(|f| 100.0 * f[i].value).collect();
            Ok(AggregateRow {
                task: m.task,
                metric: m.metric,
                value: aggregate(&values)?,
            })
        })
        .collect()
}

/// Record lines `task\tmetric\tmean\tstd` with a header.
pub fn render_records(rows: &[AggregateRow]) -> String {
    let mut s = String::from("task\tmetric\tmean\tstd\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{:.2}\t{:.2}", r.task, r.metric, r.value.mean, r.value.std);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::strings;
    use crate::corpus::synthetic::toy_corpus;
    use crate::evaluation::counts::{combined_em, exact_match, span_counts};
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn gold_as_prediction(s: &AnnotatedSentence) -> TriPrediction {
        TriPrediction {
            da: s.da_tags.clone(),
            fr: s.fr_tags.clone(),
            ar: s.ar_tags.clone(),
        }
    }

    #[test]
    fn gold_against_itself_is_perfect() {
        let corpus = toy_corpus();
        let preds: Vec<_> = corpus.iter().map(gold_as_prediction).collect();
        let r = MetricsReport::compute(&corpus, &preds).unwrap();
        for m in r.metrics() {
            assert_eq!(m.value, 1.0, "{}/{}", m.task, m.metric);
        }
    }

    #[test]
    fn misaligned_sentence_is_named() {
        let corpus = toy_corpus();
        let mut p = gold_as_prediction(&corpus[0]);
        p.ar.pop();
        let err = MetricsReport::compute(&corpus[..1], &[p]).unwrap_err();
        assert!(matches!(err, Error::InvalidSentence { ref id, .. } if id == "toy-01"));
    }

    /// The span and EM values agree with the free-standing functions.
    #[test]
    fn report_agrees_with_direct_functions() {
        let corpus = toy_corpus();
        let preds: Vec<TriPrediction> = corpus
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut p = gold_as_prediction(s);
                if i % 3 == 0 {
                    p.ar[0] = String::from("I-Goal");
                }
                if i % 5 == 0 {
                    p.da[s.len() - 1] = String::from("B-Inform");
                }
                p
            })
            .collect();
        let r = MetricsReport::compute(&corpus, &preds).unwrap();
        for task in Task::ALL {
            let g: Vec<Vec<String>> = corpus.iter().map(|s| s.tags(task).to_vec()).collect();
            let p: Vec<Vec<String>> = preds.iter().map(|s| s.get(task).to_vec()).collect();
            assert_eq!(r.task(task).span, span_counts(&g, &p).unwrap());
            assert_eq!(r.exact_match(task), exact_match(&g, &p).unwrap());
        }
        let rows = |f: &dyn Fn(&AnnotatedSentence) -> Vec<String>| corpus.iter().map(f).collect::<Vec<_>>();
        let (gd, gf, ga) = (rows(&|s| s.da_tags.clone()), rows(&|s| s.fr_tags.clone()), rows(&|s| s.ar_tags.clone()));
        let pr = |t: Task| preds.iter().map(|p| p.get(t).to_vec()).collect::<Vec<_>>();
        let (pd, pf, pa) = (pr(Task::Da), pr(Task::Fr), pr(Task::Ar));
        let cem = combined_em([&gd, &gf, &ga], [&pd, &pf, &pa]).unwrap();
        assert_eq!(r.combined_em(), cem);
        for task in Task::ALL {
            assert!(r.combined_em() <= r.exact_match(task));
        }
    }

    #[test]
    fn aggregate_two_folds() {
        let corpus = toy_corpus();
        let perfect: Vec<_> = corpus[..4].iter().map(gold_as_prediction).collect();
        let a = MetricsReport::compute(&corpus[..4], &perfect).unwrap();
        let mut half = perfect.clone();
        for p in &mut half[..2] {
            p.fr[0] = String::from("O");
        }
        let b = MetricsReport::compute(&corpus[..4], &half).unwrap();
        let rows = aggregate_folds(&[a, b]).unwrap();
        let em = rows.iter().find(|r| r.metric == "combined_em").unwrap();
        assert_eq!(em.value.to_string(), "75.00 ± 25.00");
        let text = render_records(&rows);
        assert!(text.contains("all\tcombined_em\t75.00\t25.00\n"));
        assert!(aggregate_folds(&[]).is_err());
    }

    #[test]
    fn dev_metric_names() {
        for m in DevMetric::ALL {
            assert_eq!(m.name().parse::<DevMetric>().unwrap(), m);
        }
        assert_eq!(DevMetric::default(), DevMetric::CombinedF1);
    }

    fn perturbed(seed: u64) -> (Vec<AnnotatedSentence>, Vec<TriPrediction>) {
        use rand::Rng as _;
        let corpus: Vec<AnnotatedSentence> = toy_corpus().into_iter().take(12).collect();
        let mut rng = crate::rng::seeded(seed);
        let tags = ["O", "B-Goal", "I-Goal", "B-Theme", "I-Entity", "B-Motion", "I-Motion"];
        let preds = corpus
            .iter()
            .map(|s| {
                let mut p = gold_as_prediction(s);
                for row in [&mut p.da, &mut p.fr, &mut p.ar] {
                    for t in row.iter_mut() {
                        if rng.gen_bool(0.15) {
                            *t = String::from(tags[rng.gen_range(0..tags.len())]);
                        }
                    }
                }
                p
            })
            .collect();
        (corpus, preds)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn order_invariant_and_span_not_above_overlap(seed in any::<u64>(), rot in 0usize..12) {
            let (gold, pred) = perturbed(seed);
            let r = MetricsReport::compute(&gold, &pred).unwrap();
            let mut g2 = gold.clone();
            let mut p2 = pred.clone();
            g2.rotate_left(rot);
            p2.rotate_left(rot);
            prop_assert_eq!(&MetricsReport::compute(&g2, &p2).unwrap(), &r);
            for task in Task::ALL {
                let t = r.task(task);
                let valid = pred.iter().all(|p| crate::corpus::validate_iob2(p.get(task)).is_valid());
                if valid {
                    prop_assert!(t.span.tp <= t.overlap.tp);
                }
                prop_assert!(r.combined_em() <= r.exact_match(task));
            }
            for m in r.metrics() {
                prop_assert!((0.0..=1.0).contains(&m.value));
            }
        }
    }

    #[test]
    fn intent_uses_both_upper_levels() {
        let s = AnnotatedSentence::new(
            "u",
            strings(&["wake", "me"]),
            strings(&["B-alarm", "I-alarm"]),
            strings(&["B-set", "I-set"]),
            strings(&["O", "O"]),
        )
        .unwrap();
        let mut p = gold_as_prediction(&s);
        p.fr = strings(&["B-query", "I-query"]);
        let r = MetricsReport::compute(&[s], &[p]).unwrap();
        assert_eq!(r.intent, ConfusionCounts::new(0, 1, 1));
        assert_eq!(r.task(Task::Da).overlap, ConfusionCounts::new(1, 0, 0));
    }
}
