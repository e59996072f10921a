//! Tab-separated metric files and the paired fold comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hermit_core::evaluation::{wilcoxon_signed_rank, MetricsReport, WilcoxonResult};
use hermit_core::training::{EpochRecord, FoldResult};

use crate::error::{AppError, Context, Result};

/// `task\tmetric\tvalue`, fractions printed with round-trip precision.
pub fn metrics_tsv(report: &MetricsReport) -> String {
    let mut s = String::from("task\tmetric\tvalue\n");
    for m in report.metrics() {
        let _ = writeln!(s, "{}\t{}\t{}", m.task, m.metric, m.value);
    }
    s
}

/// `fold\ttask\tmetric\tvalue` for every fold, folds numbered from 0.
pub fn folds_tsv(folds: &[FoldResult]) -> String {
    let mut s = String::from("fold\ttask\tmetric\tvalue\n");
    for f in folds {
        for m in f.report.metrics() {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", f.round, m.task, m.metric, m.value);
        }
    }
    s
}

pub fn history_jsonl(history: &[EpochRecord]) -> String {
    history
        .iter()
        .map(|r| serde_json::to_string(r).expect("history serializes") + "\n")
        .collect()
}

pub type FoldTable = BTreeMap<(String, String), BTreeMap<usize, f64>>;

/// Reads a `folds.tsv` file back into per-metric fold values.
pub fn parse_folds_tsv(text: &str) -> Result<FoldTable> {
    let mut table = FoldTable::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "fold\ttask\tmetric\tvalue")) => {}
        _ => return Err(AppError::Data("fold results must start with the header fold\\ttask\\tmetric\\tvalue".into())),
    }
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || AppError::Data(format!("fold results line {}: malformed record", i + 1));
        let [fold, task, metric, value] = line.split('\t').collect::<Vec<_>>()[..] else {
            return Err(bad());
        };
        let fold: usize = fold.parse().map_err(|_| bad())?;
        let value: f64 = value.parse().map_err(|_| bad())?;
        let prev = table.entry((task.to_string(), metric.to_string())).or_default().insert(fold, value);
        if prev.is_some() {
            return Err(AppError::Data(format!("fold results line {}: duplicate record", i + 1)));
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub task: String,
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: WilcoxonResult,
}

/// Pairs the two runs fold by fold and tests every metric they share.
pub fn compare(a: &FoldTable, b: &FoldTable) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for (key, fa) in a {
        let Some(fb) = b.get(key) else { continue };
        if fa.keys().ne(fb.keys()) {
            return Err(AppError::Data(format!("{} {}: the runs cover different folds", key.0, key.1)));
        }
        let x: Vec<f64> = fa.values().copied().collect();
        let y: Vec<f64> = fb.values().copied().collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        out.push(Comparison {
            task: key.0.clone(),
            metric: key.1.clone(),
            mean_a: mean(&x),
            mean_b: mean(&y),
            test: wilcoxon_signed_rank(&x, &y).context(|| format!("{} {}", key.0, key.1))?,
        });
    }
    if out.is_empty() {
        return Err(AppError::Data("the runs share no metrics".into()));
    }
    Ok(out)
}

pub fn comparison_tsv(rows: &[Comparison]) -> String {
    let mut s = String::from("task\tmetric\tn\tmean_a\tmean_b\tw_plus\tw_minus\tstatistic\tp\n");
    for r in rows {
        let stat = r.test.statistic.map_or("-".to_string(), |w| w.to_string());
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{:.6}",
            r.task, r.metric, r.test.n, r.mean_a, r.mean_b, r.test.w_plus, r.test.w_minus, stat, r.test.p
        );
    }
    s
}
