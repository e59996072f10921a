//! Metrics: intent and overlap-based entity P/R/F1, their combination, exact
//! span F1, exact match, fold aggregation and the signed-rank test.

mod aggregate;
mod counts;
mod report;
mod wilcoxon;

pub use aggregate::{aggregate, Aggregate};
pub use counts::{
    combined_counts, combined_em, entity_counts, exact_chunk_counts, exact_match, intent_counts, intent_label,
    span_counts, span_f1, ConfusionCounts, Prf,
};
pub use report::{aggregate_folds, render_records, AggregateRow, DevMetric, Metric, MetricsReport, TaskReport};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult, EXACT_LIMIT};
