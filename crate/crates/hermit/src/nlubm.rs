//! Line-delimited JSON records of the NLU benchmark.

use hermit_core::corpus::{convert_nlubm, AnnotatedSentence, ConvertOptions, NluBmRecord};

use crate::error::{AppError, Context, Result};

/// One JSON object per non-blank line.
pub fn parse_records(text: &str) -> Result<Vec<NluBmRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| AppError::Data(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn convert_all(records: &[NluBmRecord], options: ConvertOptions) -> Result<Vec<AnnotatedSentence>> {
    records
        .iter()
        .map(|r| convert_nlubm(r, options).context(|| format!("record {}", r.id)))
        .collect()
}
