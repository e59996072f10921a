use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Samples up to this size (after dropping zero differences) get an exact p.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Pairs with a nonzero difference.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W+, W-)`; `None` when every difference is zero.
    pub statistic: Option<f64>,
    /// Normal-approximation z of the statistic, tie-corrected, without
    /// continuity correction.
    pub z: f64,
    pub p_normal: f64,
    pub p_exact: Option<f64>,
    /// Exact p when available, otherwise the normal approximation.
    pub p: f64,
}

/// Average ranks of `values` (ascending), 1-based.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided signed-rank test of `x` against `y`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Empty { op: "wilcoxon_signed_rank" });
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: None,
            z: 0.0,
            p_normal: 1.0,
            p_exact: Some(1.0),
            p: 1.0,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = if var > 0.0 { (w - mean) / math::sqrt(var) } else { 0.0 };
    let p_normal = (2.0 * math::normal_cdf(-z.abs())).min(1.0);
    let p_exact = (n <= EXACT_LIMIT).then(|| exact_p(&ranks, w));
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        statistic: Some(w),
        z,
        p_normal,
        p_exact,
        p: p_exact.unwrap_or(p_normal),
    })
}

/// `min(1, 2·P(T ≤ w))` under the sign-flip null, counting subsets of the
/// actual (possibly averaged) ranks. Doubled ranks are integers.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r) as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let limit = (2.0 * w + 1e-9) as usize;
    let below: f64 = counts[..=limit.min(max)].iter().sum();
    let all = math::exp(ranks.len() as f64 * core::f64::consts::LN_2);
    (2.0 * below / all).min(1.0)
}
