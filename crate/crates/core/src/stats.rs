//! Latency summaries and the paired Wilcoxon signed-rank test.

use std::fmt;

use thiserror::Error;

use crate::ingest::{MeasurementSeries, PairedOutputs};

/// Largest sample size for which the exact null distribution is enumerated.
pub const EXACT_MAX_N: usize = 25;

/// Absolute differences at or below this are treated as zero, and absolute
/// differences within this of each other share a rank.
pub const DIFF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series {label:?} has no samples after discarding {warmup} warmup iterations")]
    NoPostWarmupSamples { label: String, warmup: usize },
    #[error("paired test needs at least one pair")]
    EmptyPairs,
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("exact distribution supports n <= {EXACT_MAX_N}, got {0}")]
    NTooLarge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencySummary {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stddev_ms: f64,
    pub n_used: usize,
    pub n_discarded_warmup: usize,
}

/// Mean, median and sample standard deviation of the post-warmup samples.
///
/// Samples are sorted before summation, so the result is exactly invariant to
/// the order of post-warmup samples.
pub fn summarize(series: &MeasurementSeries) -> Result<LatencySummary, StatsError> {
    let mut samples = series.post_warmup().to_vec();
    if samples.is_empty() {
        return Err(StatsError::NoPostWarmupSamples {
            label: series.label().to_string(),
            warmup: series.warmup_count(),
        });
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    };
    let stddev = if n > 1 {
        let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(LatencySummary {
        mean_ms: mean,
        median_ms: median,
        stddev_ms: stddev,
        n_used: n,
        n_discarded_warmup: series.warmup_count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
    Degenerate,
}

impl fmt::Display for WilcoxonMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WilcoxonMethod::Exact => "exact",
            WilcoxonMethod::NormalApprox => "normal_approx",
            WilcoxonMethod::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences `a - b`.
    pub w_plus: f64,
    /// Pairs with a nonzero difference.
    pub n_effective: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: WilcoxonMethod,
    pub alpha: f64,
    pub reject_at_alpha: bool,
}

/// Number of sign assignments of ranks `1..=n` whose positive-rank sum is
/// `s`, for every `s` in `0..=n(n+1)/2`.
fn signed_rank_counts(n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for rank in 1..=n {
        let reach = rank * (rank + 1) / 2;
        for s in (rank..=reach).rev() {
            counts[s] += counts[s - rank];
        }
    }
    counts
}

/// `P(W+ >= w)` under the null for `n` untied ranks, from the exact
/// subset-sum distribution.
pub fn exact_signed_rank_tail(w: f64, n: usize) -> Result<f64, StatsError> {
    if n > EXACT_MAX_N {
        return Err(StatsError::NTooLarge(n));
    }
    let counts = signed_rank_counts(n);
    let start = w.max(0.0).ceil() as usize;
    let hits: u64 = counts.iter().skip(start).sum();
    Ok(hits as f64 / (1u64 << n) as f64)
}

fn standard_normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Ranks of `values` (1-based) with mid-ranks for ties, plus the tie group
/// sizes. Values within [`DIFF_TOLERANCE`] of a group's smallest member tie.
fn mid_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let anchor = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] - anchor <= DIFF_TOLERANCE {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        groups.push(end - start);
        start = end;
    }
    (ranks, groups)
}

/// Paired two-sided Wilcoxon signed-rank test of `a - b`.
///
/// Zero differences are discarded. With at most [`EXACT_MAX_N`] remaining
/// pairs and no tied magnitudes the p-value comes from the exact null
/// distribution; otherwise from the normal approximation with tie-corrected
/// variance and a 0.5 continuity correction.
pub fn wilcoxon_signed_rank(
    pairs: &PairedOutputs,
    alpha: f64,
) -> Result<WilcoxonResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if pairs.is_empty() {
        return Err(StatsError::EmptyPairs);
    }
    let diffs: Vec<f64> = pairs
        .side_a()
        .iter()
        .zip(pairs.side_b())
        .map(|(a, b)| a - b)
        .filter(|d| d.abs() > DIFF_TOLERANCE)
        .collect();
    let n = diffs.len();
    let finish = |w_plus: f64, p_value: f64, method| WilcoxonResult {
        w_plus,
        n_effective: n,
        p_value,
        method,
        alpha,
        reject_at_alpha: p_value < alpha,
    };
    if n == 0 {
        return Ok(finish(0.0, 1.0, WilcoxonMethod::Degenerate));
    }

    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, groups) = mid_ranks(&magnitudes);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let tied = groups.iter().any(|&g| g > 1);

    if n <= EXACT_MAX_N && !tied {
        let p = exact_p_value(w_plus, n)?;
        return Ok(finish(w_plus, p, WilcoxonMethod::Exact));
    }

    let mean = total / 2.0;
    let tie_term: f64 = groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let nf = n as f64;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let p = (2.0 * standard_normal_sf(z)).min(1.0);
    Ok(finish(w_plus, p, WilcoxonMethod::NormalApprox))
}

/// Normal-approximation p-value for an untied statistic; exposed so the
/// exact and approximate routes can be compared at the same `w`.
pub fn normal_approx_p_value(w_plus: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    (2.0 * standard_normal_sf(z)).min(1.0)
}

/// Exact two-sided p-value for an untied statistic.
pub fn exact_p_value(w_plus: f64, n: usize) -> Result<f64, StatsError> {
    let total = (n * (n + 1)) as f64 / 2.0;
    let upper = exact_signed_rank_tail(w_plus, n)?;
    // P(W+ <= w) = P(W+ >= total - w) by symmetry
    let lower = exact_signed_rank_tail(total - w_plus, n)?;
    Ok((2.0 * upper.min(lower)).min(1.0))
}
