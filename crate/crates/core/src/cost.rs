//! Inference cost model and cost-optimal configuration selection.
//!
//! Cost for `n` images is `latency_ms_per_img * n * usd_per_hour / 3.6e6`.
//! Selection minimizes cost over the records that satisfy a
//! [`ConstraintSet`]; ties are broken by lower latency, then config id, then
//! `fp32` before `fp16`, then OS.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::ingest::PricingTable;
use crate::types::{BenchmarkRecord, ConstraintSet, MoneyRate};

const MS_PER_HOUR: f64 = 3.6e6;
pub const MILLION: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("non-finite input to cost computation")]
    NonFiniteInput,
    #[error("no price for config {0:?}")]
    MissingPrice(String),
    #[error("no benchmark records supplied")]
    EmptyRecordSet,
    #[error("records mix workloads {0:?} and {1:?}; select one workload first")]
    MixedWorkloads(String, String),
    #[error("relative change against a zero baseline")]
    ZeroBaseline,
    #[error("relative change over an empty list")]
    EmptyList,
}

/// USD to process `n_images` at `latency_ms_per_img` on hardware billed at `rate`.
pub fn cost_per_images(
    latency_ms_per_img: f64,
    rate: MoneyRate,
    n_images: u64,
) -> Result<f64, CostError> {
    if !latency_ms_per_img.is_finite() || !rate.usd_per_hour().is_finite() {
        return Err(CostError::NonFiniteInput);
    }
    Ok(latency_ms_per_img * n_images as f64 * rate.usd_per_hour() / MS_PER_HOUR)
}

/// USD per million images.
pub fn cost_per_million(latency_ms_per_img: f64, rate: MoneyRate) -> Result<f64, CostError> {
    cost_per_images(latency_ms_per_img, rate, MILLION)
}

/// A record together with its price and cost per million images.
#[derive(Debug, Clone, PartialEq)]
pub struct CostedCandidate {
    pub record: BenchmarkRecord,
    pub rate: MoneyRate,
    pub cost_per_million_usd: f64,
}

impl CostedCandidate {
    pub fn new(record: BenchmarkRecord, rate: MoneyRate) -> Result<Self, CostError> {
        let cost_per_million_usd = cost_per_million(record.latency_ms_per_img(), rate)?;
        Ok(CostedCandidate {
            record,
            rate,
            cost_per_million_usd,
        })
    }

    pub fn latency_ms(&self) -> f64 {
        self.record.latency_ms_per_img()
    }

    /// The selector's total order: cost, latency, config id, precision, OS.
    pub fn preference(&self, other: &Self) -> Ordering {
        self.cost_per_million_usd
            .total_cmp(&other.cost_per_million_usd)
            .then(self.latency_ms().total_cmp(&other.latency_ms()))
            .then_with(|| self.record.config_id().cmp(other.record.config_id()))
            .then(self.record.precision().cmp(&other.record.precision()))
            .then(self.record.os().cmp(&other.record.os()))
    }
}

/// Attaches prices to every record. Fails on the first unpriced config.
pub fn price_records(
    records: &[BenchmarkRecord],
    pricing: &PricingTable,
) -> Result<Vec<CostedCandidate>, CostError> {
    records
        .iter()
        .map(|r| {
            let rate = pricing
                .get(r.config_id())
                .ok_or_else(|| CostError::MissingPrice(r.config_id().to_string()))?;
            CostedCandidate::new(r.clone(), rate)
        })
        .collect()
}

/// True iff the record meets every bound present in `constraints`. Latency
/// bounds are inclusive.
pub fn feasible(record: &BenchmarkRecord, constraints: &ConstraintSet) -> bool {
    passes_filters(record, constraints)
        && constraints
            .max_latency_ms()
            .is_none_or(|bound| record.latency_ms_per_img() <= bound)
}

/// Every constraint except the latency bound.
fn passes_filters(record: &BenchmarkRecord, constraints: &ConstraintSet) -> bool {
    constraints.allows(record.precision())
        && constraints
            .min_metric()
            .is_none_or(|floor| record.metric_score() >= floor)
        && constraints.os_filter().is_none_or(|os| record.os() == os)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfeasibleReason {
    /// Some records pass the metric/precision/OS filters, but none is fast enough.
    LatencyBound { min_latency_ms: f64 },
    /// No record passes the metric/precision/OS filters at any latency.
    NoCandidates,
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfeasibleReason::LatencyBound { min_latency_ms } => write!(
                f,
                "no configuration meets the latency bound; minimum achievable latency is {min_latency_ms:.2} ms/img"
            ),
            InfeasibleReason::NoCandidates => {
                f.write_str("no configuration satisfies the metric, precision and OS constraints")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Optimal(CostedCandidate),
    Infeasible(InfeasibleReason),
}

impl Decision {
    pub fn candidate(&self) -> Option<&CostedCandidate> {
        match self {
            Decision::Optimal(c) => Some(c),
            Decision::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Decision::Optimal(_))
    }
}

fn check_single_workload(records: &[BenchmarkRecord]) -> Result<(), CostError> {
    let first = records.first().ok_or(CostError::EmptyRecordSet)?;
    if let Some(other) = records
        .iter()
        .find(|r| r.workload_id() != first.workload_id())
    {
        return Err(CostError::MixedWorkloads(
            first.workload_id().to_string(),
            other.workload_id().to_string(),
        ));
    }
    Ok(())
}

/// Picks the cheapest feasible configuration for one workload.
///
/// Every record must be priced, including ones the constraints exclude.
pub fn select_optimal(
    records: &[BenchmarkRecord],
    pricing: &PricingTable,
    constraints: &ConstraintSet,
) -> Result<Decision, CostError> {
    check_single_workload(records)?;
    let candidates = price_records(records, pricing)?;
    let best = candidates
        .iter()
        .filter(|c| feasible(&c.record, constraints))
        .min_by(|a, b| a.preference(b));
    if let Some(best) = best {
        return Ok(Decision::Optimal(best.clone()));
    }
    let min_latency = candidates
        .iter()
        .filter(|c| passes_filters(&c.record, constraints))
        .map(CostedCandidate::latency_ms)
        .min_by(f64::total_cmp);
    Ok(Decision::Infeasible(match min_latency {
        Some(min_latency_ms) => InfeasibleReason::LatencyBound { min_latency_ms },
        None => InfeasibleReason::NoCandidates,
    }))
}

/// One step of the decision curve, covering latency limits in
/// `[t_min_ms, t_max_ms)`. The first segment starts at 0 and is open there.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSegment {
    pub t_min_ms: f64,
    pub t_max_ms: f64,
    pub decision: Decision,
}

impl CurveSegment {
    pub fn contains(&self, limit_ms: f64) -> bool {
        limit_ms >= self.t_min_ms && limit_ms < self.t_max_ms
    }

    pub fn cost_per_million_usd(&self) -> Option<f64> {
        self.decision.candidate().map(|c| c.cost_per_million_usd)
    }
}

/// Optimal decision as a step function of the latency limit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionCurve {
    pub workload_id: String,
    pub segments: Vec<CurveSegment>,
}

impl DecisionCurve {
    /// The decision for latency limit `limit_ms > 0`.
    pub fn decision_at(&self, limit_ms: f64) -> Option<&Decision> {
        if limit_ms <= 0.0 {
            return None;
        }
        self.segments
            .iter()
            .find(|s| s.contains(limit_ms))
            .map(|s| &s.decision)
    }

    /// Latencies where the decision changes.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.t_min_ms).collect()
    }
}

/// Sweeps the latency limit over `(0, inf)`.
///
/// The feasible set only grows at candidate latencies, so those are the only
/// breakpoints; between them the optimum is the best candidate seen so far in
/// latency order. Adjacent segments with the same decision are merged. Any
/// latency bound in `base` is ignored.
pub fn decision_curve(
    records: &[BenchmarkRecord],
    pricing: &PricingTable,
    base: &ConstraintSet,
) -> Result<DecisionCurve, CostError> {
    check_single_workload(records)?;
    let base = base.without_latency_bound();
    let mut candidates: Vec<CostedCandidate> = price_records(records, pricing)?
        .into_iter()
        .filter(|c| passes_filters(&c.record, &base))
        .collect();
    candidates.sort_by(|a, b| a.latency_ms().total_cmp(&b.latency_ms()));

    let mut segments: Vec<CurveSegment> = Vec::new();
    let mut push = |t_min_ms: f64, decision: Decision| {
        if let Some(last) = segments.last_mut() {
            if last.decision == decision {
                return;
            }
            last.t_max_ms = t_min_ms;
        }
        segments.push(CurveSegment {
            t_min_ms,
            t_max_ms: f64::INFINITY,
            decision,
        });
    };

    let Some(fastest) = candidates.first() else {
        push(0.0, Decision::Infeasible(InfeasibleReason::NoCandidates));
        return Ok(DecisionCurve {
            workload_id: records[0].workload_id().to_string(),
            segments,
        });
    };
    push(
        0.0,
        Decision::Infeasible(InfeasibleReason::LatencyBound {
            min_latency_ms: fastest.latency_ms(),
        }),
    );

    let mut best: Option<&CostedCandidate> = None;
    let mut i = 0;
    while i < candidates.len() {
        let breakpoint = candidates[i].latency_ms();
        // admit every candidate at this latency before emitting
        while i < candidates.len() && candidates[i].latency_ms() == breakpoint {
            let c = &candidates[i];
            if best.is_none_or(|b| c.preference(b) == Ordering::Less) {
                best = Some(c);
            }
            i += 1;
        }
        let chosen = best.expect("at least one candidate admitted");
        push(breakpoint, Decision::Optimal(chosen.clone()));
    }

    Ok(DecisionCurve {
        workload_id: records[0].workload_id().to_string(),
        segments,
    })
}

/// Candidates not dominated in (latency, cost), sorted by latency.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFrontier {
    pub candidates: Vec<CostedCandidate>,
}

impl ParetoFrontier {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.candidates
            .iter()
            .map(|c| (c.latency_ms(), c.cost_per_million_usd))
            .collect()
    }

    pub fn contains_point(&self, latency_ms: f64, cost: f64) -> bool {
        self.candidates
            .iter()
            .any(|c| c.latency_ms() == latency_ms && c.cost_per_million_usd == cost)
    }
}

/// Non-dominated set. Identical points collapse to the one the selector prefers.
pub fn pareto_frontier(
    records: &[BenchmarkRecord],
    pricing: &PricingTable,
) -> Result<ParetoFrontier, CostError> {
    let mut candidates = price_records(records, pricing)?;
    candidates.sort_by(|a, b| a.latency_ms().total_cmp(&b.latency_ms()).then(a.preference(b)));
    let mut frontier: Vec<CostedCandidate> = Vec::new();
    for candidate in candidates {
        let dominated = frontier
            .last()
            .is_some_and(|last| last.cost_per_million_usd <= candidate.cost_per_million_usd);
        if !dominated {
            frontier.push(candidate);
        }
    }
    Ok(ParetoFrontier {
        candidates: frontier,
    })
}

/// `(value - baseline) / baseline`.
pub fn relative_change(value: f64, baseline: f64) -> Result<f64, CostError> {
    if baseline == 0.0 {
        return Err(CostError::ZeroBaseline);
    }
    if !value.is_finite() || !baseline.is_finite() {
        return Err(CostError::NonFiniteInput);
    }
    Ok((value - baseline) / baseline)
}

/// Arithmetic mean of [`relative_change`] over `(value, baseline)` pairs.
pub fn mean_relative_change(pairs: &[(f64, f64)]) -> Result<f64, CostError> {
    if pairs.is_empty() {
        return Err(CostError::EmptyList);
    }
    let total = pairs
        .iter()
        .map(|&(v, b)| relative_change(v, b))
        .sum::<Result<f64, _>>()?;
    Ok(total / pairs.len() as f64)
}
