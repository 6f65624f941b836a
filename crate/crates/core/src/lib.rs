//! Cost-optimal inference hardware selection.
//!
//! Benchmark records (latency and output quality per workload, hardware,
//! precision and OS) are combined with averaged hourly prices to cost each
//! configuration, then filtered by user constraints to pick the cheapest
//! feasible one. The same machinery sweeps the latency limit to produce a
//! decision curve, computes the (latency, cost) Pareto frontier, tests paired
//! model outputs for equivalence, and runs timed benchmark trials.

pub mod cost;
pub mod harness;
pub mod ingest;
pub mod report;
pub mod stats;
pub mod types;

pub use cost::{
    cost_per_images, cost_per_million, decision_curve, feasible, mean_relative_change,
    pareto_frontier, relative_change, select_optimal, CostError, CostedCandidate, CurveSegment,
    Decision, DecisionCurve, InfeasibleReason, ParetoFrontier,
};
pub use harness::{
    make_synthetic, run_trial, HarnessError, InferenceBackend, SyntheticBackendSpec, TrialPlan,
};
pub use ingest::{
    average_pricing, parse_pairs_csv, parse_pricing_json, parse_records_csv, parse_timing_csv,
    IngestError, MeasurementSeries, PairedOutputs, PricingQuote, PricingTable,
};
pub use stats::{
    exact_signed_rank_tail, summarize, wilcoxon_signed_rank, LatencySummary, StatsError,
    WilcoxonMethod, WilcoxonResult,
};
pub use types::{
    validate_constraints, validate_record, BenchmarkRecord, ConstraintSet, HardwareConfig,
    MoneyRate, Os, Precision, RawConstraints, RawRecord, ValidationError, WorkloadSpec,
};
