//! Validated domain model shared by the ingest, cost, stats and report layers.
//!
//! Units are fixed at the boundary: latency is milliseconds per image, money
//! is US dollars, and output-quality metrics are fractions in `[0, 1]`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used by every validator when comparing reals to a bound.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{field}: latency must be positive, got {value}")]
    NonPositiveLatency { field: &'static str, value: f64 },
    #[error("{field}: metric must lie in [0, 1], got {value}")]
    MetricOutOfRange { field: &'static str, value: f64 },
    #[error("precision: unknown value {0:?} (expected fp32 or fp16)")]
    UnknownPrecision(String),
    #[error("os: unknown value {0:?} (expected linux or windows)")]
    UnknownOs(String),
    #[error("{field}: unknown value {value:?}")]
    UnknownVariant { field: &'static str, value: String },
    #[error("{field}: identifier {value:?} must be non-empty and use only [A-Za-z0-9_-]")]
    InvalidIdentifier { field: &'static str, value: String },
    #[error("samples: must be a positive integer, got {0}")]
    NonPositiveSamples(i64),
    #[error("{field}: value must be finite")]
    NonFinite { field: &'static str },
    #[error("duplicate record key ({0})")]
    DuplicateKey(String),
    #[error("max_latency_ms: bound must be positive, got {0}")]
    NegativeLatencyBound(f64),
    #[error("allowed_precisions: at least one precision is required")]
    EmptyPrecisionSet,
    #[error("usd_per_hour: rate must be non-negative and finite, got {0}")]
    NegativeRate(f64),
    #[error("input_shape: dimensions must be positive and non-empty")]
    InvalidShape,
    #[error("workload {id}: task {task} cannot be scored with {metric}")]
    TaskMetricMismatch {
        id: String,
        task: Task,
        metric: MetricName,
    },
    #[error("hardware {0}: supported precisions must be non-empty")]
    NoSupportedPrecision(String),
    #[error("hardware catalog: duplicate id {0}")]
    DuplicateHardware(String),
}

/// Identifiers travel through CSV unquoted, so they are restricted to `[A-Za-z0-9_-]`.
pub fn check_identifier(field: &'static str, value: &str) -> Result<(), ValidationError> {
    let ok = !value.is_empty()
        && value
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(ValidationError::InvalidIdentifier {
            field,
            value: value.to_string(),
        })
    }
}

fn check_finite(field: &'static str, value: f64) -> Result<(), ValidationError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::NonFinite { field })
    }
}

/// Accepts `value` within tolerance of `[0, 1]` and clamps it into the interval.
fn unit_fraction(field: &'static str, value: f64) -> Result<f64, ValidationError> {
    check_finite(field, value)?;
    if value < -VALIDATION_TOLERANCE || value > 1.0 + VALIDATION_TOLERANCE {
        return Err(ValidationError::MetricOutOfRange { field, value });
    }
    Ok(value.clamp(0.0, 1.0))
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum!(
    /// Numeric precision the model was executed in. `Fp32` orders before `Fp16`,
    /// which is the tie-break order used by the selector.
    Precision, "precision" { Fp32 => "fp32", Fp16 => "fp16" }
);
string_enum!(Os, "os" { Linux => "linux", Windows => "windows" });
string_enum!(HardwareKind, "kind" { Cpu => "cpu", Gpu => "gpu" });
string_enum!(Task, "task" { Classification => "classification", Segmentation => "segmentation" });
string_enum!(MetricName, "metric" { Accuracy => "accuracy", Dice => "dice" });

impl FromStr for Precision {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fp32" => Ok(Precision::Fp32),
            "fp16" => Ok(Precision::Fp16),
            _ => Err(ValidationError::UnknownPrecision(s.to_string())),
        }
    }
}

impl FromStr for Os {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linux" => Ok(Os::Linux),
            "windows" => Ok(Os::Windows),
            _ => Err(ValidationError::UnknownOs(s.to_string())),
        }
    }
}

impl FromStr for HardwareKind {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HardwareKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ValidationError::UnknownVariant {
                field: "kind",
                value: s.to_string(),
            })
    }
}

impl Task {
    /// The only metric a task may be scored with.
    pub fn metric(self) -> MetricName {
        match self {
            Task::Classification => MetricName::Accuracy,
            Task::Segmentation => MetricName::Dice,
        }
    }
}

/// A hardware platform that can host inference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub id: String,
    pub display_name: String,
    pub kind: HardwareKind,
    pub supported_precisions: BTreeSet<Precision>,
}

impl HardwareConfig {
    pub fn new(
        id: &str,
        display_name: &str,
        kind: HardwareKind,
        supported_precisions: impl IntoIterator<Item = Precision>,
    ) -> Result<Self, ValidationError> {
        check_identifier("id", id)?;
        let supported_precisions: BTreeSet<_> = supported_precisions.into_iter().collect();
        if supported_precisions.is_empty() {
            return Err(ValidationError::NoSupportedPrecision(id.to_string()));
        }
        Ok(HardwareConfig {
            id: id.to_string(),
            display_name: display_name.to_string(),
            kind,
            supported_precisions,
        })
    }
}

/// A set of hardware configurations with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HardwareCatalog {
    configs: Vec<HardwareConfig>,
}

impl HardwareCatalog {
    pub fn new(configs: Vec<HardwareConfig>) -> Result<Self, ValidationError> {
        let mut seen = HashSet::new();
        for config in &configs {
            if !seen.insert(config.id.as_str()) {
                return Err(ValidationError::DuplicateHardware(config.id.clone()));
            }
        }
        Ok(HardwareCatalog { configs })
    }

    pub fn get(&self, id: &str) -> Option<&HardwareConfig> {
        self.configs.iter().find(|c| c.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HardwareConfig> {
        self.configs.iter()
    }
}

/// A model plus the input it is benchmarked on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub id: String,
    pub task: Task,
    pub metric_name: MetricName,
    pub input_shape: Vec<u32>,
}

impl WorkloadSpec {
    pub fn new(
        id: &str,
        task: Task,
        metric_name: MetricName,
        input_shape: Vec<u32>,
    ) -> Result<Self, ValidationError> {
        check_identifier("id", id)?;
        if task.metric() != metric_name {
            return Err(ValidationError::TaskMetricMismatch {
                id: id.to_string(),
                task,
                metric: metric_name,
            });
        }
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(ValidationError::InvalidShape);
        }
        Ok(WorkloadSpec {
            id: id.to_string(),
            task,
            metric_name,
            input_shape,
        })
    }
}

/// An hourly hardware price in USD.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MoneyRate(f64);

impl MoneyRate {
    pub fn new(usd_per_hour: f64) -> Result<Self, ValidationError> {
        if !usd_per_hour.is_finite() || usd_per_hour < 0.0 {
            return Err(ValidationError::NegativeRate(usd_per_hour));
        }
        Ok(MoneyRate(usd_per_hour))
    }

    pub fn usd_per_hour(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MoneyRate {
    type Error = ValidationError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        MoneyRate::new(value)
    }
}

impl From<MoneyRate> for f64 {
    fn from(rate: MoneyRate) -> f64 {
        rate.0
    }
}

/// An unvalidated benchmark row, as read from an external source.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub workload_id: String,
    pub config_id: String,
    pub precision: String,
    pub os: String,
    pub latency_ms_per_img: f64,
    pub metric_score: f64,
    pub samples: i64,
}

/// Identity of a measured cell; unique within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub workload_id: String,
    pub config_id: String,
    pub precision: Precision,
    pub os: Os,
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}, {}",
            self.workload_id, self.config_id, self.precision, self.os
        )
    }
}

/// One measured (workload, hardware, precision, OS) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    workload_id: String,
    config_id: String,
    precision: Precision,
    os: Os,
    latency_ms_per_img: f64,
    metric_score: f64,
    samples: u64,
}

impl BenchmarkRecord {
    pub fn workload_id(&self) -> &str {
        &self.workload_id
    }

    pub fn config_id(&self) -> &str {
        &self.config_id
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn os(&self) -> Os {
        self.os
    }

    pub fn latency_ms_per_img(&self) -> f64 {
        self.latency_ms_per_img
    }

    pub fn metric_score(&self) -> f64 {
        self.metric_score
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            workload_id: self.workload_id.clone(),
            config_id: self.config_id.clone(),
            precision: self.precision,
            os: self.os,
        }
    }

    /// Converts back to the raw form, e.g. for serialization.
    pub fn to_raw(&self) -> RawRecord {
        RawRecord {
            workload_id: self.workload_id.clone(),
            config_id: self.config_id.clone(),
            precision: self.precision.to_string(),
            os: self.os.to_string(),
            latency_ms_per_img: self.latency_ms_per_img,
            metric_score: self.metric_score,
            samples: self.samples as i64,
        }
    }
}

/// Checks every per-record invariant. Key uniqueness is a dataset property,
/// see [`validate_records`].
pub fn validate_record(raw: &RawRecord) -> Result<BenchmarkRecord, ValidationError> {
    check_identifier("workload", &raw.workload_id)?;
    check_identifier("config", &raw.config_id)?;
    let precision: Precision = raw.precision.parse()?;
    let os: Os = raw.os.parse()?;
    check_finite("latency_ms_per_img", raw.latency_ms_per_img)?;
    if raw.latency_ms_per_img <= VALIDATION_TOLERANCE {
        return Err(ValidationError::NonPositiveLatency {
            field: "latency_ms_per_img",
            value: raw.latency_ms_per_img,
        });
    }
    let metric_score = unit_fraction("metric", raw.metric_score)?;
    if raw.samples <= 0 {
        return Err(ValidationError::NonPositiveSamples(raw.samples));
    }
    Ok(BenchmarkRecord {
        workload_id: raw.workload_id.clone(),
        config_id: raw.config_id.clone(),
        precision,
        os,
        latency_ms_per_img: raw.latency_ms_per_img,
        metric_score,
        samples: raw.samples as u64,
    })
}

/// Validates a dataset, additionally rejecting repeated
/// (workload, config, precision, os) keys.
pub fn validate_records<'a>(
    raws: impl IntoIterator<Item = &'a RawRecord>,
) -> Result<Vec<BenchmarkRecord>, ValidationError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for raw in raws {
        let record = validate_record(raw)?;
        check_unique(&mut seen, &record)?;
        out.push(record);
    }
    Ok(out)
}

pub(crate) fn check_unique(
    seen: &mut HashSet<RecordKey>,
    record: &BenchmarkRecord,
) -> Result<(), ValidationError> {
    let key = record.key();
    if seen.contains(&key) {
        return Err(ValidationError::DuplicateKey(key.to_string()));
    }
    seen.insert(key);
    Ok(())
}

/// Unvalidated user constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConstraints {
    pub max_latency_ms: Option<f64>,
    pub min_metric: Option<f64>,
    pub allowed_precisions: Vec<Precision>,
    pub os_filter: Option<Os>,
}

/// User bounds on acceptable configurations. Absent bounds are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    max_latency_ms: Option<f64>,
    min_metric: Option<f64>,
    allowed_precisions: BTreeSet<Precision>,
    os_filter: Option<Os>,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet::unconstrained()
    }
}

impl ConstraintSet {
    /// No latency or metric bound, every precision and OS allowed.
    pub fn unconstrained() -> Self {
        ConstraintSet {
            max_latency_ms: None,
            min_metric: None,
            allowed_precisions: Precision::ALL.iter().copied().collect(),
            os_filter: None,
        }
    }

    pub fn max_latency_ms(&self) -> Option<f64> {
        self.max_latency_ms
    }

    pub fn min_metric(&self) -> Option<f64> {
        self.min_metric
    }

    pub fn allowed_precisions(&self) -> &BTreeSet<Precision> {
        &self.allowed_precisions
    }

    pub fn os_filter(&self) -> Option<Os> {
        self.os_filter
    }

    pub fn allows(&self, precision: Precision) -> bool {
        self.allowed_precisions.contains(&precision)
    }

    /// Same constraints with the latency bound replaced.
    pub fn with_max_latency(&self, max_latency_ms: Option<f64>) -> Result<Self, ValidationError> {
        validate_constraints(&RawConstraints {
            max_latency_ms,
            min_metric: self.min_metric,
            allowed_precisions: self.allowed_precisions.iter().copied().collect(),
            os_filter: self.os_filter,
        })
    }

    /// The constraints with the latency bound dropped; the base for a sweep.
    pub fn without_latency_bound(&self) -> Self {
        ConstraintSet {
            max_latency_ms: None,
            ..self.clone()
        }
    }
}

pub fn validate_constraints(raw: &RawConstraints) -> Result<ConstraintSet, ValidationError> {
    if let Some(bound) = raw.max_latency_ms {
        check_finite("max_latency_ms", bound)?;
        if bound <= 0.0 {
            return Err(ValidationError::NegativeLatencyBound(bound));
        }
    }
    let min_metric = raw
        .min_metric
        .map(|m| unit_fraction("min_metric", m))
        .transpose()?;
    if raw.allowed_precisions.is_empty() {
        return Err(ValidationError::EmptyPrecisionSet);
    }
    Ok(ConstraintSet {
        max_latency_ms: raw.max_latency_ms,
        min_metric,
        allowed_precisions: raw.allowed_precisions.iter().copied().collect(),
        os_filter: raw.os_filter,
    })
}
