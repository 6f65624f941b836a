//! Timed benchmark trials against a pluggable inference backend.
//!
//! Each iteration draws a fresh pseudorandom input, then times only the
//! backend call with a monotonic clock. Input generation, hashing and any
//! buffering happen outside the timed region. Warmup iterations are recorded
//! like any other and only flagged in the resulting series.

use std::hash::{DefaultHasher, Hasher};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{IngestError, MeasurementSeries};

pub const DEFAULT_ITERATIONS: usize = 5000;
pub const DEFAULT_WARMUP: usize = 200;
/// One single-channel 160x160 image.
pub const DEFAULT_INPUT_BYTES: usize = 160 * 160;

/// Smallest latency recorded for a call, so a zero-cost backend still
/// produces a valid (positive) series.
const MIN_RECORDED_MS: f64 = 1e-6;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid trial plan: {0}")]
    InvalidPlan(String),
    #[error("backend {label:?} failed during setup: {source}")]
    SetupFailure {
        label: String,
        #[source]
        source: BackendError,
    },
    #[error("backend {label:?} failed at iteration {iteration}: {source}")]
    BackendFailure {
        label: String,
        iteration: usize,
        #[source]
        source: BackendError,
    },
    #[error("synthetic backend delays must be non-negative and finite, got {0}")]
    NegativeDelay(f64),
    #[error(
        "bad backend spec {0:?}; expected synthetic:const:<ms>, \
         synthetic:cold:<slow_ms>:<fast_ms>:<count> or synthetic:noisy:<mean_ms>:<jitter_ms>"
    )]
    SpecParse(String),
    #[error(transparent)]
    Series(#[from] IngestError),
}

/// Something that turns an opaque input buffer into an opaque output buffer.
///
/// Adapters for real accelerators implement this trait; only the `infer`
/// call is timed.
pub trait InferenceBackend {
    fn label(&self) -> &str;

    /// One-time preparation before the first timed call.
    fn setup(&mut self) -> Result<(), BackendError> {
        Ok(())
    }

    fn infer(&mut self, input: &[u8], output: &mut Vec<u8>) -> Result<(), BackendError>;
}

/// Produces the input for each iteration.
pub trait InputSource {
    fn fill(&mut self, buf: &mut [u8]);
}

/// Uniform random bytes from a seeded ChaCha stream.
#[derive(Debug, Clone)]
pub struct SeededInputs {
    rng: ChaCha8Rng,
}

impl SeededInputs {
    pub fn new(seed: u64) -> Self {
        SeededInputs {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl InputSource for SeededInputs {
    fn fill(&mut self, buf: &mut [u8]) {
        self.rng.fill_bytes(buf);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPlan {
    iterations: usize,
    warmup: usize,
    seed: u64,
    input_bytes: usize,
}

impl Default for TrialPlan {
    fn default() -> Self {
        TrialPlan {
            iterations: DEFAULT_ITERATIONS,
            warmup: DEFAULT_WARMUP,
            seed: 0,
            input_bytes: DEFAULT_INPUT_BYTES,
        }
    }
}

impl TrialPlan {
    pub fn new(iterations: usize, warmup: usize, seed: u64) -> Result<Self, HarnessError> {
        if iterations == 0 {
            return Err(HarnessError::InvalidPlan(
                "iterations must be positive".into(),
            ));
        }
        if warmup >= iterations {
            return Err(HarnessError::Series(IngestError::WarmupExceedsLength {
                warmup,
                len: iterations,
            }));
        }
        Ok(TrialPlan {
            iterations,
            warmup,
            seed,
            ..TrialPlan::default()
        })
    }

    pub fn with_input_bytes(mut self, input_bytes: usize) -> Self {
        self.input_bytes = input_bytes;
        self
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn warmup(&self) -> usize {
        self.warmup
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_bytes(&self) -> usize {
        self.input_bytes
    }
}

/// Everything a trial observed, beyond the latency series.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub series: MeasurementSeries,
    /// Hash over every generated input, in order.
    pub input_digest: u64,
    /// Wall time of the whole trial, including untimed work.
    pub total_wall: Duration,
}

/// Runs `plan` against `backend` with the plan's seeded input stream.
pub fn run_trial(
    backend: &mut dyn InferenceBackend,
    plan: &TrialPlan,
) -> Result<MeasurementSeries, HarnessError> {
    let mut inputs = SeededInputs::new(plan.seed());
    Ok(run_trial_with_source(backend, plan, &mut inputs)?.series)
}

/// Runs `plan` with a caller-supplied input source.
///
/// Iterations run sequentially on the calling thread.
pub fn run_trial_with_source(
    backend: &mut dyn InferenceBackend,
    plan: &TrialPlan,
    inputs: &mut dyn InputSource,
) -> Result<TrialOutcome, HarnessError> {
    let trial_start = Instant::now();
    let label = backend.label().to_string();
    backend.setup().map_err(|source| HarnessError::SetupFailure {
        label: label.clone(),
        source,
    })?;

    let mut input = vec![0u8; plan.input_bytes()];
    let mut output = Vec::new();
    let mut digest = DefaultHasher::new();
    let mut latencies = Vec::with_capacity(plan.iterations());
    for iteration in 0..plan.iterations() {
        inputs.fill(&mut input);
        digest.write(&input);
        output.clear();

        let start = Instant::now();
        let result = backend.infer(&input, &mut output);
        let elapsed = start.elapsed();

        result.map_err(|source| HarnessError::BackendFailure {
            label: label.clone(),
            iteration,
            source,
        })?;
        latencies.push((elapsed.as_secs_f64() * 1e3).max(MIN_RECORDED_MS));
    }

    let series = MeasurementSeries::new(latencies, plan.warmup(), label)?;
    Ok(TrialOutcome {
        series,
        input_digest: digest.finish(),
        total_wall: trial_start.elapsed(),
    })
}

/// Behaviour of a synthetic backend, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticBackendSpec {
    Constant { delay_ms: f64 },
    /// `slow_count` calls at `slow_ms`, then `fast_ms` forever.
    ColdStart {
        slow_ms: f64,
        fast_ms: f64,
        slow_count: u64,
    },
    /// `mean_ms` plus uniform jitter on `[-jitter_ms, +jitter_ms]`, floored at 0.
    Noisy { mean_ms: f64, jitter_ms: f64 },
}

impl SyntheticBackendSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let delays: &[f64] = match self {
            SyntheticBackendSpec::Constant { delay_ms } => &[*delay_ms],
            SyntheticBackendSpec::ColdStart {
                slow_ms, fast_ms, ..
            } => &[*slow_ms, *fast_ms],
            SyntheticBackendSpec::Noisy { mean_ms, jitter_ms } => &[*mean_ms, *jitter_ms],
        };
        match delays.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            Some(&bad) => Err(HarnessError::NegativeDelay(bad)),
            None => Ok(()),
        }
    }
}

impl FromStr for SyntheticBackendSpec {
    type Err = HarnessError;

    /// Parses `synthetic:const:<ms>`, `synthetic:cold:<slow>:<fast>:<count>`
    /// or `synthetic:noisy:<mean>:<jitter>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::SpecParse(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64, HarnessError> {
            parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(bad)
        };
        let spec = match parts.as_slice() {
            ["synthetic", "const", _] => SyntheticBackendSpec::Constant { delay_ms: num(2)? },
            ["synthetic", "cold", _, _, count] => SyntheticBackendSpec::ColdStart {
                slow_ms: num(2)?,
                fast_ms: num(3)?,
                slow_count: count.parse().map_err(|_| bad())?,
            },
            ["synthetic", "noisy", _, _] => SyntheticBackendSpec::Noisy {
                mean_ms: num(2)?,
                jitter_ms: num(3)?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A backend that blocks for a scripted duration per call.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    spec: SyntheticBackendSpec,
    rng: ChaCha8Rng,
    calls: u64,
    label: String,
}

pub fn make_synthetic(spec: SyntheticBackendSpec, seed: u64) -> Result<SyntheticBackend, HarnessError> {
    spec.validate()?;
    let label = match spec {
        SyntheticBackendSpec::Constant { delay_ms } => format!("synthetic:const:{delay_ms}"),
        SyntheticBackendSpec::ColdStart {
            slow_ms,
            fast_ms,
            slow_count,
        } => format!("synthetic:cold:{slow_ms}:{fast_ms}:{slow_count}"),
        SyntheticBackendSpec::Noisy { mean_ms, jitter_ms } => {
            format!("synthetic:noisy:{mean_ms}:{jitter_ms}")
        }
    };
    Ok(SyntheticBackend {
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
        calls: 0,
        label,
    })
}

impl SyntheticBackend {
    pub fn spec(&self) -> SyntheticBackendSpec {
        self.spec
    }

    /// Advances the script and returns the duration of the next call in ms.
    pub fn next_delay_ms(&mut self) -> f64 {
        let call = self.calls;
        self.calls += 1;
        match self.spec {
            SyntheticBackendSpec::Constant { delay_ms } => delay_ms,
            SyntheticBackendSpec::ColdStart {
                slow_ms,
                fast_ms,
                slow_count,
            } => {
                if call < slow_count {
                    slow_ms
                } else {
                    fast_ms
                }
            }
            SyntheticBackendSpec::Noisy { mean_ms, jitter_ms } => {
                let jitter = if jitter_ms > 0.0 {
                    self.rng.random_range(-jitter_ms..=jitter_ms)
                } else {
                    0.0
                };
                (mean_ms + jitter).max(0.0)
            }
        }
    }
}

/// Sleeps for most of `duration`, then spins to the deadline.
fn block_for(duration: Duration) {
    const SPIN: Duration = Duration::from_micros(500);
    let deadline = Instant::now() + duration;
    if duration > SPIN {
        std::thread::sleep(duration - SPIN);
    }
    while Instant::now() < deadline {
        std::hint::spin_loop();
    }
}

impl InferenceBackend for SyntheticBackend {
    fn label(&self) -> &str {
        &self.label
    }

    fn infer(&mut self, input: &[u8], output: &mut Vec<u8>) -> Result<(), BackendError> {
        let delay_ms = self.next_delay_ms();
        if delay_ms > 0.0 {
            block_for(Duration::from_secs_f64(delay_ms / 1e3));
        }
        output.extend_from_slice(&input[..input.len().min(8)]);
        Ok(())
    }
}
