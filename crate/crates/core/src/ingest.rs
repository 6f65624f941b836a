//! Readers and writers for the on-disk formats, and quote averaging.
//!
//! All CSV formats are comma separated with a mandatory header, `.` as the
//! decimal point and no quoting. Writers emit the canonical form that the
//! readers accept, so canonical files round-trip byte for byte.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    check_identifier, check_unique, validate_record, BenchmarkRecord, HardwareCatalog, MoneyRate,
    RawRecord, ValidationError,
};

pub const RECORDS_HEADER: &str = "workload,config,precision,os,latency_ms_per_img,metric,samples";
pub const TIMING_HEADER: &str = "iteration,latency_ms";
pub const PAIRS_HEADER: &str = "id,output_a,output_b";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed header: expected {expected:?}, found {found:?}")]
    MalformedHeader { expected: &'static str, found: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: u64,
        #[source]
        source: ValidationError,
    },
    #[error("line {line}: latency must be positive, got {value}")]
    NonPositiveLatency { line: u64, value: f64 },
    #[error("warmup count {warmup} must be smaller than the number of samples ({len})")]
    WarmupExceedsLength { warmup: usize, len: usize },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: u64, id: String },
    #[error("paired outputs need at least one pair")]
    EmptyPairs,
    #[error("paired outputs have mismatched lengths ({ids} ids, {a} a-values, {b} b-values)")]
    LengthMismatch { ids: usize, a: usize, b: usize },
    #[error("no pricing quotes supplied")]
    EmptyQuoteList,
    #[error("quote from {provider} for {config}: {source}")]
    NegativeRate {
        provider: String,
        config: String,
        #[source]
        source: ValidationError,
    },
    #[error("pricing quote: {0} must be non-empty")]
    EmptyQuoteField(&'static str),
    #[error("quote references config {0:?} which is not in the hardware catalog")]
    UnknownConfig(String),
    #[error("pricing file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One provider's hourly price for a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingQuote {
    pub provider: String,
    pub config_id: String,
    pub rate: MoneyRate,
}

impl PricingQuote {
    pub fn new(provider: &str, config_id: &str, usd_per_hour: f64) -> Result<Self, IngestError> {
        let rate = MoneyRate::new(usd_per_hour).map_err(|source| IngestError::NegativeRate {
            provider: provider.to_string(),
            config: config_id.to_string(),
            source,
        })?;
        for (field, value) in [("provider", provider), ("config", config_id)] {
            if value.is_empty() {
                return Err(IngestError::EmptyQuoteField(field));
            }
        }
        Ok(PricingQuote {
            provider: provider.to_string(),
            config_id: config_id.to_string(),
            rate,
        })
    }
}

/// Averaged hourly price per configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PricingTable {
    rates: BTreeMap<String, MoneyRate>,
}

impl PricingTable {
    pub fn from_rates<S: Into<String>>(rates: impl IntoIterator<Item = (S, MoneyRate)>) -> Self {
        PricingTable {
            rates: rates.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn get(&self, config_id: &str) -> Option<MoneyRate> {
        self.rates.get(config_id).copied()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, MoneyRate)> {
        self.rates.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Multiplies every rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ValidationError> {
        let rates = self
            .rates
            .iter()
            .map(|(k, v)| Ok((k.clone(), MoneyRate::new(v.usd_per_hour() * factor)?)))
            .collect::<Result<_, ValidationError>>()?;
        Ok(PricingTable { rates })
    }
}

/// Unweighted mean of all quotes per configuration.
///
/// Values are summed in sorted order as offsets from the smallest quote, so the
/// result does not depend on input order and `k` identical quotes average to
/// exactly that quote.
pub fn average_pricing(quotes: &[PricingQuote]) -> Result<PricingTable, IngestError> {
    if quotes.is_empty() {
        return Err(IngestError::EmptyQuoteList);
    }
    let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for quote in quotes {
        if quote.rate.usd_per_hour() < 0.0 {
            return Err(IngestError::NegativeRate {
                provider: quote.provider.clone(),
                config: quote.config_id.clone(),
                source: ValidationError::NegativeRate(quote.rate.usd_per_hour()),
            });
        }
        grouped
            .entry(quote.config_id.as_str())
            .or_default()
            .push(quote.rate.usd_per_hour());
    }
    let mut rates = BTreeMap::new();
    for (config, mut values) in grouped {
        values.sort_by(f64::total_cmp);
        let base = values[0];
        let offset: f64 = values.iter().map(|v| v - base).sum();
        let mean = base + offset / values.len() as f64;
        let rate = MoneyRate::new(mean).map_err(|source| IngestError::NegativeRate {
            provider: "<average>".into(),
            config: config.to_string(),
            source,
        })?;
        rates.insert(config.to_string(), rate);
    }
    Ok(PricingTable { rates })
}

/// Like [`average_pricing`], but every quoted config must exist in `catalog`.
pub fn average_pricing_in_catalog(
    quotes: &[PricingQuote],
    catalog: &HardwareCatalog,
) -> Result<PricingTable, IngestError> {
    if let Some(unknown) = quotes.iter().find(|q| !catalog.contains(&q.config_id)) {
        return Err(IngestError::UnknownConfig(unknown.config_id.clone()));
    }
    average_pricing(quotes)
}

#[derive(Serialize, Deserialize)]
struct PricingFile {
    quotes: Vec<QuoteEntry>,
}

#[derive(Serialize, Deserialize)]
struct QuoteEntry {
    provider: String,
    config: String,
    usd_per_hour: f64,
}

pub fn parse_pricing_json(text: &str) -> Result<Vec<PricingQuote>, IngestError> {
    let file: PricingFile = serde_json::from_str(text)?;
    file.quotes
        .iter()
        .map(|q| PricingQuote::new(&q.provider, &q.config, q.usd_per_hour))
        .collect()
}

pub fn write_pricing_json(quotes: &[PricingQuote]) -> String {
    let file = PricingFile {
        quotes: quotes
            .iter()
            .map(|q| QuoteEntry {
                provider: q.provider.clone(),
                config: q.config_id.clone(),
                usd_per_hour: q.rate.usd_per_hour(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("pricing file serializes");
    out.push('\n');
    out
}

/// Raw per-iteration latencies of one trial. Warmup samples are kept and
/// only flagged by `warmup_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    latencies_ms: Vec<f64>,
    warmup_count: usize,
    label: String,
}

impl MeasurementSeries {
    pub fn new(
        latencies_ms: Vec<f64>,
        warmup_count: usize,
        label: impl Into<String>,
    ) -> Result<Self, IngestError> {
        if let Some((i, &value)) = latencies_ms
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(IngestError::NonPositiveLatency {
                line: i as u64 + 2,
                value,
            });
        }
        if warmup_count >= latencies_ms.len() {
            return Err(IngestError::WarmupExceedsLength {
                warmup: warmup_count,
                len: latencies_ms.len(),
            });
        }
        Ok(MeasurementSeries {
            latencies_ms,
            warmup_count,
            label: label.into(),
        })
    }

    pub fn latencies_ms(&self) -> &[f64] {
        &self.latencies_ms
    }

    pub fn warmup_count(&self) -> usize {
        self.warmup_count
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.latencies_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latencies_ms.is_empty()
    }

    /// Samples that count towards summaries.
    pub fn post_warmup(&self) -> &[f64] {
        &self.latencies_ms[self.warmup_count..]
    }
}

/// Outputs of two model variants on the same inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedOutputs {
    ids: Vec<String>,
    side_a: Vec<f64>,
    side_b: Vec<f64>,
}

impl PairedOutputs {
    pub fn new(ids: Vec<String>, side_a: Vec<f64>, side_b: Vec<f64>) -> Result<Self, IngestError> {
        if ids.len() != side_a.len() || ids.len() != side_b.len() {
            return Err(IngestError::LengthMismatch {
                ids: ids.len(),
                a: side_a.len(),
                b: side_b.len(),
            });
        }
        if ids.is_empty() {
            return Err(IngestError::EmptyPairs);
        }
        let mut seen = HashSet::new();
        for (i, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(IngestError::DuplicateId {
                    line: i as u64 + 2,
                    id: id.clone(),
                });
            }
        }
        if let Some(i) = side_a
            .iter()
            .chain(&side_b)
            .position(|v| !v.is_finite())
        {
            return Err(IngestError::MalformedRow {
                line: (i % ids.len()) as u64 + 2,
                reason: "output values must be finite".into(),
            });
        }
        Ok(PairedOutputs { ids, side_a, side_b })
    }

    /// Convenience constructor that numbers the pairs `p1, p2, ...`.
    pub fn from_values(side_a: Vec<f64>, side_b: Vec<f64>) -> Result<Self, IngestError> {
        let ids = (1..=side_a.len()).map(|i| format!("p{i}")).collect();
        PairedOutputs::new(ids, side_a, side_b)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn side_a(&self) -> &[f64] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[f64] {
        &self.side_b
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The same pairs with sides A and B exchanged.
    pub fn swapped(&self) -> Self {
        PairedOutputs {
            ids: self.ids.clone(),
            side_a: self.side_b.clone(),
            side_b: self.side_a.clone(),
        }
    }
}

/// Reads a headed CSV, checking the header and the column count of every row.
/// Yields `(line_number, fields)`.
fn read_rows(
    text: &str,
    header: &'static str,
) -> Result<Vec<(u64, csv::StringRecord)>, IngestError> {
    let expected: Vec<&str> = header.split(',').collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .quoting(false)
        .from_reader(text.as_bytes());
    let found = reader.headers()?.clone();
    if found.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(IngestError::MalformedHeader {
            expected: header,
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        rows.push((line, record));
    }
    Ok(rows)
}

fn parse_f64(line: u64, column: &str, raw: &str) -> Result<f64, IngestError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("{column}: {raw:?} is not a number"),
        })
}

fn parse_int<T: std::str::FromStr>(line: u64, column: &str, raw: &str) -> Result<T, IngestError> {
    raw.trim().parse::<T>().map_err(|_| IngestError::MalformedRow {
        line,
        reason: format!("{column}: {raw:?} is not an integer"),
    })
}

/// Parses the records CSV into validated records, in file order.
pub fn parse_records_csv(text: &str) -> Result<Vec<BenchmarkRecord>, IngestError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, row) in read_rows(text, RECORDS_HEADER)? {
        let raw = RawRecord {
            workload_id: row[0].trim().to_string(),
            config_id: row[1].trim().to_string(),
            precision: row[2].trim().to_string(),
            os: row[3].trim().to_string(),
            latency_ms_per_img: parse_f64(line, "latency_ms_per_img", &row[4])?,
            metric_score: parse_f64(line, "metric", &row[5])?,
            samples: parse_int(line, "samples", &row[6])?,
        };
        let record =
            validate_record(&raw).map_err(|source| IngestError::Invalid { line, source })?;
        check_unique(&mut seen, &record).map_err(|source| IngestError::Invalid { line, source })?;
        records.push(record);
    }
    Ok(records)
}

fn write_csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(Vec::new());
    writer
        .write_record(header.split(','))
        .expect("in-memory write");
    for row in rows {
        writer
            .write_record(row.into_iter().collect::<Vec<_>>())
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn write_records_csv(records: &[BenchmarkRecord]) -> String {
    write_csv(
        RECORDS_HEADER,
        records.iter().map(|r| {
            [
                r.workload_id().to_string(),
                r.config_id().to_string(),
                r.precision().to_string(),
                r.os().to_string(),
                r.latency_ms_per_img().to_string(),
                r.metric_score().to_string(),
                r.samples().to_string(),
            ]
        }),
    )
}

/// Parses `iteration,latency_ms` rows. The iteration column is informational
/// and only checked to be an integer; file order is preserved.
pub fn parse_timing_csv(
    text: &str,
    warmup: usize,
    label: impl Into<String>,
) -> Result<MeasurementSeries, IngestError> {
    let mut latencies = Vec::new();
    for (line, row) in read_rows(text, TIMING_HEADER)? {
        let _: u64 = parse_int(line, "iteration", &row[0])?;
        let value = parse_f64(line, "latency_ms", &row[1])?;
        if !(value.is_finite() && value > 0.0) {
            return Err(IngestError::NonPositiveLatency { line, value });
        }
        latencies.push(value);
    }
    MeasurementSeries::new(latencies, warmup, label)
}

/// Iterations are numbered from 1.
pub fn write_timing_csv(series: &MeasurementSeries) -> String {
    write_csv(
        TIMING_HEADER,
        series
            .latencies_ms()
            .iter()
            .enumerate()
            .map(|(i, v)| [(i + 1).to_string(), v.to_string()]),
    )
}

pub fn parse_pairs_csv(text: &str) -> Result<PairedOutputs, IngestError> {
    let mut ids = Vec::new();
    let mut side_a = Vec::new();
    let mut side_b = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in read_rows(text, PAIRS_HEADER)? {
        let id = row[0].trim().to_string();
        check_identifier("id", &id).map_err(|source| IngestError::Invalid { line, source })?;
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId { line, id });
        }
        side_a.push(parse_f64(line, "output_a", &row[1])?);
        side_b.push(parse_f64(line, "output_b", &row[2])?);
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(IngestError::EmptyPairs);
    }
    PairedOutputs::new(ids, side_a, side_b)
}

pub fn write_pairs_csv(pairs: &PairedOutputs) -> String {
    write_csv(
        PAIRS_HEADER,
        pairs
            .ids()
            .iter()
            .zip(pairs.side_a().iter().zip(pairs.side_b()))
            .map(|(id, (a, b))| [id.clone(), a.to_string(), b.to_string()]),
    )
}
