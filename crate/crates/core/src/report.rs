//! Text, CSV and SVG renderings of analysis results.
//!
//! Every function here formats values computed elsewhere; none of them does
//! numeric work beyond unit scaling for display. Money and latency render to
//! two decimals, percentages to one.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::cost::{price_records, relative_change, CostError, Decision, DecisionCurve};
use crate::ingest::{IngestError, PricingTable};
use crate::stats::{LatencySummary, WilcoxonResult};
use crate::types::{BenchmarkRecord, Os, Precision};

pub const CURVE_HEADER: &str = "t_min_ms,t_max_ms,decision,config,precision,cost_usd_per_million";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("selector {selector:?} matches {count} records in workload {workload:?}; add precision or os")]
    AmbiguousSelector {
        selector: String,
        workload: String,
        count: usize,
    },
    #[error("selector {selector:?} matches no record in workload {workload:?}")]
    NoMatch { selector: String, workload: String },
    #[error("bad selector {0:?}; expected config[:precision[:os]]")]
    BadSelector(String),
    #[error("unknown report format {0:?} (expected md or csv)")]
    UnknownFormat(String),
    #[error("curve csv: {0}")]
    Curve(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_pct(fraction: f64) -> String {
    format!("{:+.1}%", fraction * 100.0)
}

/// Column identity in the comparison grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ColumnKey {
    pub config_id: String,
    pub precision: Precision,
    pub os: Os,
}

/// Latency and cost cells for every (workload, column) pair. Missing
/// combinations are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub columns: Vec<ColumnKey>,
    pub workloads: Vec<String>,
    /// `latency[w][c]` in ms/img.
    pub latency: Vec<Vec<Option<f64>>>,
    /// `cost[w][c]` in USD per million images.
    pub cost: Vec<Vec<Option<f64>>>,
}

impl ComparisonTable {
    fn show_os(&self) -> bool {
        self.columns.iter().map(|c| c.os).collect::<BTreeSet<_>>().len() > 1
    }

    fn column_label(&self, c: &ColumnKey) -> String {
        if self.show_os() {
            format!("{} {} ({})", c.config_id, c.precision, c.os)
        } else {
            format!("{} {}", c.config_id, c.precision)
        }
    }

    pub fn cell(&self, workload: &str, column: &ColumnKey) -> (Option<f64>, Option<f64>) {
        let w = self.workloads.iter().position(|x| x == workload);
        let c = self.columns.iter().position(|x| x == column);
        match (w, c) {
            (Some(w), Some(c)) => (self.latency[w][c], self.cost[w][c]),
            _ => (None, None),
        }
    }

    fn rows(&self) -> Vec<(String, &'static str, Vec<String>)> {
        let cell = |v: &Option<f64>| v.map_or_else(|| "-".to_string(), fmt2);
        let mut rows = Vec::new();
        for (w, workload) in self.workloads.iter().enumerate() {
            rows.push((
                workload.clone(),
                "latency_ms_per_img",
                self.latency[w].iter().map(cell).collect(),
            ));
            rows.push((
                workload.clone(),
                "cost_usd_per_million",
                self.cost[w].iter().map(cell).collect(),
            ));
        }
        rows
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let labels: Vec<String> = self.columns.iter().map(|c| self.column_label(c)).collect();
        let _ = writeln!(out, "| workload | quantity | {} |", labels.join(" | "));
        let _ = writeln!(out, "|---|---|{}", "---:|".repeat(labels.len()));
        for (workload, quantity, cells) in self.rows() {
            let quantity = match quantity {
                "latency_ms_per_img" => "Inference time (ms/img)",
                _ => "Inference cost ($/million images)",
            };
            let _ = writeln!(out, "| {workload} | {quantity} | {} |", cells.join(" | "));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("workload,quantity");
        for c in &self.columns {
            let _ = write!(out, ",{}:{}:{}", c.config_id, c.precision, c.os);
        }
        out.push('\n');
        for (workload, quantity, cells) in self.rows() {
            let _ = writeln!(out, "{workload},{quantity},{}", cells.join(","));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Comparison(ComparisonTable),
    Decision(String),
    CurveReference(String),
    TestSummary(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub sections: Vec<Section>,
    pub format: ReportFormat,
}

impl ReportDocument {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            match (section, self.format) {
                (Section::Comparison(t), ReportFormat::Markdown) => {
                    out.push_str("## Inference time and cost\n\n");
                    out.push_str(&t.to_markdown());
                }
                (Section::Comparison(t), ReportFormat::Csv) => out.push_str(&t.to_csv()),
                (Section::Decision(text), ReportFormat::Markdown) => {
                    let _ = writeln!(out, "## Decision\n\n{text}");
                }
                (Section::CurveReference(path), ReportFormat::Markdown) => {
                    let _ = writeln!(out, "## Decision curve\n\nSee `{path}`.");
                }
                (Section::TestSummary(text), ReportFormat::Markdown) => {
                    let _ = writeln!(out, "## Output equivalence\n\n{text}");
                }
                (Section::Decision(text) | Section::TestSummary(text), ReportFormat::Csv) => {
                    for line in text.lines() {
                        let _ = writeln!(out, "# {line}");
                    }
                }
                (Section::CurveReference(path), ReportFormat::Csv) => {
                    let _ = writeln!(out, "# curve: {path}");
                }
            }
        }
        out
    }
}

/// Builds the time/cost grid: one row pair per workload, one column per
/// (config, precision, os), columns ordered by config then fp32 first.
pub fn comparison_table(
    records: &[BenchmarkRecord],
    pricing: &PricingTable,
) -> Result<ComparisonTable, ReportError> {
    let priced = price_records(records, pricing)?;
    let columns: Vec<ColumnKey> = records
        .iter()
        .map(|r| ColumnKey {
            config_id: r.config_id().to_string(),
            precision: r.precision(),
            os: r.os(),
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut workloads: Vec<String> = Vec::new();
    for r in records {
        if !workloads.iter().any(|w| w == r.workload_id()) {
            workloads.push(r.workload_id().to_string());
        }
    }
    let mut latency = vec![vec![None; columns.len()]; workloads.len()];
    let mut cost = latency.clone();
    for c in &priced {
        let w = workloads
            .iter()
            .position(|w| w == c.record.workload_id())
            .expect("workload collected");
        let col = columns
            .iter()
            .position(|k| {
                k.config_id == c.record.config_id()
                    && k.precision == c.record.precision()
                    && k.os == c.record.os()
            })
            .expect("column collected");
        latency[w][col] = Some(c.latency_ms());
        cost[w][col] = Some(c.cost_per_million_usd);
    }
    Ok(ComparisonTable {
        columns,
        workloads,
        latency,
        cost,
    })
}

pub fn render_table(
    records: &[BenchmarkRecord],
    pricing: &PricingTable,
    format: ReportFormat,
) -> Result<ReportDocument, ReportError> {
    Ok(ReportDocument {
        sections: vec![Section::Comparison(comparison_table(records, pricing)?)],
        format,
    })
}

/// One line: `v100 fp16 3.34 ms/img $2.88/M`, or the infeasibility reason.
pub fn decision_text(decision: &Decision) -> String {
    match decision {
        Decision::Optimal(c) => format!(
            "{} {} {} ms/img ${}/M",
            c.record.config_id(),
            c.record.precision(),
            fmt2(c.latency_ms()),
            fmt2(c.cost_per_million_usd)
        ),
        Decision::Infeasible(reason) => format!("infeasible: {reason}"),
    }
}

fn fmt_bound(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

/// Curve CSV; one row per segment. Bounds are written exactly, costs to two
/// decimals.
pub fn curve_csv(curve: &DecisionCurve) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for s in &curve.segments {
        let _ = match &s.decision {
            Decision::Optimal(c) => writeln!(
                out,
                "{},{},optimal,{},{},{}",
                fmt_bound(s.t_min_ms),
                fmt_bound(s.t_max_ms),
                c.record.config_id(),
                c.record.precision(),
                fmt2(c.cost_per_million_usd)
            ),
            Decision::Infeasible(_) => writeln!(
                out,
                "{},{},infeasible,,,",
                fmt_bound(s.t_min_ms),
                fmt_bound(s.t_max_ms)
            ),
        };
    }
    out
}

/// A row of the curve CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub t_min_ms: f64,
    pub t_max_ms: f64,
    pub choice: Option<(String, Precision, f64)>,
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>, ReportError> {
    let mut lines = text.lines().enumerate();
    let malformed = |line: usize, reason: &str| {
        ReportError::Curve(IngestError::MalformedRow {
            line: line as u64 + 1,
            reason: reason.to_string(),
        })
    };
    match lines.next() {
        Some((_, h)) if h == CURVE_HEADER => {}
        other => {
            return Err(ReportError::Curve(IngestError::MalformedHeader {
                expected: CURVE_HEADER,
                found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
            }))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(malformed(i, "expected 6 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| malformed(i, "bad number"));
        let choice = match f[2] {
            "optimal" => Some((
                f[3].to_string(),
                f[4].parse::<Precision>().map_err(|_| malformed(i, "bad precision"))?,
                num(f[5])?,
            )),
            "infeasible" => None,
            _ => return Err(malformed(i, "decision must be optimal or infeasible")),
        };
        rows.push(CurveRow {
            t_min_ms: num(f[0])?,
            t_max_ms: num(f[1])?,
            choice,
        });
    }
    Ok(rows)
}

/// Resolves `config[:precision[:os]]` to exactly one record of `workload`.
pub fn resolve_selector<'a>(
    records: &'a [BenchmarkRecord],
    workload: &str,
    selector: &str,
) -> Result<&'a BenchmarkRecord, ReportError> {
    let parts: Vec<&str> = selector.split(':').collect();
    if parts.is_empty() || parts.len() > 3 || parts[0].is_empty() {
        return Err(ReportError::BadSelector(selector.to_string()));
    }
    let precision = parts
        .get(1)
        .map(|p| p.parse::<Precision>())
        .transpose()
        .map_err(|_| ReportError::BadSelector(selector.to_string()))?;
    let os = parts
        .get(2)
        .map(|p| p.parse::<Os>())
        .transpose()
        .map_err(|_| ReportError::BadSelector(selector.to_string()))?;
    let matches: Vec<&BenchmarkRecord> = records
        .iter()
        .filter(|r| {
            r.workload_id() == workload
                && r.config_id() == parts[0]
                && precision.is_none_or(|p| r.precision() == p)
                && os.is_none_or(|o| r.os() == o)
        })
        .collect();
    match matches.as_slice() {
        [one] => Ok(one),
        [] => Err(ReportError::NoMatch {
            selector: selector.to_string(),
            workload: workload.to_string(),
        }),
        many => Err(ReportError::AmbiguousSelector {
            selector: selector.to_string(),
            workload: workload.to_string(),
            count: many.len(),
        }),
    }
}

fn describe(r: &BenchmarkRecord) -> String {
    format!("{} {} ({})", r.config_id(), r.precision(), r.os())
}

/// Relative change of `target` against `baseline`, for latency and, when both
/// configs are priced, cost.
pub fn compare_text(
    baseline: &BenchmarkRecord,
    target: &BenchmarkRecord,
    pricing: Option<&PricingTable>,
) -> Result<String, ReportError> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {} vs baseline {}",
        target.workload_id(),
        describe(target),
        describe(baseline)
    );
    let latency = relative_change(target.latency_ms_per_img(), baseline.latency_ms_per_img())?;
    let _ = writeln!(
        out,
        "{} latency ({} vs {} ms/img)",
        fmt_pct(latency),
        fmt2(target.latency_ms_per_img()),
        fmt2(baseline.latency_ms_per_img())
    );
    if let Some(pricing) = pricing {
        if let (Some(_), Some(_)) = (pricing.get(baseline.config_id()), pricing.get(target.config_id())) {
            let priced = price_records(&[baseline.clone(), target.clone()], pricing)?;
            let (b, t) = (priced[0].cost_per_million_usd, priced[1].cost_per_million_usd);
            let _ = writeln!(
                out,
                "{} cost (${} vs ${} per million images)",
                fmt_pct(relative_change(t, b)?),
                fmt2(t),
                fmt2(b)
            );
        }
    }
    Ok(out)
}

pub fn equivalence_text(result: &WilcoxonResult) -> String {
    let verdict = if result.reject_at_alpha {
        format!("significant output difference at alpha={}", result.alpha)
    } else {
        format!("equivalent: no significant output difference at alpha={}", result.alpha)
    };
    format!(
        "w_plus: {}\nn_effective: {}\np_value: {:.4}\nmethod: {}\nverdict: {}\n",
        result.w_plus, result.n_effective, result.p_value, result.method, verdict
    )
}

pub fn summary_text(label: &str, summary: &LatencySummary) -> String {
    format!(
        "backend: {label}\nmean_ms: {}\nmedian_ms: {}\nstddev_ms: {}\nn_used: {}\nn_discarded_warmup: {}\n",
        fmt2(summary.mean_ms),
        fmt2(summary.median_ms),
        fmt2(summary.stddev_ms),
        summary.n_used,
        summary.n_discarded_warmup
    )
}

const SVG_W: f64 = 720.0;
const SVG_H: f64 = 440.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Cost-versus-time-limit step plot. One `class="segment"` element per curve
/// segment; infeasible segments are shaded bands, feasible ones horizontal
/// lines at their cost. The unbounded last segment is drawn to 25% past the
/// last breakpoint.
pub fn curve_svg(curve: &DecisionCurve) -> String {
    let last_break = curve
        .segments
        .iter()
        .map(|s| s.t_min_ms)
        .fold(0.0, f64::max);
    let x_max = if last_break > 0.0 { last_break * 1.25 } else { 1.0 };
    let y_max = curve
        .segments
        .iter()
        .filter_map(|s| s.cost_per_million_usd())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.2;
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let sx = |t: f64| MARGIN_L + t.min(x_max) / x_max * plot_w;
    let sy = |c: f64| MARGIN_T + plot_h - c / y_max * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">Inference cost and hardware decision by time limit: {}</text>"#,
        SVG_W / 2.0,
        escape(&curve.workload_id)
    );
    // axes
    let (x0, y0) = (MARGIN_L, MARGIN_T + plot_h);
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        x0 + plot_w
    );
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN_T}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">time limit (ms/img)</text>"#,
        x0 + plot_w / 2.0,
        SVG_H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">cost ($/million images)</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );
    for i in 0..=4 {
        let t = x_max * i as f64 / 4.0;
        let c = y_max * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            sx(t),
            y0 + 18.0,
            fmt2(t)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            sy(c) + 4.0,
            fmt2(c)
        );
    }

    for (i, s) in curve.segments.iter().enumerate() {
        let (xa, xb) = (sx(s.t_min_ms), sx(s.t_max_ms));
        let mid = (xa + xb) / 2.0;
        let upper = if s.t_max_ms.is_infinite() { "inf".to_string() } else { fmt2(s.t_max_ms) };
        let range = format!("[{}, {})", fmt2(s.t_min_ms), upper);
        match &s.decision {
            Decision::Infeasible(_) => {
                let _ = writeln!(
                    out,
                    r##"<rect class="segment infeasible" data-index="{i}" x="{xa:.1}" y="{MARGIN_T}" width="{:.1}" height="{plot_h}" fill="#d9d9d9" fill-opacity="0.7"><title>{range}: no feasible configuration</title></rect>"##,
                    xb - xa
                );
                let _ = writeln!(
                    out,
                    r#"<text class="region-label" x="{mid:.1}" y="{}" text-anchor="middle">no solution</text>"#,
                    MARGIN_T + 16.0
                );
            }
            Decision::Optimal(c) => {
                let y = sy(c.cost_per_million_usd);
                let label = format!(
                    "{} {} ${}/M",
                    c.record.config_id(),
                    c.record.precision(),
                    fmt2(c.cost_per_million_usd)
                );
                let _ = writeln!(
                    out,
                    r##"<line class="segment optimal" data-index="{i}" x1="{xa:.1}" y1="{y:.1}" x2="{xb:.1}" y2="{y:.1}" stroke="#1f77b4" stroke-width="3"><title>{range}: {}</title></line>"##,
                    escape(&label)
                );
                let _ = writeln!(
                    out,
                    r#"<text class="region-label" x="{mid:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    y - 8.0,
                    escape(&label)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
