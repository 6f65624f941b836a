//! `infercost` command-line front end.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 infeasible decision.
//! Data goes to stdout or the requested files; diagnostics go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use infercost::cost::{decision_curve, select_optimal, Decision};
use infercost::harness::{make_synthetic, run_trial, SyntheticBackendSpec, TrialPlan};
use infercost::ingest::{
    average_pricing, parse_pairs_csv, parse_pricing_json, parse_records_csv, write_timing_csv,
    PricingTable,
};
use infercost::report::{
    compare_text, curve_csv, curve_svg, decision_text, equivalence_text, render_table,
    resolve_selector, summary_text, ReportFormat, Section,
};
use infercost::stats::{summarize, wilcoxon_signed_rank};
use infercost::types::{
    validate_constraints, BenchmarkRecord, ConstraintSet, Os, Precision, RawConstraints,
};

#[derive(Parser)]
#[command(name = "infercost", version, about = "Pick the cheapest inference hardware that meets your latency and quality bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose the cost-optimal configuration for one workload.
    Decide {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        constraints: ConstraintArgs,
        /// Latency limit in ms per image.
        #[arg(long)]
        max_latency: Option<f64>,
    },
    /// Sweep the latency limit and emit the decision curve.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        constraints: ConstraintArgs,
        /// Curve CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the curve as an SVG plot.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Relative latency (and cost) change of one configuration against another.
    Compare {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        pricing: Option<PathBuf>,
        #[arg(long)]
        workload: String,
        /// Baseline selector, config[:precision[:os]].
        #[arg(long)]
        baseline: String,
        /// Target selector, config[:precision[:os]].
        #[arg(long)]
        target: String,
    },
    /// Paired Wilcoxon signed-rank test on model outputs.
    Equivalence {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Time a backend and write its per-iteration latencies.
    Bench {
        /// Backend spec, e.g. synthetic:const:2.0
        backend: String,
        #[arg(long, default_value_t = infercost::harness::DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value_t = infercost::harness::DEFAULT_WARMUP)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Timing CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time/cost comparison table with a decision per workload.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        pricing: PathBuf,
        #[command(flatten)]
        constraints: ConstraintArgs,
        #[arg(long)]
        max_latency: Option<f64>,
        #[arg(long, default_value = "md")]
        format: String,
        /// Include an equivalence test on these paired outputs.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Reference a curve plot in the report.
        #[arg(long)]
        svg: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    pricing: PathBuf,
    #[arg(long)]
    workload: String,
}

#[derive(Args)]
struct ConstraintArgs {
    /// Minimum output metric, as a fraction.
    #[arg(long)]
    min_metric: Option<f64>,
    /// Allowed precisions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "fp32,fp16")]
    precisions: Vec<String>,
    #[arg(long)]
    os: Option<String>,
}

impl ConstraintArgs {
    fn build(&self, max_latency_ms: Option<f64>) -> Result<ConstraintSet> {
        let allowed_precisions = self
            .precisions
            .iter()
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<Precision>())
            .collect::<Result<Vec<_>, _>>()?;
        let os_filter = self.os.as_deref().map(str::parse::<Os>).transpose()?;
        Ok(validate_constraints(&RawConstraints {
            max_latency_ms,
            min_metric: self.min_metric,
            allowed_precisions,
            os_filter,
        })?)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_records(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let records =
        parse_records_csv(&read(path)?).with_context(|| format!("{}", path.display()))?;
    if records.is_empty() {
        bail!("{}: no benchmark records", path.display());
    }
    Ok(records)
}

fn load_pricing(path: &Path) -> Result<PricingTable> {
    let quotes = parse_pricing_json(&read(path)?).with_context(|| format!("{}", path.display()))?;
    Ok(average_pricing(&quotes).with_context(|| format!("{}", path.display()))?)
}

fn workload_records(records: &[BenchmarkRecord], workload: &str) -> Result<Vec<BenchmarkRecord>> {
    let selected: Vec<_> = records
        .iter()
        .filter(|r| r.workload_id() == workload)
        .cloned()
        .collect();
    if selected.is_empty() {
        bail!("no records for workload {workload:?}");
    }
    Ok(selected)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Decide {
            data,
            constraints,
            max_latency,
        } => {
            let constraints = constraints.build(max_latency)?;
            let records = workload_records(&load_records(&data.records)?, &data.workload)?;
            let pricing = load_pricing(&data.pricing)?;
            let decision = select_optimal(&records, &pricing, &constraints)?;
            println!("{}", decision_text(&decision));
            Ok(match decision {
                Decision::Optimal(_) => ExitCode::SUCCESS,
                Decision::Infeasible(_) => ExitCode::from(2),
            })
        }
        Command::Sweep {
            data,
            constraints,
            out,
            svg,
        } => {
            let constraints = constraints.build(None)?;
            let records = workload_records(&load_records(&data.records)?, &data.workload)?;
            let pricing = load_pricing(&data.pricing)?;
            let curve = decision_curve(&records, &pricing, &constraints)?;
            emit(out.as_deref(), &curve_csv(&curve))?;
            if let Some(path) = svg {
                write(&path, &curve_svg(&curve))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            records,
            pricing,
            workload,
            baseline,
            target,
        } => {
            let records = load_records(&records)?;
            let pricing = pricing.as_deref().map(load_pricing).transpose()?;
            let base = resolve_selector(&records, &workload, &baseline)?;
            let tgt = resolve_selector(&records, &workload, &target)?;
            print!("{}", compare_text(base, tgt, pricing.as_ref())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Equivalence { pairs, alpha } => {
            let parsed =
                parse_pairs_csv(&read(&pairs)?).with_context(|| format!("{}", pairs.display()))?;
            print!("{}", equivalence_text(&wilcoxon_signed_rank(&parsed, alpha)?));
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            backend,
            iterations,
            warmup,
            seed,
            out,
        } => {
            let spec: SyntheticBackendSpec = backend.parse()?;
            let plan = TrialPlan::new(iterations, warmup, seed)?;
            let mut backend = make_synthetic(spec, seed)?;
            let series = run_trial(&mut backend, &plan)?;
            let summary = summarize(&series)?;
            match out {
                Some(path) => {
                    write(&path, &write_timing_csv(&series))?;
                    print!("{}", summary_text(series.label(), &summary));
                }
                None => {
                    print!("{}", write_timing_csv(&series));
                    eprint!("{}", summary_text(series.label(), &summary));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            records,
            pricing,
            constraints,
            max_latency,
            format,
            pairs,
            alpha,
            svg,
            out,
        } => {
            let format: ReportFormat = format.parse()?;
            let constraints = constraints.build(max_latency)?;
            let records = load_records(&records)?;
            let pricing = load_pricing(&pricing)?;
            let mut doc = render_table(&records, &pricing, format)?;
            let mut workloads: Vec<&str> = Vec::new();
            for r in &records {
                if !workloads.contains(&r.workload_id()) {
                    workloads.push(r.workload_id());
                }
            }
            let mut lines = Vec::new();
            for w in workloads {
                let decision = select_optimal(&workload_records(&records, w)?, &pricing, &constraints)?;
                lines.push(format!("{w}: {}", decision_text(&decision)));
            }
            doc.sections.push(Section::Decision(lines.join("\n")));
            if let Some(svg) = svg {
                doc.sections.push(Section::CurveReference(svg));
            }
            if let Some(path) = pairs {
                let parsed =
                    parse_pairs_csv(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                let result = wilcoxon_signed_rank(&parsed, alpha)?;
                doc.sections.push(Section::TestSummary(equivalence_text(&result)));
            }
            emit(out.as_deref(), &doc.render())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // clap's own exit code for usage errors is 2, which is reserved for
    // infeasible decisions here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
