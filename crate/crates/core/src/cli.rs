//! Command-line wiring for the surveillance pipeline.
//!
//! Subcommands: `parse`, `detect`, `stats`, `report`, `gen`, `dict check`.
//! Every command prints a human-readable rendering to stdout and writes
//! machine-readable JSON/CSV only to the paths given by flags; tooling
//! should consume the files, never the stdout text.
//!
//! Exit codes: 0 success, 1 data error (diagnostics emitted), 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{generate_corpus, CorpusSpec};
use crate::dictionary::{builtin_default, load_dictionary, Dictionary};
use crate::lab::{parse_lab_export, ParseOutput, Strictness};
use crate::markers::{
    apply_adjudication, detect_all, legacy_substring_scan, resistance_proportion, summarize,
    AdjudicationFile, MarkerFinding, ResistanceProportion,
};
use crate::period::{Month, Period};
use crate::registry::{
    aggregate, completeness, concentration, cross_validate, ingest_reports, AggregationMode,
};
use crate::stats::{
    build_estimate, default_reference_rates, load_hospital_profiles, load_reference_rates, Scope,
    DEFAULT_PRIMARY_LABEL,
};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl<E: std::fmt::Display> From<E> for CliError
where
    E: std::error::Error,
{
    fn from(e: E) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectMode {
    Token,
    Legacy,
}

/// Optional JSON config; flags override whatever it sets.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dictionary_path: Option<PathBuf>,
    pub reference_rates_path: Option<PathBuf>,
    pub hospital_profiles_path: Option<PathBuf>,
    pub mode: Option<DetectMode>,
    pub strictness: Option<Strictness>,
    pub primary_reference_label: Option<String>,
}

#[derive(Parser, Debug)]
#[command(
    name = "haiscan",
    version,
    about = "HAI surveillance from microbiology lab exports and hospital reports"
)]
struct Cli {
    /// JSON config file (same keys as the run configuration)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a lab export into normalized isolate records
    Parse(ParseArgs),
    /// Detect sentinel markers (MRSA, CAZ-R) and summarize a period
    Detect(DetectArgs),
    /// Compare reported HAI against expected and marker-based counts
    Stats(StatsArgs),
    /// Ingest hospital monthly reports: matrix, conflicts, completeness
    Report(ReportArgs),
    /// Generate a synthetic corpus with planted ground truth
    Gen(GenArgs),
    /// Dictionary utilities
    Dict(DictArgs),
}

#[derive(Args, Debug)]
struct ParseArgs {
    /// Lab export CSV
    lab_csv: PathBuf,
    /// Extra dictionary file merged over the builtin set
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Abort on the first malformed row
    #[arg(long)]
    strict: bool,
    /// Write records + diagnostics as JSON
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Lab export CSV
    lab_csv: PathBuf,
    /// Extra dictionary file merged over the builtin set
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Adjudication CSV applying manual confirm/reject decisions
    #[arg(long)]
    adjudication: Option<PathBuf>,
    /// Use the legacy case-sensitive substring scan instead of token matching
    #[arg(long = "legacy-scan")]
    legacy_scan: bool,
    /// Restrict to a period (YYYY-MM or YYYY-MM:YYYY-MM); defaults to the
    /// full span of dated records
    #[arg(long)]
    period: Option<Period>,
    /// Abort on the first malformed row
    #[arg(long)]
    strict: bool,
    /// Also report resistant/tested proportions for these drug codes
    #[arg(long = "proportion")]
    proportions: Vec<String>,
    /// Write the findings list as JSON
    #[arg(long)]
    findings_out: Option<PathBuf>,
    /// Write the marker summary as JSON
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("scope").required(true).args(["hospital", "county"])))]
struct StatsArgs {
    /// Marker summary JSON produced by `detect` (optional lower bound)
    summary: Option<PathBuf>,
    /// Hospital profiles CSV with admissions denominators
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Scope: one hospital id from the profiles file
    #[arg(long)]
    hospital: Option<String>,
    /// Scope: a county-wide profile row name
    #[arg(long)]
    county: Option<String>,
    /// Period the reported count covers
    #[arg(long)]
    period: Period,
    /// Officially reported HAI count for the scope and period
    #[arg(long)]
    reported: u64,
    /// Reference rates CSV; defaults to the shipped table
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Label of the reference used for the point estimate
    #[arg(long)]
    primary: Option<String>,
    /// Write the estimate as JSON
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Monthly reports CSV (hospital_id,period,count,channel)
    reports_csv: PathBuf,
    /// File listing every accredited hospital id, one per line
    #[arg(long)]
    hospitals: Option<PathBuf>,
    /// Block aggregation on unresolved dual-channel conflicts
    #[arg(long)]
    strict: bool,
    /// Write matrix, conflicts, completeness and concentration as JSON
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the aggregate matrix as CSV
    #[arg(long)]
    matrix_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Corpus spec JSON
    spec: PathBuf,
    /// Where to write the lab export
    #[arg(long, default_value = "corpus.csv")]
    out_csv: PathBuf,
    /// Where to write the ground truth
    #[arg(long, default_value = "ground_truth.json")]
    out_truth: PathBuf,
}

#[derive(Args, Debug)]
struct DictArgs {
    #[command(subcommand)]
    command: DictCommand,
}

#[derive(Subcommand, Debug)]
enum DictCommand {
    /// Validate a dictionary file against the builtin set
    Check {
        /// Dictionary CSV
        file: PathBuf,
    },
}

/// Run the CLI against an argument vector; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(CliError::Data(msg)) | Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Parse(args) => cmd_parse(args, &config),
        Command::Detect(args) => cmd_detect(args, &config),
        Command::Stats(args) => cmd_stats(args, &config),
        Command::Report(args) => cmd_report(args, &config),
        Command::Gen(args) => cmd_gen(args),
        Command::Dict(args) => cmd_dict(args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn load_dict(flag: Option<&Path>, config: &RunConfig) -> Result<Dictionary, CliError> {
    let path = flag.or(config.dictionary_path.as_deref());
    match path {
        None => Ok(builtin_default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                CliError::Data(format!("cannot read dictionary {}: {e}", p.display()))
            })?;
            Ok(load_dictionary(&text)?)
        }
    }
}

fn strictness_of(strict_flag: bool, config: &RunConfig) -> Strictness {
    if strict_flag {
        Strictness::Strict
    } else {
        config.strictness.unwrap_or(Strictness::Lenient)
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn parse_input(
    lab_csv: &Path,
    dict_flag: Option<&Path>,
    strict_flag: bool,
    config: &RunConfig,
) -> Result<(ParseOutput, Dictionary), CliError> {
    let dict = load_dict(dict_flag, config)?;
    let input = read_input(lab_csv)?;
    let output = parse_lab_export(&input, &dict, strictness_of(strict_flag, config))?;
    Ok((output, dict))
}

fn print_warnings(output: &ParseOutput) {
    for warning in &output.diagnostics.warnings {
        println!(
            "  row {:>5}  {:<17} {}",
            warning.row_number, warning.kind, warning.detail
        );
    }
}

#[derive(Serialize)]
struct ParseDocument<'a> {
    records: &'a [crate::lab::IsolateRecord],
    diagnostics: &'a crate::lab::ParseDiagnostics,
}

fn cmd_parse(args: ParseArgs, config: &RunConfig) -> CliResult {
    let (output, _) = parse_input(&args.lab_csv, args.dict.as_deref(), args.strict, config)?;
    println!(
        "parsed {} isolate records from {} rows ({} warnings)",
        output.records.len(),
        output.rows.len(),
        output.diagnostics.warnings.len()
    );
    print_warnings(&output);
    if let Some(path) = &args.output {
        write_json(
            path,
            &ParseDocument {
                records: &output.records,
                diagnostics: &output.diagnostics,
            },
        )?;
        println!("records written to {}", path.display());
    }
    Ok(())
}

/// Widest period covered by dated records.
fn span_of(records: &[crate::lab::IsolateRecord]) -> Option<Period> {
    let mut dates = records.iter().filter_map(|r| r.collection_date);
    let first = dates.next()?;
    let (mut lo, mut hi) = (first, first);
    for d in dates {
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Period::new(Month::of(lo), Month::of(hi)).ok()
}

fn cmd_detect(args: DetectArgs, config: &RunConfig) -> CliResult {
    let (output, _dict) = parse_input(&args.lab_csv, args.dict.as_deref(), args.strict, config)?;
    if !output.diagnostics.warnings.is_empty() {
        println!(
            "{} parse warning(s); run `haiscan parse` for details",
            output.diagnostics.warnings.len()
        );
    }
    let legacy = args.legacy_scan || config.mode == Some(DetectMode::Legacy);

    let mut findings: Vec<MarkerFinding> = if legacy {
        legacy_substring_scan(&output.rows)
    } else {
        detect_all(&output.records)
    };

    if let Some(path) = &args.adjudication {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Data(format!("cannot read adjudication {}: {e}", path.display()))
        })?;
        let adjudication = AdjudicationFile::parse(&text)?;
        let unmatched = apply_adjudication(&mut findings, &adjudication);
        for (isolate_id, marker) in unmatched {
            println!("  warning: adjudication entry ({isolate_id}, {marker}) matches no finding");
        }
    }

    let period = match args.period {
        Some(p) => p,
        None => span_of(&output.records).ok_or_else(|| {
            CliError::Data("no dated records to derive a period from; pass --period".to_string())
        })?,
    };

    let summary = summarize(&output.records, &findings, &period);
    println!(
        "mode: {}  period: {period}",
        if legacy {
            "legacy substring scan"
        } else {
            "token"
        }
    );
    println!(
        "findings: {} ({} pending, {} confirmed, {} rejected)",
        findings.len(),
        findings
            .iter()
            .filter(|f| f.status == crate::markers::ValidationStatus::Pending)
            .count(),
        findings
            .iter()
            .filter(|f| f.status == crate::markers::ValidationStatus::Confirmed)
            .count(),
        findings
            .iter()
            .filter(|f| f.status == crate::markers::ValidationStatus::Rejected)
            .count(),
    );
    println!(
        "MRSA isolates: {}   CAZ-R isolates: {}   total marker isolates: {}",
        summary.mrsa_isolates, summary.caz_isolates, summary.total_marker_isolates
    );
    println!(
        "positive patients: {}   positive isolates: {}",
        summary.positive_patients, summary.positive_isolates
    );

    let mut proportions: Vec<ResistanceProportion> = Vec::new();
    for code in &args.proportions {
        match resistance_proportion(&output.records, code, &period) {
            Ok(p) => {
                println!(
                    "{}: {}/{} resistant ({})",
                    p.code,
                    p.resistant,
                    p.tested,
                    p.percent()
                );
                proportions.push(p);
            }
            Err(e) => println!("{code}: {e}"),
        }
    }

    if let Some(path) = &args.findings_out {
        write_json(path, &findings)?;
        println!("findings written to {}", path.display());
    }
    if let Some(path) = &args.summary_out {
        write_json(path, &summary)?;
        println!("summary written to {}", path.display());
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs, config: &RunConfig) -> CliResult {
    let profile_path = args
        .profile
        .as_deref()
        .or(config.hospital_profiles_path.as_deref())
        .ok_or_else(|| {
            CliError::Usage("--profile is required (or set hospital_profiles_path)".to_string())
        })?;
    let profiles_text = fs::read_to_string(profile_path).map_err(|e| {
        CliError::Data(format!(
            "cannot read profiles {}: {e}",
            profile_path.display()
        ))
    })?;
    let profiles = load_hospital_profiles(&profiles_text)?;

    let (scope, profile_id) = match (&args.hospital, &args.county) {
        (Some(id), None) => (Scope::Hospital(id.clone()), id.clone()),
        (None, Some(name)) => (Scope::County(name.clone()), name.clone()),
        _ => unreachable!("clap enforces the scope group"),
    };
    let profile = profiles.get(&profile_id).ok_or_else(|| {
        CliError::Data(format!(
            "no profile rows for `{profile_id}` in {}",
            profile_path.display()
        ))
    })?;

    let refs = match args
        .refs
        .as_deref()
        .or(config.reference_rates_path.as_deref())
    {
        None => default_reference_rates(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read rates {}: {e}", p.display())))?;
            load_reference_rates(&text)?
        }
    };
    let primary = args
        .primary
        .clone()
        .or_else(|| config.primary_reference_label.clone())
        .unwrap_or_else(|| DEFAULT_PRIMARY_LABEL.to_string());

    let summary = match &args.summary {
        None => None,
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Data(format!("cannot read summary {}: {e}", path.display()))
            })?;
            Some(
                serde_json::from_str::<crate::markers::MarkerSummary>(&text).map_err(|e| {
                    CliError::Data(format!("invalid summary {}: {e}", path.display()))
                })?,
            )
        }
    };

    let estimate = build_estimate(
        scope,
        args.period,
        args.reported,
        summary.as_ref(),
        profile,
        &refs,
        &primary,
    )?;

    println!("{} {}", estimate.scope, estimate.period);
    println!("reported: {}", estimate.reported);
    if let Some(bound) = estimate.marker_lower_bound {
        println!("marker-based lower bound: {bound}");
    }
    println!(
        "expected: {} (range {} - {}, primary {})",
        estimate.expected_point, estimate.expected_low, estimate.expected_high, primary
    );
    match estimate.underreporting_ratio {
        Some(ratio) => println!("under-reporting ratio: {ratio:.4}"),
        None => println!("under-reporting ratio: undefined (expected count is zero)"),
    }

    if let Some(path) = &args.output {
        write_json(path, &estimate)?;
        println!("estimate written to {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportDocument {
    matrix: crate::registry::AggregateMatrix,
    conflicts: Vec<crate::registry::ChannelConflict>,
    completeness: crate::registry::CompletenessReport,
    concentration: Option<crate::registry::Concentration>,
}

fn read_hospital_list(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn cmd_report(args: ReportArgs, _config: &RunConfig) -> CliResult {
    let text = fs::read_to_string(&args.reports_csv)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.reports_csv.display())))?;
    let registry = ingest_reports(&text)?;
    let conflicts = cross_validate(&registry);
    let mode = if args.strict {
        AggregationMode::Strict
    } else {
        AggregationMode::Lenient
    };
    let matrix = aggregate(&registry, mode)?;
    let hospitals = match &args.hospitals {
        Some(path) => read_hospital_list(path)?,
        None => registry.hospitals(),
    };
    let completeness_report = completeness(&registry, &hospitals)?;
    let concentration_result = concentration(&matrix).ok();

    print!("{}", matrix.to_csv());
    if conflicts.is_empty() {
        println!("no dual-channel conflicts");
    } else {
        println!("{} dual-channel conflict(s):", conflicts.len());
        for c in &conflicts {
            println!("  {c}");
        }
    }
    println!(
        "completeness: {} regular, {} partial, {} zero-then-silent, {} never reported",
        completeness_report.regular,
        completeness_report.partial,
        completeness_report.zero_then_silent,
        completeness_report.never_reported
    );
    if let Some(c) = &concentration_result {
        println!(
            "top reporter: hospital {} with {} of {} ({:.0}%)",
            c.hospital_id,
            c.count,
            matrix.grand_total,
            c.share * 100.0
        );
    }

    if let Some(path) = &args.matrix_csv {
        fs::write(path, matrix.to_csv())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        println!("matrix written to {}", path.display());
    }
    if let Some(path) = &args.output {
        write_json(
            path,
            &ReportDocument {
                matrix,
                conflicts,
                completeness: completeness_report,
                concentration: concentration_result,
            },
        )?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> CliResult {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.spec.display())))?;
    let spec: CorpusSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("invalid corpus spec: {e}")))?;
    let corpus = generate_corpus(&spec)?;
    fs::write(&args.out_csv, &corpus.csv)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", args.out_csv.display())))?;
    write_json(&args.out_truth, &corpus.truth)?;
    println!(
        "generated {} isolates / {} patients for {} (seed {})",
        spec.n_isolates, spec.n_patients, spec.period, spec.seed
    );
    println!(
        "planted: {} MRSA, {} CAZ-R, {} distractor line(s)",
        corpus.truth.mrsa_isolates.len(),
        corpus.truth.caz_isolates.len(),
        corpus.truth.distractor_isolates.len()
    );
    println!(
        "corpus written to {}, ground truth to {}",
        args.out_csv.display(),
        args.out_truth.display()
    );
    Ok(())
}

fn cmd_dict(args: DictArgs) -> CliResult {
    match args.command {
        DictCommand::Check { file } => {
            let text = fs::read_to_string(&file)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", file.display())))?;
            let dict = load_dictionary(&text)?;
            let mut by_class: BTreeMap<&str, usize> = BTreeMap::new();
            for entry in dict.entries() {
                *by_class.entry(entry.drug_class.as_str()).or_default() += 1;
            }
            println!(
                "dictionary ok: {} entries, {} resolvable tokens, {} drug classes",
                dict.entry_count(),
                dict.token_count(),
                by_class.len()
            );
            Ok(())
        }
    }
}
