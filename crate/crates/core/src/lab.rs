//! Microbiology lab export parsing.
//!
//! The input is the export shape county labs actually produce: one CSV row
//! per resistance line, three rows per isolate sharing an `isolate_id`: a
//! composite string of resistant drugs, one of susceptible drugs, one of
//! intermediates. Rows arrive hand-typed: mixed date formats, stray
//! delimiters, duplicated exports, tokens nobody can resolve. Parsing never
//! silently repairs any of that; every irregularity becomes a diagnostic
//! tied to its input row, and everything else becomes a normalized
//! [`IsolateRecord`] with an S/I/R profile keyed by canonical drug code.
//!
//! Expected header: `isolate_id,patient_id,date,specimen,organism,line_kind,antibiotics`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Dictionary, Resolution};
use crate::period::Period;

pub const LAB_EXPORT_HEADER: [&str; 7] = [
    "isolate_id",
    "patient_id",
    "date",
    "specimen",
    "organism",
    "line_kind",
    "antibiotics",
];

#[derive(Debug, Error)]
pub enum LabError {
    #[error("malformed CSV at row {row}: {detail}")]
    MalformedCsv { row: usize, detail: String },
    #[error("input is not valid UTF-8 (first bad byte at offset {offset})")]
    InvalidEncoding { offset: usize },
    #[error("input is empty")]
    EmptyInput,
}

/// Which of the three composite resistance lines a row carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LineKind {
    #[serde(rename = "R")]
    Resistant,
    #[serde(rename = "S")]
    Susceptible,
    #[serde(rename = "I")]
    Intermediate,
}

impl LineKind {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "R" => Some(LineKind::Resistant),
            "S" => Some(LineKind::Susceptible),
            "I" => Some(LineKind::Intermediate),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LineKind::Resistant => "R",
            LineKind::Susceptible => "S",
            LineKind::Intermediate => "I",
        }
    }
}

/// Interpretive category of one drug on one isolate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "R")]
    Resistant,
    #[serde(rename = "S")]
    Susceptible,
    #[serde(rename = "I")]
    Intermediate,
    /// The same drug appeared under two or more different line kinds.
    #[serde(rename = "conflict")]
    Conflict,
}

impl From<LineKind> for Category {
    fn from(kind: LineKind) -> Self {
        match kind {
            LineKind::Resistant => Category::Resistant,
            LineKind::Susceptible => Category::Susceptible,
            LineKind::Intermediate => Category::Intermediate,
        }
    }
}

/// One raw export row, structurally validated but not yet resolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabRow {
    pub row_number: usize,
    pub isolate_id: String,
    pub patient_id: String,
    pub collection_date: Option<NaiveDate>,
    pub specimen_text: String,
    pub organism_text: String,
    pub line_kind: LineKind,
    pub antibiotics_text: String,
}

/// Normalized organism identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Organism {
    StaphAureus,
    Other(String),
    Unknown,
}

impl Organism {
    pub fn is_staph_aureus(&self) -> bool {
        matches!(self, Organism::StaphAureus)
    }
}

/// A raw token together with the line kind it arrived on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOccurrence {
    pub token: String,
    pub line_kind: LineKind,
}

/// One resolved drug in a profile: its category plus every raw token that
/// contributed to it, kept for marker evidence and token accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub category: Category,
    pub tokens: Vec<TokenOccurrence>,
}

/// One isolate with a normalized S/I/R profile and explicit flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolateRecord {
    pub isolate_id: String,
    pub patient_id: String,
    pub collection_date: Option<NaiveDate>,
    pub organism_raw: String,
    pub organism: Organism,
    pub profile: BTreeMap<String, ProfileEntry>,
    pub explicit_flags: BTreeMap<String, Vec<TokenOccurrence>>,
    pub unknown_tokens: Vec<TokenOccurrence>,
}

impl IsolateRecord {
    pub fn category_of(&self, code: &str) -> Option<Category> {
        self.profile.get(code).map(|e| e.category)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.explicit_flags.contains_key(flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    UnknownToken,
    Conflict,
    MissingLineKind,
    MalformedDate,
    DuplicateRow,
    /// Row skipped in lenient mode (wrong column count, blank identifiers).
    MalformedRow,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WarningKind::UnknownToken => "unknown_token",
            WarningKind::Conflict => "conflict",
            WarningKind::MissingLineKind => "missing_line_kind",
            WarningKind::MalformedDate => "malformed_date",
            WarningKind::DuplicateRow => "duplicate_row",
            WarningKind::MalformedRow => "malformed_row",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub row_number: usize,
    pub kind: WarningKind,
    pub detail: String,
}

/// Everything irregular about an input, tied to row numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub warnings: Vec<Warning>,
}

impl ParseDiagnostics {
    pub fn count_of(&self, kind: WarningKind) -> usize {
        self.warnings.iter().filter(|w| w.kind == kind).count()
    }

    fn push(&mut self, row_number: usize, kind: WarningKind, detail: impl Into<String>) {
        self.warnings.push(Warning {
            row_number,
            kind,
            detail: detail.into(),
        });
    }

    fn sort(&mut self) {
        self.warnings.sort_by(|a, b| {
            (a.row_number, a.kind, &a.detail).cmp(&(b.row_number, b.kind, &b.detail))
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    /// Abort on the first malformed row.
    Strict,
    /// Skip malformed rows with a diagnostic. The default; the data is messy.
    Lenient,
}

/// Output of a full parse: normalized records, the raw rows they came from
/// (the legacy scanner wants those), and diagnostics sorted by row number.
#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub records: Vec<IsolateRecord>,
    pub rows: Vec<LabRow>,
    pub diagnostics: ParseDiagnostics,
}

/// Split a composite resistance string into tokens.
///
/// Delimiters are commas, semicolons, slashes and whitespace runs; empty
/// tokens are dropped; input order is preserved.
pub fn tokenize_resistance_string(text: &str) -> Vec<String> {
    text.split(|c: char| c == ',' || c == ';' || c == '/' || c.is_whitespace())
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

const S_AUREUS_SPELLINGS: [&str; 5] = [
    "staphylococcus aureus",
    "s. aureus",
    "s aureus",
    "staph aureus",
    "staph. aureus",
];

/// Normalize an organism string. Recognizes the configured *S. aureus*
/// spellings after case folding and whitespace collapsing.
pub fn normalize_organism(text: &str) -> Organism {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Organism::Unknown;
    }
    let folded = crate::dictionary::fold_token(trimmed)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    if S_AUREUS_SPELLINGS.contains(&folded.as_str()) {
        Organism::StaphAureus
    } else {
        Organism::Other(trimmed.to_string())
    }
}

/// Accepts ISO `YYYY-MM-DD` or Romanian `DD.MM.YYYY`.
fn parse_flexible_date(text: &str) -> Option<NaiveDate> {
    let t = text.trim();
    NaiveDate::parse_from_str(t, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(t, "%d.%m.%Y"))
        .ok()
}

/// Structurally read lab rows without resolving any tokens.
pub fn read_lab_rows(
    input: &[u8],
    mode: Strictness,
) -> Result<(Vec<LabRow>, ParseDiagnostics), LabError> {
    let text = std::str::from_utf8(input).map_err(|e| LabError::InvalidEncoding {
        offset: e.valid_up_to(),
    })?;
    if text.trim().is_empty() {
        return Err(LabError::EmptyInput);
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut rows = Vec::new();
    let mut diagnostics = ParseDiagnostics::default();
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut header_checked = false;

    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
                match mode {
                    Strictness::Strict => {
                        return Err(LabError::MalformedCsv {
                            row,
                            detail: e.to_string(),
                        })
                    }
                    Strictness::Lenient => {
                        diagnostics.push(row, WarningKind::MalformedRow, e.to_string());
                        continue;
                    }
                }
            }
        };
        let row_number = record.position().map(|p| p.line() as usize).unwrap_or(0);

        if !header_checked {
            let ok = record.len() == LAB_EXPORT_HEADER.len()
                && record
                    .iter()
                    .zip(LAB_EXPORT_HEADER)
                    .all(|(got, want)| got.trim().eq_ignore_ascii_case(want));
            if !ok {
                return Err(LabError::MalformedCsv {
                    row: row_number,
                    detail: format!("expected header `{}`", LAB_EXPORT_HEADER.join(",")),
                });
            }
            header_checked = true;
            continue;
        }

        if record.len() != LAB_EXPORT_HEADER.len() {
            let detail = format!(
                "expected {} columns, found {}",
                LAB_EXPORT_HEADER.len(),
                record.len()
            );
            match mode {
                Strictness::Strict => {
                    return Err(LabError::MalformedCsv {
                        row: row_number,
                        detail,
                    })
                }
                Strictness::Lenient => {
                    diagnostics.push(row_number, WarningKind::MalformedRow, detail);
                    continue;
                }
            }
        }

        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        if seen.contains(&fields) {
            diagnostics.push(
                row_number,
                WarningKind::DuplicateRow,
                format!("identical to an earlier row (isolate {})", fields[0].trim()),
            );
            continue;
        }
        seen.insert(fields.clone());

        let isolate_id = fields[0].trim().to_string();
        let patient_id = fields[1].trim().to_string();
        if isolate_id.is_empty() || patient_id.is_empty() {
            let detail = "blank isolate_id or patient_id".to_string();
            match mode {
                Strictness::Strict => {
                    return Err(LabError::MalformedCsv {
                        row: row_number,
                        detail,
                    })
                }
                Strictness::Lenient => {
                    diagnostics.push(row_number, WarningKind::MalformedRow, detail);
                    continue;
                }
            }
        }

        let line_kind = match LineKind::parse(&fields[5]) {
            Some(kind) => kind,
            None => {
                diagnostics.push(
                    row_number,
                    WarningKind::MissingLineKind,
                    format!("`{}` is not one of R/S/I", fields[5].trim()),
                );
                continue;
            }
        };

        let collection_date = parse_flexible_date(&fields[2]);
        if collection_date.is_none() {
            diagnostics.push(
                row_number,
                WarningKind::MalformedDate,
                format!(
                    "`{}` is neither YYYY-MM-DD nor DD.MM.YYYY",
                    fields[2].trim()
                ),
            );
        }

        rows.push(LabRow {
            row_number,
            isolate_id,
            patient_id,
            collection_date,
            specimen_text: fields[3].trim().to_string(),
            organism_text: fields[4].trim().to_string(),
            line_kind,
            antibiotics_text: fields[6].clone(),
        });
    }

    Ok((rows, diagnostics))
}

/// Group validated rows into isolate records, resolving every token through
/// the dictionary. Consumes nothing; callers keep the rows for legacy mode.
pub fn build_records(rows: &[LabRow], dict: &Dictionary) -> (Vec<IsolateRecord>, ParseDiagnostics) {
    struct ProfileBuilder {
        kinds_seen: BTreeSet<LineKind>,
        entry: ProfileEntry,
    }

    let mut diagnostics = ParseDiagnostics::default();
    let mut groups: BTreeMap<&str, Vec<&LabRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(&row.isolate_id).or_default().push(row);
    }

    let mut records = Vec::with_capacity(groups.len());
    for (isolate_id, mut group) in groups {
        group.sort_by_key(|r| r.row_number);
        let first = group[0];
        let collection_date = group.iter().find_map(|r| r.collection_date);
        let organism_raw = group
            .iter()
            .map(|r| r.organism_text.as_str())
            .find(|t| !t.is_empty())
            .unwrap_or("")
            .to_string();

        let mut profile: BTreeMap<String, ProfileBuilder> = BTreeMap::new();
        let mut explicit_flags: BTreeMap<String, Vec<TokenOccurrence>> = BTreeMap::new();
        let mut unknown_tokens = Vec::new();

        for row in &group {
            for token in tokenize_resistance_string(&row.antibiotics_text) {
                let occurrence = TokenOccurrence {
                    token: token.clone(),
                    line_kind: row.line_kind,
                };
                match dict.lookup_token(&token) {
                    Ok(Resolution::Drug { code, .. }) => {
                        let builder = profile.entry(code.clone()).or_insert(ProfileBuilder {
                            kinds_seen: BTreeSet::new(),
                            entry: ProfileEntry {
                                category: row.line_kind.into(),
                                tokens: Vec::new(),
                            },
                        });
                        let newly_conflicting = builder.kinds_seen.insert(row.line_kind)
                            && builder.kinds_seen.len() == 2;
                        if newly_conflicting {
                            builder.entry.category = Category::Conflict;
                            diagnostics.push(
                                row.row_number,
                                WarningKind::Conflict,
                                format!("{code} reported under multiple line kinds for isolate {isolate_id}"),
                            );
                        }
                        builder.entry.tokens.push(occurrence);
                    }
                    Ok(Resolution::ExplicitFlag { flag }) => {
                        explicit_flags.entry(flag).or_default().push(occurrence);
                    }
                    Ok(Resolution::Unknown) => {
                        diagnostics.push(
                            row.row_number,
                            WarningKind::UnknownToken,
                            format!("`{token}` not in dictionary"),
                        );
                        unknown_tokens.push(occurrence);
                    }
                    // tokenize never yields empty tokens
                    Err(_) => {}
                }
            }
        }

        records.push(IsolateRecord {
            isolate_id: isolate_id.to_string(),
            patient_id: first.patient_id.clone(),
            collection_date,
            organism: normalize_organism(&organism_raw),
            organism_raw,
            profile: profile
                .into_iter()
                .map(|(code, b)| (code, b.entry))
                .collect(),
            explicit_flags,
            unknown_tokens,
        });
    }

    records.sort_by(|a, b| {
        (a.collection_date, &a.isolate_id).cmp(&(b.collection_date, &b.isolate_id))
    });
    diagnostics.sort();
    (records, diagnostics)
}

/// Parse a full lab export: structural read, then grouping and resolution.
pub fn parse_lab_export(
    input: &[u8],
    dict: &Dictionary,
    mode: Strictness,
) -> Result<ParseOutput, LabError> {
    let (rows, mut diagnostics) = read_lab_rows(input, mode)?;
    let (records, token_diagnostics) = build_records(&rows, dict);
    diagnostics.warnings.extend(token_diagnostics.warnings);
    diagnostics.sort();
    Ok(ParseOutput {
        records,
        rows,
        diagnostics,
    })
}

/// Records whose collection date falls inside the period, in stable order.
/// Records without a date are excluded.
pub fn filter_period(records: &[IsolateRecord], period: &Period) -> Vec<IsolateRecord> {
    records
        .iter()
        .filter(|r| r.collection_date.is_some_and(|d| period.contains_date(d)))
        .cloned()
        .collect()
}
