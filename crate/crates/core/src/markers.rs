//! Sentinel-marker detection and adjudication.
//!
//! Two resistance patterns mark an isolate as a probable healthcare-
//! associated infection: methicillin resistance in *S. aureus* (cefoxitin
//! or oxacillin resistance, or an explicit MRSA flag) and ceftazidime
//! resistance as an ESBL proxy. Detection runs over normalized profiles by
//! default; a legacy mode reproduces the original case-sensitive substring
//! scan over raw resistant lines, which deliberately over-matches and is
//! narrowed by manual adjudication. An isolate carrying both markers counts
//! once, as MRSA, so the two summary counts stay disjoint.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lab::{Category, IsolateRecord, LabRow, LineKind};
use crate::period::Period;

#[derive(Debug, Error)]
pub enum MarkerError {
    #[error("{code} was never tested in the period")]
    NotTested { code: String },
    #[error("malformed adjudication line {row}: {detail}")]
    MalformedAdjudication { row: usize, detail: String },
    #[error("duplicate adjudication entry for ({isolate_id}, {marker}) at line {row}")]
    DuplicateAdjudication {
        row: usize,
        isolate_id: String,
        marker: Marker,
    },
}

/// The two sentinel markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Marker {
    #[serde(rename = "MRSA")]
    Mrsa,
    #[serde(rename = "CAZ_R")]
    CazR,
}

impl Marker {
    pub fn as_str(&self) -> &'static str {
        match self {
            Marker::Mrsa => "MRSA",
            Marker::CazR => "CAZ_R",
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Marker {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MRSA" => Ok(Marker::Mrsa),
            "CAZ_R" | "CAZ-R" => Ok(Marker::CazR),
            other => Err(format!("unknown marker `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    ExplicitFlag,
    ProfileCode,
    RawSubstring,
}

/// One token or matched string that contributed to a finding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Evidence {
    pub source: EvidenceSource,
    pub token: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Pending,
    Confirmed,
    Rejected,
}

/// One sentinel-marker hit on one isolate, with its audit trail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerFinding {
    pub isolate_id: String,
    pub patient_id: String,
    pub marker: Marker,
    pub evidence: Vec<Evidence>,
    pub status: ValidationStatus,
}

impl MarkerFinding {
    pub fn key(&self) -> (String, Marker) {
        (self.isolate_id.clone(), self.marker)
    }
}

fn push_unique(evidence: &mut Vec<Evidence>, item: Evidence) {
    if !evidence.contains(&item) {
        evidence.push(item);
    }
}

/// MRSA rule: an explicit MRSA flag, or a *S. aureus* isolate resistant to
/// cefoxitin or oxacillin. Conflicting categories never fire.
pub fn detect_mrsa(record: &IsolateRecord) -> Option<MarkerFinding> {
    let mut evidence = Vec::new();
    if let Some(occurrences) = record.explicit_flags.get("MRSA") {
        for occ in occurrences {
            push_unique(
                &mut evidence,
                Evidence {
                    source: EvidenceSource::ExplicitFlag,
                    token: occ.token.clone(),
                },
            );
        }
    }
    if record.organism.is_staph_aureus() {
        for code in ["FOX", "OXA"] {
            if let Some(entry) = record.profile.get(code) {
                if entry.category == Category::Resistant {
                    for occ in &entry.tokens {
                        push_unique(
                            &mut evidence,
                            Evidence {
                                source: EvidenceSource::ProfileCode,
                                token: occ.token.clone(),
                            },
                        );
                    }
                }
            }
        }
    }
    if evidence.is_empty() {
        return None;
    }
    Some(MarkerFinding {
        isolate_id: record.isolate_id.clone(),
        patient_id: record.patient_id.clone(),
        marker: Marker::Mrsa,
        evidence,
        status: ValidationStatus::Pending,
    })
}

/// CAZ rule: ceftazidime category R. Intermediate and conflict do not fire.
pub fn detect_caz(record: &IsolateRecord) -> Option<MarkerFinding> {
    let entry = record.profile.get("CAZ")?;
    if entry.category != Category::Resistant {
        return None;
    }
    let mut evidence = Vec::new();
    for occ in &entry.tokens {
        push_unique(
            &mut evidence,
            Evidence {
                source: EvidenceSource::ProfileCode,
                token: occ.token.clone(),
            },
        );
    }
    Some(MarkerFinding {
        isolate_id: record.isolate_id.clone(),
        patient_id: record.patient_id.clone(),
        marker: Marker::CazR,
        evidence,
        status: ValidationStatus::Pending,
    })
}

/// Run both detectors over every record, in record order.
pub fn detect_all(records: &[IsolateRecord]) -> Vec<MarkerFinding> {
    let mut findings = Vec::new();
    for record in records {
        if let Some(f) = detect_mrsa(record) {
            findings.push(f);
        }
        if let Some(f) = detect_caz(record) {
            findings.push(f);
        }
    }
    findings
}

const LEGACY_MRSA_NEEDLES: [&str; 4] = ["MRSA", "FOX", "fox", "oxa"];
const LEGACY_CAZ_NEEDLES: [&str; 2] = ["CAZ", "ceftazidim"];

/// The original scan: case-sensitive substring search over the organism and
/// antibiotics text of resistant lines only. Over-matches by design
/// ("oxa" hits moxifloxacin); adjudication narrows the result.
pub fn legacy_substring_scan(rows: &[LabRow]) -> Vec<MarkerFinding> {
    let mut findings: Vec<MarkerFinding> = Vec::new();
    let mut index: HashMap<(String, Marker), usize> = HashMap::new();

    let mut hit =
        |row: &LabRow, marker: Marker, needle: &str, findings: &mut Vec<MarkerFinding>| {
            let key = (row.isolate_id.clone(), marker);
            let evidence = Evidence {
                source: EvidenceSource::RawSubstring,
                token: needle.to_string(),
            };
            match index.get(&key) {
                Some(&i) => push_unique(&mut findings[i].evidence, evidence),
                None => {
                    index.insert(key, findings.len());
                    findings.push(MarkerFinding {
                        isolate_id: row.isolate_id.clone(),
                        patient_id: row.patient_id.clone(),
                        marker,
                        evidence: vec![evidence],
                        status: ValidationStatus::Pending,
                    });
                }
            }
        };

    for row in rows {
        if row.line_kind != LineKind::Resistant {
            continue;
        }
        for text in [&row.organism_text, &row.antibiotics_text] {
            for needle in LEGACY_MRSA_NEEDLES {
                if text.contains(needle) {
                    hit(row, Marker::Mrsa, needle, &mut findings);
                }
            }
            for needle in LEGACY_CAZ_NEEDLES {
                if text.contains(needle) {
                    hit(row, Marker::CazR, needle, &mut findings);
                }
            }
        }
    }
    findings
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolvedStatus {
    Confirmed,
    Rejected,
}

impl From<ResolvedStatus> for ValidationStatus {
    fn from(s: ResolvedStatus) -> Self {
        match s {
            ResolvedStatus::Confirmed => ValidationStatus::Confirmed,
            ResolvedStatus::Rejected => ValidationStatus::Rejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationEntry {
    pub status: ResolvedStatus,
    pub note: String,
}

/// Manual confirm/reject decisions, keyed by (isolate, marker).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdjudicationFile {
    entries: BTreeMap<(String, Marker), AdjudicationEntry>,
}

impl AdjudicationFile {
    /// Parse the adjudication CSV: header `isolate_id,marker,status,note`,
    /// status one of confirmed/rejected. Duplicate keys are rejected.
    pub fn parse(text: &str) -> Result<Self, MarkerError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        for result in reader.records() {
            let record = result.map_err(|e| MarkerError::MalformedAdjudication {
                row: e.position().map(|p| p.line() as usize).unwrap_or(0),
                detail: e.to_string(),
            })?;
            let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() < 3 {
                return Err(MarkerError::MalformedAdjudication {
                    row,
                    detail: format!("expected at least 3 fields, found {}", record.len()),
                });
            }
            let isolate_id = record[0].trim().to_string();
            let marker: Marker = record[1]
                .parse()
                .map_err(|detail| MarkerError::MalformedAdjudication { row, detail })?;
            let status = match record[2].trim().to_ascii_lowercase().as_str() {
                "confirmed" => ResolvedStatus::Confirmed,
                "rejected" => ResolvedStatus::Rejected,
                other => {
                    return Err(MarkerError::MalformedAdjudication {
                        row,
                        detail: format!("status `{other}` is not confirmed/rejected"),
                    })
                }
            };
            let note = record.get(3).unwrap_or("").trim().to_string();
            if entries
                .insert(
                    (isolate_id.clone(), marker),
                    AdjudicationEntry { status, note },
                )
                .is_some()
            {
                return Err(MarkerError::DuplicateAdjudication {
                    row,
                    isolate_id,
                    marker,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, isolate_id: &str, marker: Marker, status: ResolvedStatus, note: &str) {
        self.entries.insert(
            (isolate_id.to_string(), marker),
            AdjudicationEntry {
                status,
                note: note.to_string(),
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Apply manual decisions to findings in place. Findings without an entry
/// stay pending; entries matching no finding come back as warnings. Nothing
/// is added or removed.
pub fn apply_adjudication(
    findings: &mut [MarkerFinding],
    adjudication: &AdjudicationFile,
) -> Vec<(String, Marker)> {
    let mut matched: BTreeSet<&(String, Marker)> = BTreeSet::new();
    for finding in findings.iter_mut() {
        let key = finding.key();
        if let Some((stored_key, entry)) = adjudication.entries.get_key_value(&key) {
            finding.status = entry.status.into();
            matched.insert(stored_key);
        }
    }
    adjudication
        .entries
        .keys()
        .filter(|k| !matched.contains(k))
        .cloned()
        .collect()
}

/// Marker counts for one period. MRSA takes precedence per isolate, so
/// `mrsa_isolates + caz_isolates = total_marker_isolates` exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerSummary {
    pub period: Period,
    pub mrsa_isolates: u64,
    pub caz_isolates: u64,
    pub total_marker_isolates: u64,
    pub mrsa_patients: u64,
    pub caz_patients: u64,
    /// Distinct patients with any isolate in the period.
    pub positive_patients: u64,
    /// Distinct isolates in the period; kept alongside the patient count so
    /// either denominator reading is reproducible.
    pub positive_isolates: u64,
}

/// Count non-rejected findings inside the period.
pub fn summarize(
    records: &[IsolateRecord],
    findings: &[MarkerFinding],
    period: &Period,
) -> MarkerSummary {
    let in_period: HashMap<&str, &IsolateRecord> = records
        .iter()
        .filter(|r| r.collection_date.is_some_and(|d| period.contains_date(d)))
        .map(|r| (r.isolate_id.as_str(), r))
        .collect();

    let mut markers_by_isolate: BTreeMap<&str, BTreeSet<Marker>> = BTreeMap::new();
    for finding in findings {
        if finding.status == ValidationStatus::Rejected {
            continue;
        }
        if !in_period.contains_key(finding.isolate_id.as_str()) {
            continue;
        }
        markers_by_isolate
            .entry(&finding.isolate_id)
            .or_default()
            .insert(finding.marker);
    }

    let mut mrsa_isolates = 0u64;
    let mut caz_isolates = 0u64;
    let mut mrsa_patients: BTreeSet<&str> = BTreeSet::new();
    let mut caz_patients: BTreeSet<&str> = BTreeSet::new();
    for (isolate_id, markers) in &markers_by_isolate {
        let record = in_period[isolate_id];
        // precedence: an isolate with both markers counts once, as MRSA
        if markers.contains(&Marker::Mrsa) {
            mrsa_isolates += 1;
            mrsa_patients.insert(&record.patient_id);
        } else if markers.contains(&Marker::CazR) {
            caz_isolates += 1;
            caz_patients.insert(&record.patient_id);
        }
    }

    let positive_patients = in_period
        .values()
        .map(|r| r.patient_id.as_str())
        .collect::<BTreeSet<_>>()
        .len() as u64;

    MarkerSummary {
        period: *period,
        mrsa_isolates,
        caz_isolates,
        total_marker_isolates: mrsa_isolates + caz_isolates,
        mrsa_patients: mrsa_patients.len() as u64,
        caz_patients: caz_patients.len() as u64,
        positive_patients,
        positive_isolates: in_period.len() as u64,
    }
}

/// Resistant/tested counts for one drug over a period. The pair is the
/// exact rational; `fraction` is its float value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceProportion {
    pub code: String,
    pub resistant: u64,
    pub tested: u64,
    pub fraction: f64,
}

impl ResistanceProportion {
    /// Whole-percent rendering, e.g. 160/389 -> "41%".
    pub fn percent(&self) -> String {
        format!("{}%", (self.fraction * 100.0).round() as i64)
    }
}

/// Tested = category in {R,S,I}; conflicts are excluded from both sides.
pub fn resistance_proportion(
    records: &[IsolateRecord],
    code: &str,
    period: &Period,
) -> Result<ResistanceProportion, MarkerError> {
    let mut tested = 0u64;
    let mut resistant = 0u64;
    for record in records {
        if !record
            .collection_date
            .is_some_and(|d| period.contains_date(d))
        {
            continue;
        }
        match record.category_of(code) {
            Some(Category::Resistant) => {
                tested += 1;
                resistant += 1;
            }
            Some(Category::Susceptible) | Some(Category::Intermediate) => tested += 1,
            Some(Category::Conflict) | None => {}
        }
    }
    if tested == 0 {
        return Err(MarkerError::NotTested {
            code: code.to_string(),
        });
    }
    Ok(ResistanceProportion {
        code: code.to_string(),
        resistant,
        tested,
        fraction: resistant as f64 / tested as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{Organism, ProfileEntry, TokenOccurrence};
    use chrono::NaiveDate;

    fn record(
        isolate: &str,
        patient: &str,
        organism: Organism,
        profile: &[(&str, Category)],
        mrsa_flag: bool,
    ) -> IsolateRecord {
        let mut map = BTreeMap::new();
        for (code, category) in profile {
            map.insert(
                code.to_string(),
                ProfileEntry {
                    category: *category,
                    tokens: vec![TokenOccurrence {
                        token: code.to_string(),
                        line_kind: match category {
                            Category::Resistant | Category::Conflict => LineKind::Resistant,
                            Category::Susceptible => LineKind::Susceptible,
                            Category::Intermediate => LineKind::Intermediate,
                        },
                    }],
                },
            );
        }
        let mut flags = BTreeMap::new();
        if mrsa_flag {
            flags.insert(
                "MRSA".to_string(),
                vec![TokenOccurrence {
                    token: "MRSA".to_string(),
                    line_kind: LineKind::Resistant,
                }],
            );
        }
        IsolateRecord {
            isolate_id: isolate.to_string(),
            patient_id: patient.to_string(),
            collection_date: Some(NaiveDate::from_ymd_opt(2007, 7, 10).unwrap()),
            organism_raw: String::new(),
            organism,
            profile: map,
            explicit_flags: flags,
            unknown_tokens: Vec::new(),
        }
    }

    fn july() -> Period {
        "2007-07".parse().unwrap()
    }

    #[test]
    fn aureus_with_fox_resistance_is_mrsa() {
        let rec = record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[("FOX", Category::Resistant)],
            false,
        );
        let finding = detect_mrsa(&rec).unwrap();
        assert_eq!(finding.marker, Marker::Mrsa);
        assert_eq!(finding.status, ValidationStatus::Pending);
        assert_eq!(finding.evidence.len(), 1);
        assert_eq!(finding.evidence[0].token, "FOX");
    }

    #[test]
    fn organism_gate_blocks_non_aureus() {
        let rec = record(
            "X1",
            "P1",
            Organism::Other("Escherichia coli".to_string()),
            &[("OXA", Category::Resistant)],
            false,
        );
        assert!(detect_mrsa(&rec).is_none());
    }

    #[test]
    fn susceptible_aureus_is_not_mrsa() {
        let rec = record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[
                ("FOX", Category::Susceptible),
                ("OXA", Category::Susceptible),
            ],
            false,
        );
        assert!(detect_mrsa(&rec).is_none());
    }

    #[test]
    fn conflict_category_never_fires() {
        let mrsa_rec = record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[("FOX", Category::Conflict)],
            false,
        );
        assert!(detect_mrsa(&mrsa_rec).is_none());
        let caz_rec = record(
            "X2",
            "P2",
            Organism::Other("Escherichia coli".to_string()),
            &[("CAZ", Category::Conflict)],
            false,
        );
        assert!(detect_caz(&caz_rec).is_none());
    }

    #[test]
    fn explicit_flag_fires_without_profile() {
        let rec = record("X1", "P1", Organism::Unknown, &[], true);
        let finding = detect_mrsa(&rec).unwrap();
        assert_eq!(finding.evidence[0].source, EvidenceSource::ExplicitFlag);
    }

    #[test]
    fn caz_resistant_fires_intermediate_does_not() {
        let resistant = record(
            "X1",
            "P1",
            Organism::Other("Klebsiella pneumoniae".to_string()),
            &[("CAZ", Category::Resistant)],
            false,
        );
        assert!(detect_caz(&resistant).is_some());
        let intermediate = record(
            "X2",
            "P2",
            Organism::Other("Klebsiella pneumoniae".to_string()),
            &[("CAZ", Category::Intermediate)],
            false,
        );
        assert!(detect_caz(&intermediate).is_none());
        let untested = record("X3", "P3", Organism::Unknown, &[], false);
        assert!(detect_caz(&untested).is_none());
    }

    fn raw_row(isolate: &str, kind: LineKind, antibiotics: &str) -> LabRow {
        LabRow {
            row_number: 2,
            isolate_id: isolate.to_string(),
            patient_id: "P1".to_string(),
            collection_date: Some(NaiveDate::from_ymd_opt(2007, 7, 10).unwrap()),
            specimen_text: "blood".to_string(),
            organism_text: "Escherichia coli".to_string(),
            line_kind: kind,
            antibiotics_text: antibiotics.to_string(),
        }
    }

    #[test]
    fn legacy_scan_over_matches_on_moxifloxacin() {
        assert!("moxifloxacin".contains("oxa"));
        let rows = vec![raw_row("X1", LineKind::Resistant, "moxifloxacin")];
        let findings = legacy_substring_scan(&rows);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].marker, Marker::Mrsa);
        assert_eq!(findings[0].evidence[0].source, EvidenceSource::RawSubstring);

        // token mode sees an unknown token, not a finding
        let dict = crate::dictionary::builtin_default();
        let (records, _) = crate::lab::build_records(&rows, &dict);
        assert!(detect_mrsa(&records[0]).is_none());
        assert_eq!(records[0].unknown_tokens.len(), 1);
    }

    #[test]
    fn legacy_and_token_agree_on_clean_fox() {
        let mut row = raw_row("X1", LineKind::Resistant, "FOX");
        row.organism_text = "Staphylococcus aureus".to_string();
        let rows = vec![row];
        let legacy = legacy_substring_scan(&rows);
        assert_eq!(legacy.len(), 1);
        let dict = crate::dictionary::builtin_default();
        let (records, _) = crate::lab::build_records(&rows, &dict);
        let token = detect_mrsa(&records[0]).unwrap();
        assert_eq!(legacy[0].key(), token.key());
    }

    #[test]
    fn legacy_scan_ignores_non_resistant_lines() {
        let rows = vec![raw_row("X1", LineKind::Susceptible, "fox")];
        assert!(legacy_substring_scan(&rows).is_empty());
    }

    #[test]
    fn adjudication_replaces_status() {
        let rec = record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[("FOX", Category::Resistant)],
            false,
        );
        let mut findings = detect_all(&[rec]);
        let mut adj = AdjudicationFile::default();
        adj.insert(
            "X1",
            Marker::Mrsa,
            ResolvedStatus::Rejected,
            "typo in lab entry",
        );
        let warnings = apply_adjudication(&mut findings, &adj);
        assert!(warnings.is_empty());
        assert_eq!(findings[0].status, ValidationStatus::Rejected);
    }

    #[test]
    fn empty_adjudication_changes_nothing() {
        let rec = record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[("FOX", Category::Resistant)],
            false,
        );
        let mut findings = detect_all(&[rec]);
        let before = findings.clone();
        let warnings = apply_adjudication(&mut findings, &AdjudicationFile::default());
        assert!(warnings.is_empty());
        assert_eq!(findings, before);
    }

    #[test]
    fn unmatched_entry_warns_without_changing_findings() {
        let rec = record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[("FOX", Category::Resistant)],
            false,
        );
        let mut findings = detect_all(&[rec]);
        let before = findings.clone();
        let mut adj = AdjudicationFile::default();
        adj.insert("GHOST", Marker::Mrsa, ResolvedStatus::Confirmed, "");
        let warnings = apply_adjudication(&mut findings, &adj);
        assert_eq!(warnings, vec![("GHOST".to_string(), Marker::Mrsa)]);
        assert_eq!(findings, before);
    }

    #[test]
    fn adjudication_file_round_trip() {
        let adj = AdjudicationFile::parse(
            "isolate_id,marker,status,note\n\
             X1,MRSA,rejected,moxifloxacin substring hit\n\
             X2,CAZ_R,confirmed,\n",
        )
        .unwrap();
        assert_eq!(adj.len(), 2);
        let err = AdjudicationFile::parse(
            "isolate_id,marker,status,note\n\
             X1,MRSA,rejected,\n\
             X1,MRSA,confirmed,\n",
        )
        .unwrap_err();
        assert!(matches!(err, MarkerError::DuplicateAdjudication { .. }));
        let err =
            AdjudicationFile::parse("isolate_id,marker,status,note\nX1,MRSA,maybe,\n").unwrap_err();
        assert!(matches!(
            err,
            MarkerError::MalformedAdjudication { row: 2, .. }
        ));
    }

    #[test]
    fn summary_counts_small_planted_set() {
        let records = vec![
            record(
                "X1",
                "P1",
                Organism::StaphAureus,
                &[("FOX", Category::Resistant)],
                false,
            ),
            record(
                "X2",
                "P2",
                Organism::Other("Escherichia coli".to_string()),
                &[("CAZ", Category::Resistant)],
                false,
            ),
            record(
                "X3",
                "P2",
                Organism::Other("Proteus mirabilis".to_string()),
                &[("GEN", Category::Susceptible)],
                false,
            ),
        ];
        let findings = detect_all(&records);
        let summary = summarize(&records, &findings, &july());
        assert_eq!(summary.mrsa_isolates, 1);
        assert_eq!(summary.caz_isolates, 1);
        assert_eq!(summary.total_marker_isolates, 2);
        assert_eq!(summary.positive_patients, 2);
        assert_eq!(summary.positive_isolates, 3);
    }

    #[test]
    fn no_findings_means_zero_marker_counts() {
        let records = vec![record(
            "X1",
            "P1",
            Organism::Other("Escherichia coli".to_string()),
            &[("GEN", Category::Susceptible)],
            false,
        )];
        let summary = summarize(&records, &[], &july());
        assert_eq!(summary.total_marker_isolates, 0);
        assert_eq!(summary.positive_patients, 1);
    }

    #[test]
    fn isolate_with_both_markers_counts_once_as_mrsa() {
        let records = vec![record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[("FOX", Category::Resistant), ("CAZ", Category::Resistant)],
            false,
        )];
        let findings = detect_all(&records);
        assert_eq!(findings.len(), 2);
        let summary = summarize(&records, &findings, &july());
        assert_eq!(summary.mrsa_isolates, 1);
        assert_eq!(summary.caz_isolates, 0);
        assert_eq!(summary.total_marker_isolates, 1);
    }

    #[test]
    fn rejected_findings_are_excluded_from_counts() {
        let records = vec![record(
            "X1",
            "P1",
            Organism::StaphAureus,
            &[("FOX", Category::Resistant)],
            false,
        )];
        let mut findings = detect_all(&records);
        let mut adj = AdjudicationFile::default();
        adj.insert("X1", Marker::Mrsa, ResolvedStatus::Rejected, "");
        apply_adjudication(&mut findings, &adj);
        // retained in the artifact, excluded from the count
        assert_eq!(findings.len(), 1);
        let summary = summarize(&records, &findings, &july());
        assert_eq!(summary.total_marker_isolates, 0);
    }

    #[test]
    fn proportion_counts_tested_and_resistant() {
        let records = vec![
            record(
                "X1",
                "P1",
                Organism::Unknown,
                &[("GEN", Category::Resistant)],
                false,
            ),
            record(
                "X2",
                "P2",
                Organism::Unknown,
                &[("GEN", Category::Susceptible)],
                false,
            ),
            record(
                "X3",
                "P3",
                Organism::Unknown,
                &[("GEN", Category::Intermediate)],
                false,
            ),
            record(
                "X4",
                "P4",
                Organism::Unknown,
                &[("GEN", Category::Conflict)],
                false,
            ),
            record("X5", "P5", Organism::Unknown, &[], false),
        ];
        let p = resistance_proportion(&records, "GEN", &july()).unwrap();
        assert_eq!((p.resistant, p.tested), (1, 3));
        assert!((p.fraction - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(p.percent(), "33%");
    }

    #[test]
    fn untested_code_is_not_tested() {
        let records = vec![record("X1", "P1", Organism::Unknown, &[], false)];
        let err = resistance_proportion(&records, "VAN", &july()).unwrap_err();
        assert!(matches!(err, MarkerError::NotTested { .. }));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        const CODES: [&str; 6] = ["FOX", "OXA", "CAZ", "GEN", "CIP", "VAN"];

        fn category_strategy() -> impl Strategy<Value = Category> {
            prop_oneof![
                Just(Category::Resistant),
                Just(Category::Susceptible),
                Just(Category::Intermediate),
                Just(Category::Conflict),
            ]
        }

        fn record_strategy() -> impl Strategy<Value = IsolateRecord> {
            (
                0usize..3,
                prop::collection::btree_map(0usize..CODES.len(), category_strategy(), 0..5),
                any::<bool>(),
            )
                .prop_map(|(organism_pick, profile, flag)| {
                    let organism = match organism_pick {
                        0 => Organism::StaphAureus,
                        1 => Organism::Other("Escherichia coli".to_string()),
                        _ => Organism::Unknown,
                    };
                    let profile_pairs: Vec<(&str, Category)> =
                        profile.into_iter().map(|(i, c)| (CODES[i], c)).collect();
                    record("X1", "P1", organism, &profile_pairs, flag)
                })
        }

        proptest! {
            // adding a resistant drug never removes an existing finding
            #[test]
            fn detection_is_monotone_in_the_resistant_set(
                rec in record_strategy(),
                extra in 0usize..CODES.len(),
            ) {
                let before: BTreeSet<Marker> =
                    detect_all(std::slice::from_ref(&rec)).iter().map(|f| f.marker).collect();
                let mut grown = rec.clone();
                grown.profile.entry(CODES[extra].to_string()).or_insert(ProfileEntry {
                    category: Category::Resistant,
                    tokens: vec![TokenOccurrence {
                        token: CODES[extra].to_string(),
                        line_kind: LineKind::Resistant,
                    }],
                });
                let after: BTreeSet<Marker> =
                    detect_all(std::slice::from_ref(&grown)).iter().map(|f| f.marker).collect();
                prop_assert!(before.is_subset(&after));
            }

            #[test]
            fn summaries_are_deterministic_under_adjudication(
                rec in record_strategy(),
                reject_mrsa in any::<bool>(),
            ) {
                let records = vec![rec];
                let mut findings = detect_all(&records);
                let mut adj = AdjudicationFile::default();
                if reject_mrsa {
                    adj.insert("X1", Marker::Mrsa, ResolvedStatus::Rejected, "");
                }
                apply_adjudication(&mut findings, &adj);
                let once = summarize(&records, &findings, &july());
                let twice = summarize(&records, &findings, &july());
                prop_assert_eq!(once, twice);
            }
        }
    }

    #[test]
    fn patient_counts_never_exceed_isolate_counts() {
        let records = vec![
            record(
                "X1",
                "P1",
                Organism::StaphAureus,
                &[("FOX", Category::Resistant)],
                false,
            ),
            record(
                "X2",
                "P1",
                Organism::StaphAureus,
                &[("OXA", Category::Resistant)],
                false,
            ),
        ];
        let findings = detect_all(&records);
        let summary = summarize(&records, &findings, &july());
        assert_eq!(summary.mrsa_isolates, 2);
        assert_eq!(summary.mrsa_patients, 1);
        assert!(summary.mrsa_patients <= summary.mrsa_isolates);
    }
}
