//! Hospital monthly HAI report registry.
//!
//! Hospitals file counts to two agencies (CJAS and ASP); the registry
//! ingests both channels, cross-validates them, aggregates into a
//! hospital-by-period matrix, and classifies reporting completeness. An
//! explicit zero and an absent report contribute the same 0 to totals but
//! are deliberately different facts: one is a hospital saying "no
//! infections", the other is silence.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::period::Period;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("duplicate reports: {}", format_duplicates(.0))]
    DuplicateReports(Vec<DuplicateRow>),
    #[error("malformed report row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },
    #[error("unknown channel `{channel}` at row {row}")]
    UnknownChannel { row: usize, channel: String },
    #[error("overlapping periods {a} and {b} for ({hospital_id}, {channel})")]
    OverlappingPeriods {
        hospital_id: String,
        channel: Channel,
        a: Period,
        b: Period,
    },
    #[error("{} unresolved dual-channel conflicts block strict aggregation", .0.len())]
    UnresolvedConflicts(Vec<ChannelConflict>),
    #[error("report row for `{hospital_id}` which is not an accredited hospital")]
    UnknownHospital { hospital_id: String },
    #[error("matrix has no counted reports")]
    EmptyMatrix,
}

fn format_duplicates(dups: &[DuplicateRow]) -> String {
    let rows: Vec<String> = dups.iter().map(|d| d.row.to_string()).collect();
    format!("{} row(s) at line(s) {}", dups.len(), rows.join(", "))
}

impl fmt::Display for ChannelConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}): CJAS {} vs ASP {}",
            self.hospital_id, self.period, self.cjas_count, self.asp_count
        )
    }
}

/// The two mandatory reporting channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "CJAS")]
    Cjas,
    #[serde(rename = "ASP")]
    Asp,
}

impl Channel {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CJAS" => Some(Channel::Cjas),
            "ASP" => Some(Channel::Asp),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Cjas => "CJAS",
            Channel::Asp => "ASP",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One hospital's HAI count for one period on one channel. A missing count
/// means the hospital filed a blank, not a zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyReport {
    pub hospital_id: String,
    pub period: Period,
    pub count: Option<u64>,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DuplicateRow {
    pub row: usize,
    pub hospital_id: String,
    pub period: Period,
    pub channel: Channel,
}

/// Hospital ids sort numerically when they are numbers ("2" before "10"),
/// lexicographically otherwise.
pub fn natural_id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// All ingested reports, invariant-checked.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Registry {
    reports: Vec<MonthlyReport>,
}

impl Registry {
    pub fn reports(&self) -> &[MonthlyReport] {
        &self.reports
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    /// Distinct hospitals, natural order.
    pub fn hospitals(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .reports
            .iter()
            .map(|r| r.hospital_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        ids.sort_by(|a, b| natural_id_cmp(a, b));
        ids
    }

    /// Distinct periods ordered by (start, end).
    pub fn periods(&self) -> Vec<Period> {
        self.reports
            .iter()
            .map(|r| r.period)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    fn last_period(&self) -> Option<Period> {
        self.reports
            .iter()
            .map(|r| r.period)
            .max_by_key(|p| (p.end(), p.start()))
    }

    pub fn from_reports(reports: Vec<MonthlyReport>) -> Result<Self, RegistryError> {
        let registry = Registry { reports };
        registry.check_invariants()?;
        Ok(registry)
    }

    fn check_invariants(&self) -> Result<(), RegistryError> {
        let mut seen: BTreeMap<(&str, Period, Channel), usize> = BTreeMap::new();
        let mut duplicates = Vec::new();
        for (i, report) in self.reports.iter().enumerate() {
            let key = (report.hospital_id.as_str(), report.period, report.channel);
            if seen.insert(key, i).is_some() {
                duplicates.push(DuplicateRow {
                    row: i + 2, // header is line 1
                    hospital_id: report.hospital_id.clone(),
                    period: report.period,
                    channel: report.channel,
                });
            }
        }
        if !duplicates.is_empty() {
            return Err(RegistryError::DuplicateReports(duplicates));
        }
        let mut by_channel: BTreeMap<(&str, Channel), Vec<Period>> = BTreeMap::new();
        for report in &self.reports {
            by_channel
                .entry((report.hospital_id.as_str(), report.channel))
                .or_default()
                .push(report.period);
        }
        for ((hospital, channel), periods) in by_channel {
            for (i, a) in periods.iter().enumerate() {
                for b in &periods[i + 1..] {
                    if a != b && a.overlaps(b) {
                        return Err(RegistryError::OverlappingPeriods {
                            hospital_id: hospital.to_string(),
                            channel,
                            a: *a,
                            b: *b,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parse the reports CSV: header `hospital_id,period,count,channel`; period
/// is `YYYY-MM` or `YYYY-MM:YYYY-MM`; an empty count field means missing.
pub fn ingest_reports(text: &str) -> Result<Registry, RegistryError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut reports = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| RegistryError::MalformedRow {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            detail: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 4 {
            return Err(RegistryError::MalformedRow {
                row,
                detail: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let hospital_id = record[0].trim().to_string();
        if hospital_id.is_empty() {
            return Err(RegistryError::MalformedRow {
                row,
                detail: "hospital_id is empty".to_string(),
            });
        }
        let period: Period = record[1].parse().map_err(|e| RegistryError::MalformedRow {
            row,
            detail: format!("{e}"),
        })?;
        let count_text = record[2].trim();
        let count = if count_text.is_empty() {
            None
        } else {
            Some(
                count_text
                    .parse::<u64>()
                    .map_err(|_| RegistryError::MalformedRow {
                        row,
                        detail: format!("count `{count_text}` is not a non-negative integer"),
                    })?,
            )
        };
        let channel = Channel::parse(&record[3]).ok_or_else(|| RegistryError::UnknownChannel {
            row,
            channel: record[3].trim().to_string(),
        })?;
        reports.push(MonthlyReport {
            hospital_id,
            period,
            count,
            channel,
        });
    }
    Registry::from_reports(reports)
}

/// A (hospital, period) reported on both channels with different counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConflict {
    pub hospital_id: String,
    pub period: Period,
    pub cjas_count: u64,
    pub asp_count: u64,
}

/// Find every dual-channel disagreement. Blank counts never conflict.
pub fn cross_validate(registry: &Registry) -> Vec<ChannelConflict> {
    let mut cells: BTreeMap<(&str, Period), [Option<u64>; 2]> = BTreeMap::new();
    for report in registry.reports() {
        let Some(count) = report.count else { continue };
        let slot = match report.channel {
            Channel::Cjas => 0,
            Channel::Asp => 1,
        };
        cells
            .entry((&report.hospital_id, report.period))
            .or_default()[slot] = Some(count);
    }
    let mut conflicts: Vec<ChannelConflict> = cells
        .into_iter()
        .filter_map(|((hospital, period), [cjas, asp])| match (cjas, asp) {
            (Some(c), Some(a)) if c != a => Some(ChannelConflict {
                hospital_id: hospital.to_string(),
                period,
                cjas_count: c,
                asp_count: a,
            }),
            _ => None,
        })
        .collect();
    conflicts.sort_by(|a, b| {
        natural_id_cmp(&a.hospital_id, &b.hospital_id).then(a.period.cmp(&b.period))
    });
    conflicts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    /// Dual-channel conflicts abort aggregation.
    Strict,
    /// Conflicts resolve to the larger count, recorded on the matrix.
    Lenient,
}

/// Hospital-by-period matrix with totals. Missing cells stay missing; they
/// contribute 0 to every total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateMatrix {
    pub hospitals: Vec<String>,
    pub periods: Vec<Period>,
    /// cells[h][p] aligned with `hospitals` and `periods`.
    pub cells: Vec<Vec<Option<u64>>>,
    pub row_totals: Vec<u64>,
    pub column_totals: Vec<u64>,
    pub grand_total: u64,
    /// Conflicts resolved by taking the maximum (lenient mode only).
    pub resolved_conflicts: Vec<ChannelConflict>,
}

impl AggregateMatrix {
    pub fn row_total_of(&self, hospital_id: &str) -> Option<u64> {
        self.hospitals
            .iter()
            .position(|h| h == hospital_id)
            .map(|i| self.row_totals[i])
    }

    /// CSV rendering: one row per hospital, one column per period, totals on
    /// the margins. Missing cells render empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("hospital_id");
        for p in &self.periods {
            out.push(',');
            out.push_str(&p.to_string());
        }
        out.push_str(",total\n");
        for (i, hospital) in self.hospitals.iter().enumerate() {
            out.push_str(hospital);
            for cell in &self.cells[i] {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&v.to_string());
                }
            }
            out.push_str(&format!(",{}\n", self.row_totals[i]));
        }
        out.push_str("TOTAL");
        for total in &self.column_totals {
            out.push_str(&format!(",{total}"));
        }
        out.push_str(&format!(",{}\n", self.grand_total));
        out
    }
}

/// Aggregate the registry into a matrix.
pub fn aggregate(
    registry: &Registry,
    mode: AggregationMode,
) -> Result<AggregateMatrix, RegistryError> {
    let conflicts = cross_validate(registry);
    if mode == AggregationMode::Strict && !conflicts.is_empty() {
        return Err(RegistryError::UnresolvedConflicts(conflicts));
    }

    let hospitals = registry.hospitals();
    let periods = registry.periods();
    let mut cell_values: BTreeMap<(&str, Period), u64> = BTreeMap::new();
    for report in registry.reports() {
        let Some(count) = report.count else { continue };
        cell_values
            .entry((&report.hospital_id, report.period))
            .and_modify(|v| *v = (*v).max(count))
            .or_insert(count);
    }

    let mut cells = Vec::with_capacity(hospitals.len());
    let mut row_totals = Vec::with_capacity(hospitals.len());
    let mut column_totals = vec![0u64; periods.len()];
    for hospital in &hospitals {
        let mut row = Vec::with_capacity(periods.len());
        let mut row_total = 0u64;
        for (j, period) in periods.iter().enumerate() {
            let cell = cell_values.get(&(hospital.as_str(), *period)).copied();
            if let Some(v) = cell {
                row_total = row_total.saturating_add(v);
                column_totals[j] = column_totals[j].saturating_add(v);
            }
            row.push(cell);
        }
        cells.push(row);
        row_totals.push(row_total);
    }
    let grand_total = row_totals
        .iter()
        .fold(0u64, |acc, v| acc.saturating_add(*v));

    Ok(AggregateMatrix {
        hospitals,
        periods,
        cells,
        row_totals,
        column_totals,
        grand_total,
        resolved_conflicts: conflicts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletenessStatus {
    /// Reported every registry period since its first report.
    Regular,
    /// Reported some periods, with gaps.
    Partial,
    /// Only ever reported zeros, then went silent before the registry's end.
    ZeroThenSilent,
    /// No rows at all.
    NeverReported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HospitalStatus {
    pub hospital_id: String,
    pub status: CompletenessStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub statuses: Vec<HospitalStatus>,
    pub regular: usize,
    pub partial: usize,
    pub zero_then_silent: usize,
    pub never_reported: usize,
}

impl CompletenessReport {
    pub fn status_of(&self, hospital_id: &str) -> Option<CompletenessStatus> {
        self.statuses
            .iter()
            .find(|s| s.hospital_id == hospital_id)
            .map(|s| s.status)
    }

    /// Hospitals that reported numbers: regular plus partial.
    pub fn reporting_hospitals(&self) -> usize {
        self.regular + self.partial
    }

    pub fn never_reporting_set(&self) -> Vec<&str> {
        self.statuses
            .iter()
            .filter(|s| s.status == CompletenessStatus::NeverReported)
            .map(|s| s.hospital_id.as_str())
            .collect()
    }
}

/// Classify every accredited hospital's reporting behaviour. A period
/// counts as reported only when a count was actually filed (blanks do not
/// report anything).
pub fn completeness(
    registry: &Registry,
    all_hospitals: &[String],
) -> Result<CompletenessReport, RegistryError> {
    let known: BTreeSet<&str> = all_hospitals.iter().map(String::as_str).collect();
    for report in registry.reports() {
        if !known.contains(report.hospital_id.as_str()) {
            return Err(RegistryError::UnknownHospital {
                hospital_id: report.hospital_id.clone(),
            });
        }
    }

    let registry_periods = registry.periods();
    let registry_last = registry.last_period();

    let mut ordered: Vec<String> = all_hospitals.to_vec();
    ordered.sort_by(|a, b| natural_id_cmp(a, b));
    ordered.dedup();

    let mut statuses = Vec::with_capacity(ordered.len());
    for hospital in ordered {
        let rows: Vec<&MonthlyReport> = registry
            .reports()
            .iter()
            .filter(|r| r.hospital_id == hospital)
            .collect();
        let status = if rows.is_empty() {
            CompletenessStatus::NeverReported
        } else {
            let mut reported: BTreeSet<Period> = BTreeSet::new();
            let mut counts = Vec::new();
            for row in &rows {
                if let Some(count) = row.count {
                    reported.insert(row.period);
                    counts.push(count);
                }
            }
            if reported.is_empty() {
                // filed only blanks: engaged with reporting, numbers absent
                CompletenessStatus::Partial
            } else {
                let last_reported = reported
                    .iter()
                    .max_by_key(|p| (p.end(), p.start()))
                    .copied()
                    .expect("non-empty");
                let all_zero = counts.iter().all(|&c| c == 0);
                let stopped_early = registry_last.is_some_and(|last| {
                    (last_reported.end(), last_reported.start()) < (last.end(), last.start())
                });
                if all_zero && stopped_early {
                    CompletenessStatus::ZeroThenSilent
                } else {
                    let first_reported = *reported.iter().next().expect("non-empty");
                    let covered = registry_periods
                        .iter()
                        .filter(|p| **p >= first_reported)
                        .all(|p| reported.contains(p));
                    if covered {
                        CompletenessStatus::Regular
                    } else {
                        CompletenessStatus::Partial
                    }
                }
            }
        };
        statuses.push(HospitalStatus {
            hospital_id: hospital,
            status,
        });
    }

    let count_of = |s: CompletenessStatus| statuses.iter().filter(|h| h.status == s).count();
    Ok(CompletenessReport {
        regular: count_of(CompletenessStatus::Regular),
        partial: count_of(CompletenessStatus::Partial),
        zero_then_silent: count_of(CompletenessStatus::ZeroThenSilent),
        never_reported: count_of(CompletenessStatus::NeverReported),
        statuses,
    })
}

/// The hospital carrying the largest share of all reported HAI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub hospital_id: String,
    pub count: u64,
    pub share: f64,
}

/// Largest row total and its share of the grand total. Ties break to the
/// lowest hospital id.
pub fn concentration(matrix: &AggregateMatrix) -> Result<Concentration, RegistryError> {
    if matrix.grand_total == 0 {
        return Err(RegistryError::EmptyMatrix);
    }
    let mut best: Option<(usize, u64)> = None;
    for (i, total) in matrix.row_totals.iter().enumerate() {
        // hospitals are already in natural order, so strict > keeps the
        // lowest id on ties
        if best.is_none_or(|(_, b)| *total > b) {
            best = Some((i, *total));
        }
    }
    let (idx, count) = best.expect("grand_total > 0 implies at least one row");
    Ok(Concentration {
        hospital_id: matrix.hospitals[idx].clone(),
        count,
        share: count as f64 / matrix.grand_total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "hospital_id,period,count,channel\n";

    fn registry(rows: &str) -> Registry {
        ingest_reports(&format!("{HEADER}{rows}")).unwrap()
    }

    #[test]
    fn empty_file_gives_empty_registry() {
        let r = ingest_reports(HEADER).unwrap();
        assert!(r.is_empty());
        let matrix = aggregate(&r, AggregationMode::Strict).unwrap();
        assert_eq!(matrix.grand_total, 0);
        assert!(matches!(
            concentration(&matrix).unwrap_err(),
            RegistryError::EmptyMatrix
        ));
    }

    #[test]
    fn duplicate_cell_is_rejected_with_row_numbers() {
        let err = ingest_reports(&format!("{HEADER}H3,2007-04,11,CJAS\nH3,2007-04,12,CJAS\n"))
            .unwrap_err();
        match err {
            RegistryError::DuplicateReports(dups) => {
                assert_eq!(dups.len(), 1);
                assert_eq!(dups[0].row, 3);
            }
            other => panic!("expected DuplicateReports, got {other}"),
        }
    }

    #[test]
    fn overlapping_periods_are_rejected() {
        let err = ingest_reports(&format!(
            "{HEADER}H1,2007-01:2007-03,5,CJAS\nH1,2007-02,1,CJAS\n"
        ))
        .unwrap_err();
        assert!(matches!(err, RegistryError::OverlappingPeriods { .. }));
    }

    #[test]
    fn unknown_channel_is_rejected() {
        let err = ingest_reports(&format!("{HEADER}H1,2007-04,5,FAX\n")).unwrap_err();
        assert!(matches!(err, RegistryError::UnknownChannel { row: 2, .. }));
    }

    #[test]
    fn agreeing_dual_channel_reports_do_not_conflict() {
        let r = registry("1,2007-07,33,CJAS\n1,2007-07,33,ASP\n");
        assert!(cross_validate(&r).is_empty());
    }

    #[test]
    fn disagreeing_dual_channel_reports_conflict() {
        let r = registry("1,2007-07,33,CJAS\n1,2007-07,35,ASP\n");
        let conflicts = cross_validate(&r);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].cjas_count, 33);
        assert_eq!(conflicts[0].asp_count, 35);
    }

    #[test]
    fn single_channel_reports_never_conflict() {
        let r = registry("1,2007-07,33,CJAS\n2,2007-07,4,ASP\n");
        assert!(cross_validate(&r).is_empty());
    }

    #[test]
    fn strict_aggregation_blocks_on_conflicts_lenient_takes_max() {
        let r = registry("1,2007-07,33,CJAS\n1,2007-07,35,ASP\n");
        assert!(matches!(
            aggregate(&r, AggregationMode::Strict).unwrap_err(),
            RegistryError::UnresolvedConflicts(_)
        ));
        let matrix = aggregate(&r, AggregationMode::Lenient).unwrap();
        assert_eq!(matrix.grand_total, 35);
        assert_eq!(matrix.resolved_conflicts.len(), 1);
    }

    #[test]
    fn singleton_report_aggregates_to_itself() {
        let matrix = aggregate(&registry("H,2007-05,5,CJAS\n"), AggregationMode::Strict).unwrap();
        assert_eq!(matrix.grand_total, 5);
        assert_eq!(matrix.row_totals, vec![5]);
        assert_eq!(matrix.column_totals, vec![5]);
    }

    #[test]
    fn all_missing_registry_totals_zero_with_missing_cells() {
        let matrix = aggregate(
            &registry("H1,2007-05,,CJAS\nH2,2007-06,,ASP\n"),
            AggregationMode::Strict,
        )
        .unwrap();
        assert_eq!(matrix.grand_total, 0);
        assert!(matrix.cells.iter().flatten().all(Option::is_none));
    }

    #[test]
    fn explicit_zero_and_missing_total_alike_but_classify_differently() {
        let hospitals = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let with_zero = registry("A,2007-01,7,CJAS\nA,2007-02,3,CJAS\nB,2007-01,0,CJAS\n");
        let without = registry("A,2007-01,7,CJAS\nA,2007-02,3,CJAS\n");
        let m1 = aggregate(&with_zero, AggregationMode::Strict).unwrap();
        let m2 = aggregate(&without, AggregationMode::Strict).unwrap();
        assert_eq!(m1.grand_total, m2.grand_total);
        let c1 = completeness(&with_zero, &hospitals).unwrap();
        let c2 = completeness(&without, &hospitals).unwrap();
        assert_eq!(c1.status_of("B"), Some(CompletenessStatus::ZeroThenSilent));
        assert_eq!(c2.status_of("B"), Some(CompletenessStatus::NeverReported));
        assert_eq!(c1.status_of("C"), Some(CompletenessStatus::NeverReported));
    }

    #[test]
    fn complete_reporting_classifies_regular() {
        let hospitals = vec!["A".to_string(), "B".to_string()];
        let r =
            registry("A,2007-01,1,CJAS\nA,2007-02,2,CJAS\nB,2007-01,0,CJAS\nB,2007-02,1,CJAS\n");
        let report = completeness(&r, &hospitals).unwrap();
        assert_eq!(report.regular, 2);
        assert_eq!(report.reporting_hospitals(), 2);
    }

    #[test]
    fn zero_then_silent_needs_all_zeros_and_early_stop() {
        let hospitals: Vec<String> = ["A", "B"].map(String::from).to_vec();
        let r = registry("A,2007-01:2007-03,0,CJAS\nB,2007-04,9,CJAS\nB,2007-05,9,CJAS\n");
        let report = completeness(&r, &hospitals).unwrap();
        assert_eq!(
            report.status_of("A"),
            Some(CompletenessStatus::ZeroThenSilent)
        );
        // B covers every period from its first report onwards
        assert_eq!(report.status_of("B"), Some(CompletenessStatus::Regular));

        // a nonzero reporter that stops early has gaps, not silence
        let r2 = registry("A,2007-01,2,CJAS\nB,2007-01,1,CJAS\nB,2007-02,1,CJAS\n");
        let report2 = completeness(&r2, &hospitals).unwrap();
        assert_eq!(report2.status_of("A"), Some(CompletenessStatus::Partial));
    }

    #[test]
    fn unknown_hospital_report_is_an_error() {
        let err =
            completeness(&registry("GHOST,2007-01,1,CJAS\n"), &["A".to_string()]).unwrap_err();
        assert!(matches!(err, RegistryError::UnknownHospital { .. }));
    }

    #[test]
    fn late_starter_covering_the_tail_is_regular() {
        let hospitals: Vec<String> = ["A", "B"].map(String::from).to_vec();
        let r = registry("A,2007-01,1,CJAS\nA,2007-02,1,CJAS\nB,2007-02,0,CJAS\n");
        let report = completeness(&r, &hospitals).unwrap();
        assert_eq!(report.status_of("B"), Some(CompletenessStatus::Regular));
    }

    #[test]
    fn concentration_finds_top_hospital_with_tie_break() {
        let matrix = aggregate(
            &registry("2,2007-01,10,CJAS\n1,2007-02,10,CJAS\n3,2007-01,4,CJAS\n"),
            AggregationMode::Strict,
        )
        .unwrap();
        let c = concentration(&matrix).unwrap();
        assert_eq!(c.hospital_id, "1");
        assert_eq!(c.count, 10);
        assert!((c.share - 10.0 / 24.0).abs() < 1e-12);

        let single = aggregate(&registry("9,2007-01,3,CJAS\n"), AggregationMode::Strict).unwrap();
        assert_eq!(concentration(&single).unwrap().share, 1.0);
    }

    #[test]
    fn natural_order_sorts_numeric_ids_numerically() {
        let r = registry("10,2007-01,1,CJAS\n2,2007-01,1,CJAS\n1,2007-01,1,CJAS\n");
        assert_eq!(r.hospitals(), vec!["1", "2", "10"]);
    }

    #[test]
    fn matrix_csv_renders_missing_as_empty() {
        let matrix = aggregate(
            &registry("1,2007-01,5,CJAS\n1,2007-02,0,CJAS\n2,2007-01,2,CJAS\n"),
            AggregationMode::Strict,
        )
        .unwrap();
        let csv = matrix.to_csv();
        assert!(csv.contains("1,5,0,5\n"));
        assert!(csv.contains("2,2,,2\n"));
        assert!(csv.contains("TOTAL,7,0,7\n"));
    }
}
