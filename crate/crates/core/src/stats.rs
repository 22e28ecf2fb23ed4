//! Rate estimation and under-reporting arithmetic.
//!
//! Reported HAI counts are compared against two yardsticks: expected counts
//! from literature rates per 100 admissions, and marker-based lower bounds
//! from the lab data. Reference rates are carried as integer thousandths of
//! a case per 100 admissions so the round-half-up at the expected-count
//! boundary is exact; ratios are rounded to four decimals only in reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::markers::MarkerSummary;
use crate::period::Period;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("admissions denominator is zero")]
    ZeroDenominator,
    #[error("expected count is zero; ratio undefined")]
    ZeroExpected,
    #[error("reference rate set is empty")]
    EmptyReferenceSet,
    #[error("no admissions recorded for {hospital_id} in {period}")]
    MissingAdmissions { hospital_id: String, period: Period },
    #[error("no reference rate labelled `{label}`")]
    UnknownPrimaryReference { label: String },
    #[error("`{text}` is not a rate (up to 3 decimal places)")]
    MalformedRate { text: String },
    #[error("malformed rates line {line}: {detail}")]
    MalformedRatesLine { line: usize, detail: String },
    #[error("malformed hospital profile line {line}: {detail}")]
    MalformedProfileLine { line: usize, detail: String },
}

/// HAI cases per 100 admissions, stored as integer thousandths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatePer100(u64);

impl RatePer100 {
    pub fn from_thousandths(t: u64) -> Self {
        Self(t)
    }

    pub fn thousandths(&self) -> u64 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl FromStr for RatePer100 {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || StatsError::MalformedRate {
            text: t.to_string(),
        };
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        if int_part.is_empty()
            || frac_part.len() > 3
            || !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let whole: u64 = int_part.parse().map_err(|_| bad())?;
        let mut frac: u64 = 0;
        if !frac_part.is_empty() {
            frac = frac_part.parse().map_err(|_| bad())?;
            frac *= 10u64.pow(3 - frac_part.len() as u32);
        }
        whole
            .checked_mul(1000)
            .and_then(|w| w.checked_add(frac))
            .map(Self)
            .ok_or_else(bad)
    }
}

impl fmt::Display for RatePer100 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 1000;
        let frac = self.0 % 1000;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let s = format!("{frac:03}");
            write!(f, "{whole}.{}", s.trim_end_matches('0'))
        }
    }
}

impl Serialize for RatePer100 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for RatePer100 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(deserializer)?;
        let scaled = x * 1000.0;
        let rounded = scaled.round();
        if x < 0.0 || (scaled - rounded).abs() > 1e-6 {
            return Err(de::Error::custom(format!(
                "rate {x} is not a non-negative value with at most 3 decimals"
            )));
        }
        Ok(Self(rounded as u64))
    }
}

/// One literature rate used as a comparison yardstick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRate {
    pub label: String,
    pub rate_per_100: RatePer100,
    pub year: i32,
    pub source: String,
}

/// The rate table shipped with the tool (see `assets/reference_rates.csv`).
pub const DEFAULT_RATES_CSV: &str = include_str!("../assets/reference_rates.csv");

/// Label of the rate used for point estimates unless configured otherwise.
pub const DEFAULT_PRIMARY_LABEL: &str = "USA";

pub fn default_reference_rates() -> Vec<ReferenceRate> {
    load_reference_rates(DEFAULT_RATES_CSV).expect("shipped rate table is well-formed")
}

/// Parse a rates CSV: header `label,rate_per_100,year,source`.
pub fn load_reference_rates(text: &str) -> Result<Vec<ReferenceRate>, StatsError> {
    let mut rates = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, ',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(StatsError::MalformedRatesLine {
                line: line_no,
                detail: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() {
            return Err(StatsError::MalformedRatesLine {
                line: line_no,
                detail: "label is empty".to_string(),
            });
        }
        let rate = fields[1].parse()?;
        let year = fields[2]
            .parse()
            .map_err(|_| StatsError::MalformedRatesLine {
                line: line_no,
                detail: format!("year `{}` is not an integer", fields[2]),
            })?;
        rates.push(ReferenceRate {
            label: fields[0].to_string(),
            rate_per_100: rate,
            year,
            source: fields[3].to_string(),
        });
    }
    Ok(rates)
}

/// Hospital identity plus its admissions denominators per period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HospitalProfile {
    pub hospital_id: String,
    pub has_icu: bool,
    pub admissions: BTreeMap<Period, u64>,
}

impl HospitalProfile {
    pub fn admissions_for(&self, period: &Period) -> Option<u64> {
        self.admissions.get(period).copied()
    }
}

/// Parse hospital profiles CSV: header `hospital_id,has_icu,period,admissions`,
/// one row per (hospital, period).
pub fn load_hospital_profiles(text: &str) -> Result<BTreeMap<String, HospitalProfile>, StatsError> {
    let mut profiles: BTreeMap<String, HospitalProfile> = BTreeMap::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(StatsError::MalformedProfileLine {
                line: line_no,
                detail: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let has_icu = match fields[1].to_ascii_uppercase().as_str() {
            "Y" | "YES" | "TRUE" | "1" => true,
            "N" | "NO" | "FALSE" | "0" => false,
            other => {
                return Err(StatsError::MalformedProfileLine {
                    line: line_no,
                    detail: format!("has_icu `{other}` is not Y/N"),
                })
            }
        };
        let period: Period = fields[2]
            .parse()
            .map_err(|e| StatsError::MalformedProfileLine {
                line: line_no,
                detail: format!("{e}"),
            })?;
        let admissions: u64 = fields[3]
            .parse()
            .map_err(|_| StatsError::MalformedProfileLine {
                line: line_no,
                detail: format!("admissions `{}` is not a non-negative integer", fields[3]),
            })?;
        let profile = profiles
            .entry(fields[0].to_string())
            .or_insert_with(|| HospitalProfile {
                hospital_id: fields[0].to_string(),
                has_icu,
                admissions: BTreeMap::new(),
            });
        if profile.has_icu != has_icu {
            return Err(StatsError::MalformedProfileLine {
                line: line_no,
                detail: format!("has_icu flips for hospital {}", fields[0]),
            });
        }
        if profile.admissions.insert(period, admissions).is_some() {
            return Err(StatsError::MalformedProfileLine {
                line: line_no,
                detail: format!("duplicate admissions row for {} {period}", fields[0]),
            });
        }
    }
    Ok(profiles)
}

/// 100 x count / admissions, full precision.
pub fn rate_per_100(count: u64, admissions: u64) -> Result<f64, StatsError> {
    if admissions == 0 {
        return Err(StatsError::ZeroDenominator);
    }
    Ok(100.0 * count as f64 / admissions as f64)
}

/// Expected HAI count: admissions x rate / 100, rounded half-up to whole
/// cases. Exact integer arithmetic; no float ties.
pub fn expected_hai(admissions: u64, rate: RatePer100) -> u64 {
    let num = admissions as u128 * rate.thousandths() as u128;
    let den = 100_000u128; // 100 admissions x 1000 thousandths
    u64::try_from((2 * num + den) / (2 * den)).unwrap_or(u64::MAX)
}

/// Expected counts under the lowest and highest reference rates.
pub fn expected_range(admissions: u64, refs: &[ReferenceRate]) -> Result<(u64, u64), StatsError> {
    let min = refs
        .iter()
        .map(|r| r.rate_per_100)
        .min()
        .ok_or(StatsError::EmptyReferenceSet)?;
    let max = refs
        .iter()
        .map(|r| r.rate_per_100)
        .max()
        .ok_or(StatsError::EmptyReferenceSet)?;
    Ok((expected_hai(admissions, min), expected_hai(admissions, max)))
}

/// reported / expected, full precision. May exceed 1; over-reporting is
/// reportable too.
pub fn underreporting_ratio(reported: u64, expected_point: u64) -> Result<f64, StatsError> {
    if expected_point == 0 {
        return Err(StatsError::ZeroExpected);
    }
    Ok(reported as f64 / expected_point as f64)
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Hospital(String),
    County(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Hospital(id) => write!(f, "hospital {id}"),
            Scope::County(name) => write!(f, "county {name}"),
        }
    }
}

/// Reported vs marker-based vs expected HAI for one scope and period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub scope: Scope,
    pub period: Period,
    pub reported: u64,
    pub marker_lower_bound: Option<u64>,
    pub expected_low: u64,
    pub expected_high: u64,
    pub expected_point: u64,
    /// reported / expected_point, rounded to 4 decimals; absent when the
    /// expected count is zero.
    pub underreporting_ratio: Option<f64>,
}

/// Assemble the three-way comparison for one scope and period.
pub fn build_estimate(
    scope: Scope,
    period: Period,
    reported: u64,
    marker_summary: Option<&MarkerSummary>,
    profile: &HospitalProfile,
    refs: &[ReferenceRate],
    primary_label: &str,
) -> Result<Estimate, StatsError> {
    let admissions =
        profile
            .admissions_for(&period)
            .ok_or_else(|| StatsError::MissingAdmissions {
                hospital_id: profile.hospital_id.clone(),
                period,
            })?;
    let primary = refs
        .iter()
        .find(|r| r.label.eq_ignore_ascii_case(primary_label))
        .ok_or_else(|| StatsError::UnknownPrimaryReference {
            label: primary_label.to_string(),
        })?;
    let (expected_low, expected_high) = expected_range(admissions, refs)?;
    let expected_point = expected_hai(admissions, primary.rate_per_100);
    let ratio = if expected_point > 0 {
        Some(round4(underreporting_ratio(reported, expected_point)?))
    } else {
        None
    };
    Ok(Estimate {
        scope,
        period,
        reported,
        marker_lower_bound: marker_summary.map(|s| s.total_marker_isolates),
        expected_low,
        expected_high,
        expected_point,
        underreporting_ratio: ratio,
    })
}
