//! Calendar months and inclusive month ranges.
//!
//! Reporting periods are either a single month (`2007-07`) or a contiguous
//! month range (`2007-01:2007-03`). A range is one reporting cell, not a
//! shorthand for its constituent months.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PeriodError {
    #[error("invalid month `{0}`, expected YYYY-MM")]
    InvalidMonth(String),
    #[error("invalid period: end {end} precedes start {start}")]
    InvalidPeriod { start: Month, end: Month },
}

/// One calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self, PeriodError> {
        if !(1..=12).contains(&month) {
            return Err(PeriodError::InvalidMonth(format!("{year:04}-{month:02}")));
        }
        Ok(Self { year, month })
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("month validated at construction")
    }

    pub fn last_day(&self) -> NaiveDate {
        let (y, m) = if self.month == 12 {
            (self.year + 1, 1)
        } else {
            (self.year, self.month + 1)
        };
        NaiveDate::from_ymd_opt(y, m, 1)
            .expect("month validated at construction")
            .pred_opt()
            .expect("predecessor of a first-of-month exists")
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = PeriodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PeriodError::InvalidMonth(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        Month::new(year, month).map_err(|_| bad())
    }
}

/// An inclusive, contiguous range of months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    start: Month,
    end: Month,
}

impl Period {
    pub fn new(start: Month, end: Month) -> Result<Self, PeriodError> {
        if end < start {
            return Err(PeriodError::InvalidPeriod { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn month(m: Month) -> Self {
        Self { start: m, end: m }
    }

    pub fn start(&self) -> Month {
        self.start
    }

    pub fn end(&self) -> Month {
        self.end
    }

    pub fn is_single_month(&self) -> bool {
        self.start == self.end
    }

    pub fn contains_date(&self, date: NaiveDate) -> bool {
        let m = Month::of(date);
        self.start <= m && m <= self.end
    }

    pub fn overlaps(&self, other: &Period) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_single_month() {
            write!(f, "{}", self.start)
        } else {
            write!(f, "{}:{}", self.start, self.end)
        }
    }
}

impl FromStr for Period {
    type Err = PeriodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().split_once(':') {
            Some((a, b)) => Period::new(a.parse()?, b.parse()?),
            None => Ok(Period::month(s.parse()?)),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_parse_and_display() {
        let m: Month = "2007-07".parse().unwrap();
        assert_eq!(m, Month::new(2007, 7).unwrap());
        assert_eq!(m.to_string(), "2007-07");
        assert!("2007-13".parse::<Month>().is_err());
        assert!("2007".parse::<Month>().is_err());
    }

    #[test]
    fn period_parse_round_trips() {
        let p: Period = "2007-01:2007-03".parse().unwrap();
        assert_eq!(p.to_string(), "2007-01:2007-03");
        let single: Period = "2007-07".parse().unwrap();
        assert!(single.is_single_month());
        assert_eq!(single.to_string(), "2007-07");
    }

    #[test]
    fn period_rejects_reversed_range() {
        let err = "2007-07:2007-01".parse::<Period>().unwrap_err();
        assert!(matches!(err, PeriodError::InvalidPeriod { .. }));
    }

    #[test]
    fn period_date_containment() {
        let p: Period = "2007-01:2007-03".parse().unwrap();
        assert!(p.contains_date(NaiveDate::from_ymd_opt(2007, 3, 31).unwrap()));
        assert!(!p.contains_date(NaiveDate::from_ymd_opt(2007, 4, 1).unwrap()));
        assert_eq!(
            p.start().first_day(),
            NaiveDate::from_ymd_opt(2007, 1, 1).unwrap()
        );
        assert_eq!(
            p.end().last_day(),
            NaiveDate::from_ymd_opt(2007, 3, 31).unwrap()
        );
    }

    #[test]
    fn month_last_day_handles_december() {
        let m = Month::new(2007, 12).unwrap();
        assert_eq!(m.last_day(), NaiveDate::from_ymd_opt(2007, 12, 31).unwrap());
    }

    #[test]
    fn overlap_detection() {
        let q1: Period = "2007-01:2007-03".parse().unwrap();
        let jan: Period = "2007-01".parse().unwrap();
        let apr: Period = "2007-04".parse().unwrap();
        assert!(q1.overlaps(&jan));
        assert!(!q1.overlaps(&apr));
    }
}
