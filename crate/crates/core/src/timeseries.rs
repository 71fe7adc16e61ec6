//! Time-series objects and calendar resampling.
//!
//! Series are dense: entry `i` belongs to period `start + i` with no gaps.
//! Resampling sums fine periods into coarser calendar periods and drops
//! partial edge periods, so a 7-hour "day" never leaks into the output.

use std::fmt;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolution {
    Hourly,
    Daily,
    Monthly,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Hourly => write!(f, "hourly"),
            Resolution::Daily => write!(f, "daily"),
            Resolution::Monthly => write!(f, "monthly"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Units {
    RawViews,
    TrendIndex,
}

/// One period at some resolution: a UTC hour, a calendar date, or a month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Hour(NaiveDateTime),
    Day(NaiveDate),
    Month { year: i32, month: u32 },
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("series must contain at least one value")]
    Empty,
    #[error("series values must be non-negative")]
    NegativeValue,
    #[error("trend-index values must be integers in 0..=100, got {0}")]
    TrendIndexRange(f64),
    #[error("expected {expected} resolution, got {got}")]
    ResolutionMismatch { expected: Resolution, got: Resolution },
    #[error("timezone offset {0} minutes is outside ±840")]
    BadTzOffset(i32),
    #[error("no complete {0} period in the input span")]
    NoCompletePeriod(Resolution),
    #[error("series spans do not overlap")]
    DisjointSpans,
    #[error("overlap of length {0} is too short (need at least 2)")]
    OverlapTooShort(usize),
    #[error("cannot parse period {text:?} as {resolution}")]
    BadPeriod { text: String, resolution: Resolution },
}

impl Period {
    pub fn hour(y: i32, m: u32, d: u32, h: u32) -> Option<Period> {
        let dt = NaiveDate::from_ymd_opt(y, m, d)?.and_hms_opt(h, 0, 0)?;
        Some(Period::Hour(dt))
    }

    pub fn day(y: i32, m: u32, d: u32) -> Option<Period> {
        NaiveDate::from_ymd_opt(y, m, d).map(Period::Day)
    }

    pub fn month(year: i32, month: u32) -> Option<Period> {
        (1..=12).contains(&month).then_some(Period::Month { year, month })
    }

    pub fn resolution(&self) -> Resolution {
        match self {
            Period::Hour(_) => Resolution::Hourly,
            Period::Day(_) => Resolution::Daily,
            Period::Month { .. } => Resolution::Monthly,
        }
    }

    /// The period `steps` after this one (negative steps go backwards).
    pub fn plus(&self, steps: i64) -> Period {
        match *self {
            Period::Hour(dt) => Period::Hour(dt + Duration::hours(steps)),
            Period::Day(d) => Period::Day(d + Duration::days(steps)),
            Period::Month { year, month } => {
                let ord = i64::from(year) * 12 + i64::from(month) - 1 + steps;
                Period::Month {
                    year: ord.div_euclid(12) as i32,
                    month: (ord.rem_euclid(12) + 1) as u32,
                }
            }
        }
    }

    /// Number of steps from `self` to `other`; `None` on resolution mismatch.
    pub fn steps_to(&self, other: &Period) -> Option<i64> {
        match (*self, *other) {
            (Period::Hour(a), Period::Hour(b)) => Some((b - a).num_hours()),
            (Period::Day(a), Period::Day(b)) => Some((b - a).num_days()),
            (Period::Month { year: ya, month: ma }, Period::Month { year: yb, month: mb }) => {
                Some((i64::from(yb) * 12 + i64::from(mb)) - (i64::from(ya) * 12 + i64::from(ma)))
            }
            _ => None,
        }
    }

    /// Parse `YYYY-MM-DDTHH`, `YYYY-MM-DD`, or `YYYY-MM` depending on `resolution`.
    pub fn parse(text: &str, resolution: Resolution) -> Result<Period, SeriesError> {
        let bad = || SeriesError::BadPeriod { text: text.to_string(), resolution };
        match resolution {
            Resolution::Hourly => {
                let dt = NaiveDateTime::parse_from_str(&format!("{text}:00:00"), "%Y-%m-%dT%H:%M:%S")
                    .map_err(|_| bad())?;
                Ok(Period::Hour(dt))
            }
            Resolution::Daily => {
                let d = NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|_| bad())?;
                Ok(Period::Day(d))
            }
            Resolution::Monthly => {
                let (y, m) = text.split_once('-').ok_or_else(bad)?;
                let year: i32 = y.parse().map_err(|_| bad())?;
                let month: u32 = m.parse().map_err(|_| bad())?;
                if y.len() != 4 || m.len() != 2 {
                    return Err(bad());
                }
                Period::month(year, month).ok_or_else(bad)
            }
        }
    }

    /// Parse a period trying each format, inferring the resolution.
    pub fn parse_any(text: &str) -> Option<Period> {
        for res in [Resolution::Hourly, Resolution::Daily, Resolution::Monthly] {
            if let Ok(p) = Period::parse(text, res) {
                return Some(p);
            }
        }
        None
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Period::Hour(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H")),
            Period::Day(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Period::Month { year, month } => write!(f, "{year:04}-{month:02}"),
        }
    }
}

/// Inclusive span of periods at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSpan {
    pub first: Period,
    pub last: Period,
}

impl TimeSpan {
    pub fn new(first: Period, last: Period) -> Option<TimeSpan> {
        match first.steps_to(&last) {
            Some(n) if n >= 0 => Some(TimeSpan { first, last }),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        (self.first.steps_to(&self.last).unwrap() + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // first <= last by construction
    }
}

/// Dense ordered series of non-negative values at a fixed resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: Period,
    values: Vec<f64>,
    units: Units,
}

impl TimeSeries {
    pub fn new(start: Period, values: Vec<f64>, units: Units) -> Result<TimeSeries, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(SeriesError::NegativeValue);
            }
            if units == Units::TrendIndex && (v.fract() != 0.0 || v > 100.0) {
                return Err(SeriesError::TrendIndexRange(v));
            }
        }
        Ok(TimeSeries { start, values, units })
    }

    pub fn start(&self) -> Period {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn resolution(&self) -> Resolution {
        self.start.resolution()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn period_at(&self, index: usize) -> Period {
        self.start.plus(index as i64)
    }

    pub fn span(&self) -> TimeSpan {
        TimeSpan { first: self.start, last: self.period_at(self.values.len() - 1) }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Sum hours into complete local calendar days.
///
/// Each hour is shifted by `tz_offset_minutes` and assigned to the local day
/// containing the hour's start. Days without all 24 hours in the span are
/// dropped; an error is returned if no complete day remains.
pub fn hourly_to_daily(series: &TimeSeries, tz_offset_minutes: i32) -> Result<TimeSeries, SeriesError> {
    if series.resolution() != Resolution::Hourly {
        return Err(SeriesError::ResolutionMismatch {
            expected: Resolution::Hourly,
            got: series.resolution(),
        });
    }
    if tz_offset_minutes.abs() > 14 * 60 {
        return Err(SeriesError::BadTzOffset(tz_offset_minutes));
    }
    let Period::Hour(start) = series.start else { unreachable!() };
    let offset = Duration::minutes(i64::from(tz_offset_minutes));

    // Dense hourly input, so complete days form one contiguous run.
    let mut days: Vec<(NaiveDate, f64, u32)> = Vec::new();
    for (i, &v) in series.values().iter().enumerate() {
        let local_day = (start + Duration::hours(i as i64) + offset).date();
        match days.last_mut() {
            Some((d, sum, count)) if *d == local_day => {
                *sum += v;
                *count += 1;
            }
            _ => days.push((local_day, v, 1)),
        }
    }
    let complete: Vec<(NaiveDate, f64)> = days
        .into_iter()
        .filter(|&(_, _, count)| count == 24)
        .map(|(d, sum, _)| (d, sum))
        .collect();
    let Some(&(first_day, _)) = complete.first() else {
        return Err(SeriesError::NoCompletePeriod(Resolution::Daily));
    };
    let values = complete.iter().map(|&(_, v)| v).collect();
    TimeSeries::new(Period::Day(first_day), values, series.units())
}

/// Sum days into complete calendar months; partial edge months are dropped.
pub fn daily_to_monthly(series: &TimeSeries) -> Result<TimeSeries, SeriesError> {
    if series.resolution() != Resolution::Daily {
        return Err(SeriesError::ResolutionMismatch {
            expected: Resolution::Daily,
            got: series.resolution(),
        });
    }
    let Period::Day(start) = series.start else { unreachable!() };

    let mut months: Vec<(i32, u32, f64, u32)> = Vec::new();
    for (i, &v) in series.values().iter().enumerate() {
        let day = start + Duration::days(i as i64);
        let (y, m) = (day.year(), day.month());
        match months.last_mut() {
            Some((yy, mm, sum, count)) if *yy == y && *mm == m => {
                *sum += v;
                *count += 1;
            }
            _ => months.push((y, m, v, 1)),
        }
    }
    let complete: Vec<(i32, u32, f64)> = months
        .into_iter()
        .filter(|&(y, m, _, count)| count == days_in_month(y, m))
        .map(|(y, m, sum, _)| (y, m, sum))
        .collect();
    let Some(&(y, m, _)) = complete.first() else {
        return Err(SeriesError::NoCompletePeriod(Resolution::Monthly));
    };
    let values = complete.iter().map(|&(_, _, v)| v).collect();
    TimeSeries::new(Period::Month { year: y, month: m }, values, series.units())
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    };
    (next.unwrap() - NaiveDate::from_ymd_opt(year, month, 1).unwrap()).num_days() as u32
}

/// Trim both series to their common span. Requires overlap length >= 2.
pub fn align(a: &TimeSeries, b: &TimeSeries) -> Result<(TimeSeries, TimeSeries), SeriesError> {
    let offset = a.start.steps_to(&b.start).ok_or(SeriesError::ResolutionMismatch {
        expected: a.resolution(),
        got: b.resolution(),
    })?;
    // Index everything relative to a's start.
    let a_end = a.len() as i64 - 1;
    let b_end = offset + b.len() as i64 - 1;
    let first = 0.max(offset);
    let last = a_end.min(b_end);
    if last < first {
        return Err(SeriesError::DisjointSpans);
    }
    let n = (last - first + 1) as usize;
    if n < 2 {
        return Err(SeriesError::OverlapTooShort(n));
    }
    let a_vals = a.values[first as usize..=(last as usize)].to_vec();
    let b_lo = (first - offset) as usize;
    let b_vals = b.values[b_lo..b_lo + n].to_vec();
    let start = a.start.plus(first);
    Ok((
        TimeSeries::new(start, a_vals, a.units)?,
        TimeSeries::new(start, b_vals, b.units)?,
    ))
}

/// A series rescaled to the 0..100 trend-index scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSeries {
    pub series: TimeSeries,
    /// Set when the input was all zeros, in which case the output is too.
    pub all_zero: bool,
}

/// Rescale to percentage-of-maximum integers: `round(100*v/max)` with
/// round-half-away-from-zero. An all-zero input yields all zeros, flagged.
pub fn scale_to_trend_index(series: &TimeSeries) -> ScaledSeries {
    let max = series.values.iter().cloned().fold(0.0_f64, f64::max);
    let (values, all_zero) = if max == 0.0 {
        (vec![0.0; series.len()], true)
    } else {
        let scaled = series.values.iter().map(|&v| round_half_away(100.0 * v / max)).collect();
        (scaled, false)
    };
    let series = TimeSeries::new(series.start, values, Units::TrendIndex)
        .expect("scaled values are integers in 0..=100");
    ScaledSeries { series, all_zero }
}

fn round_half_away(v: f64) -> f64 {
    // f64::round already rounds half away from zero.
    v.round()
}
