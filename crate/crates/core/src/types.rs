//! Series, candidate window, calendar arithmetic and input validation.
//!
//! Time is a 1-based integer index throughout the crate; the calendar anchor
//! is metadata used for labelling only.

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum series length accepted for a two-phase fit.
pub const MIN_SERIES_LEN: usize = 12;

/// Points each phase must keep outside the candidate set.
pub const MIN_PHASE_MARGIN: usize = 5;

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} outside 1..=12")));
        }
        Ok(Self { year, month })
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM` or `YYYY-MM-DD` (the day is ignored).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("expected YYYY-MM date, got {s:?}"));
        let mut parts = s.trim().split('-');
        let year = parts.next().ok_or_else(bad)?.parse::<i32>().map_err(|_| bad())?;
        let month = parts.next().ok_or_else(bad)?.parse::<u32>().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            day.parse::<u32>().map_err(|_| bad())?;
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        YearMonth::new(year, month)
    }
}

/// Closed interval a bounded outcome must stay within (e.g. a 0-100 scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

/// Ordered monthly outcome values anchored to a start month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    start: YearMonth,
    bounds: Option<Bounds>,
}

impl TimeSeries {
    /// Builds a series. Content checks (length, finiteness, bounds) are left
    /// to [`validate_series`], which reports every violation at once.
    pub fn new(values: Vec<f64>, start_month: u32, start_year: i32) -> Result<Self> {
        Ok(Self {
            values,
            start: YearMonth::new(start_year, start_month)?,
            bounds: None,
        })
    }

    pub fn with_bounds(mut self, bounds: Option<Bounds>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }

    /// Value at 1-based index `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }
}

/// Formal intervention time plus the number of candidates before and after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct CandidateWindow {
    pub t_star: usize,
    /// Candidates before `t_star`.
    pub before: usize,
    /// Candidates after `t_star`.
    pub after: usize,
}

impl CandidateWindow {
    pub fn new(t_star: usize, before: usize, after: usize) -> Self {
        Self {
            t_star,
            before,
            after,
        }
    }

    /// First candidate, `t* - m`. Saturates at zero for invalid windows.
    pub fn first(&self) -> usize {
        self.t_star.saturating_sub(self.before)
    }

    /// Last candidate, `t* + k`.
    pub fn last(&self) -> usize {
        self.t_star + self.after
    }

    pub fn candidates(&self) -> std::ops::RangeInclusive<usize> {
        self.first()..=self.last()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.candidates().contains(&q)
    }
}

/// One failed validation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    MinSeriesLength { len: usize, min: usize },
    FiniteValues { index: usize },
    WithinBounds { index: usize, value: f64, lower: f64, upper: f64 },
    ValidBounds { lower: f64, upper: f64 },
    WindowInRange { first: i64, last: usize, len: usize },
    MinPhaseMargin { phase: Phase, margin: i64, min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        })
    }
}

impl Violation {
    /// Stable rule identifier, matching the serialized `rule` tag.
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::MinSeriesLength { .. } => "min_series_length",
            Violation::FiniteValues { .. } => "finite_values",
            Violation::WithinBounds { .. } => "within_bounds",
            Violation::ValidBounds { .. } => "valid_bounds",
            Violation::WindowInRange { .. } => "window_in_range",
            Violation::MinPhaseMargin { .. } => "min_phase_margin",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MinSeriesLength { len, min } => {
                write!(f, "series has {len} points, at least {min} required")
            }
            Violation::FiniteValues { index } => write!(f, "value at index {index} is not finite"),
            Violation::WithinBounds {
                index,
                value,
                lower,
                upper,
            } => write!(f, "value {value} at index {index} outside [{lower}, {upper}]"),
            Violation::ValidBounds { lower, upper } => {
                write!(f, "bounds [{lower}, {upper}] are empty or not finite")
            }
            Violation::WindowInRange { first, last, len } => {
                write!(f, "candidate window {first}..={last} not inside 1..={len}")
            }
            Violation::MinPhaseMargin { phase, margin, min } => write!(
                f,
                "{phase} phase keeps {margin} points outside the candidate set; \
                 at least {min} time points are required in each phase outside the candidate set"
            ),
        }
    }
}

/// Outcome of [`validate_series`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::Validation(self.violations))
        }
    }
}

/// Checks a series and candidate window against every input rule. Never
/// fails; violations are collected and returned.
pub fn validate_series(series: &TimeSeries, window: &CandidateWindow) -> ValidationResult {
    let mut violations = Vec::new();
    let len = series.len();

    if len < MIN_SERIES_LEN {
        violations.push(Violation::MinSeriesLength {
            len,
            min: MIN_SERIES_LEN,
        });
    }

    for (i, v) in series.values().iter().enumerate() {
        if !v.is_finite() {
            violations.push(Violation::FiniteValues { index: i + 1 });
        }
    }

    if let Some(Bounds { lower, upper }) = series.bounds() {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            violations.push(Violation::ValidBounds { lower, upper });
        } else {
            for (i, &value) in series.values().iter().enumerate() {
                if value.is_finite() && !(lower..=upper).contains(&value) {
                    violations.push(Violation::WithinBounds {
                        index: i + 1,
                        value,
                        lower,
                        upper,
                    });
                }
            }
        }
    }

    let first = window.t_star as i64 - window.before as i64;
    let last = window.last();
    if first < 1 || last > len {
        violations.push(Violation::WindowInRange { first, last, len });
    }

    let pre_margin = first - 1;
    if pre_margin < MIN_PHASE_MARGIN as i64 {
        violations.push(Violation::MinPhaseMargin {
            phase: Phase::Pre,
            margin: pre_margin,
            min: MIN_PHASE_MARGIN,
        });
    }
    let post_margin = len as i64 - last as i64 + 1;
    if post_margin < MIN_PHASE_MARGIN as i64 {
        violations.push(Violation::MinPhaseMargin {
            phase: Phase::Post,
            margin: post_margin,
            min: MIN_PHASE_MARGIN,
        });
    }

    ValidationResult { violations }
}

/// Calendar month of 1-based `index`, advancing `index - 1` months from the
/// series start.
pub fn index_to_calendar(index: usize, series: &TimeSeries) -> Result<YearMonth> {
    if index == 0 || index > series.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: series.len(),
        });
    }
    Ok(series.start().add_months(index as i64 - 1))
}

/// Inverse of [`index_to_calendar`].
pub fn calendar_to_index(date: YearMonth, series: &TimeSeries) -> Result<usize> {
    let offset = series.start().months_until(date);
    let index = offset + 1;
    if index < 1 || index > series.len() as i64 {
        return Err(Error::InvalidInput(format!(
            "{date} is outside the series range {}..={}",
            series.start(),
            series.start().add_months(series.len() as i64 - 1)
        )));
    }
    Ok(index as usize)
}
