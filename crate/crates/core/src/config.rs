//! Analysis settings, loadable from TOML or JSON.

use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::baselines::CensorSet;
use crate::csvio::CsvSchema;
use crate::error::{Error, Result};
use crate::types::{calendar_to_index, Bounds, CandidateWindow, TimeSeries, YearMonth};

/// Formal intervention time: a 1-based index or a calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum Tet {
    Index(usize),
    Date(#[schemars(with = "String")] YearMonthText),
}

/// `YYYY-MM` wrapper so a date serializes as a plain string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearMonthText(pub YearMonth);

impl Serialize for YearMonthText {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for YearMonthText {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map(YearMonthText).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Tet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tet::Index(i) => write!(f, "{i}"),
            Tet::Date(d) => write!(f, "{}", d.0),
        }
    }
}

impl FromStr for Tet {
    type Err = Error;

    /// An integer index, or a `YYYY-MM` month.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(i) = s.parse::<usize>() {
            return Ok(Tet::Index(i));
        }
        s.parse()
            .map(|d| Tet::Date(YearMonthText(d)))
            .map_err(|_| Error::Config(format!("intervention time must be an index or YYYY-MM, got {s:?}")))
    }
}

impl Tet {
    pub fn resolve(&self, series: &TimeSeries) -> Result<usize> {
        match *self {
            Tet::Index(i) => Ok(i),
            Tet::Date(YearMonthText(d)) => calendar_to_index(d, series),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GlsConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Refit rounds; each re-estimates AR(1) on the previous round's residuals.
    #[serde(default = "one")]
    pub iterations: usize,
}

fn one() -> usize {
    1
}

impl Default for GlsConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            iterations: 1,
        }
    }
}

/// Everything an analysis run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Formal intervention time.
    pub tet: Tet,
    /// Candidates before the intervention time.
    pub before: usize,
    /// Candidates after the intervention time.
    pub after: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_month: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_year: Option<i32>,
    #[serde(default)]
    pub censor_set: CensorSet,
    #[serde(default)]
    pub gls: GlsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(default)]
    pub csv: CsvSchema,
}

impl AnalysisConfig {
    pub fn new(tet: Tet, before: usize, after: usize) -> Self {
        Self {
            tet,
            before,
            after,
            start_month: None,
            start_year: None,
            censor_set: CensorSet::default(),
            gls: GlsConfig::default(),
            bounds: None,
            csv: CsvSchema::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Calendar anchor from `start_month` / `start_year`; a lone month or
    /// year is an error.
    pub fn start(&self) -> Result<Option<YearMonth>> {
        match (self.start_month, self.start_year) {
            (Some(m), Some(y)) => YearMonth::new(y, m).map(Some).map_err(|e| Error::Config(e.to_string())),
            (None, None) => Ok(None),
            _ => Err(Error::Config("start_month and start_year must be given together".into())),
        }
    }

    pub fn window(&self, series: &TimeSeries) -> Result<CandidateWindow> {
        Ok(CandidateWindow::new(self.tet.resolve(series)?, self.before, self.after))
    }

    /// Series from raw values, anchored by this config.
    pub fn series_from_values(&self, values: Vec<f64>) -> Result<TimeSeries> {
        let start = self.start()?.unwrap_or(crate::csvio::DEFAULT_START);
        Ok(TimeSeries::new(values, start.month, start.year)?.with_bounds(self.bounds))
    }

    /// Series from CSV text, anchored by this config or the file's dates.
    pub fn series_from_csv<R: std::io::Read>(&self, reader: R) -> Result<TimeSeries> {
        Ok(crate::csvio::parse_csv(reader, &self.csv, self.start()?)?.with_bounds(self.bounds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_minimal_and_full() {
        let c = AnalysisConfig::from_toml("tet = 31\nbefore = 6\nafter = 6\n").unwrap();
        assert_eq!(c, AnalysisConfig::new(Tet::Index(31), 6, 6));

        let c = AnalysisConfig::from_toml(
            r#"
            tet = "2010-07"
            before = 6
            after = 6
            start_month = 1
            start_year = 2008
            censor_set = "25:37"
            gls = { enabled = true, iterations = 2 }
            bounds = { lower = 0.0, upper = 100.0 }
            csv = { value_column = "score", date_column = "month" }
            "#,
        )
        .unwrap();
        assert_eq!(c.censor_set, CensorSet::Range { first: 25, last: 37 });
        assert_eq!(c.gls.iterations, 2);
        let s = c.series_from_values(vec![0.0; 60]).unwrap();
        assert_eq!(c.window(&s).unwrap().t_star, 31);
    }

    #[test]
    fn rejects_unknown_and_partial() {
        assert!(AnalysisConfig::from_toml("tet = 31\nbefore = 6\nafter = 6\nbogus = 1\n").is_err());
        let mut c = AnalysisConfig::new(Tet::Index(31), 6, 6);
        c.start_month = Some(3);
        assert!(c.start().is_err());
        c.start_year = Some(2008);
        c.start_month = Some(13);
        assert!(c.start().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut c = AnalysisConfig::new("2010-05".parse().unwrap(), 3, 4);
        c.start_month = Some(1);
        c.start_year = Some(2008);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"tet\":\"2010-05\""), "{text}");
        assert_eq!(AnalysisConfig::from_json(&text).unwrap(), c);
        let s = c.series_from_values(vec![0.0; 60]).unwrap();
        assert_eq!(c.tet.resolve(&s).unwrap(), 29);
    }

    #[test]
    fn tet_parsing() {
        assert_eq!("31".parse::<Tet>().unwrap(), Tet::Index(31));
        assert!("July".parse::<Tet>().is_err());
    }
}
