//! Comparator models: segmented regression at the intervention time, with
//! the phase-in period censored, in the alternative "time since intervention"
//! parameterization, and a single quadratic trend with no change point.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::changepoint::{phase_contrasts, MeanFit, PhaseFit};
use crate::error::{Error, Result};
use crate::inference::Estimate;
use crate::linalg::least_squares;
use crate::types::{CandidateWindow, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    FixedTau,
    Censored,
    Quadratic,
    AltParam,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::FixedTau => "fixed_tau",
            BaselineKind::Censored => "censored",
            BaselineKind::Quadratic => "quadratic",
            BaselineKind::AltParam => "alt_param",
        })
    }
}

/// Coefficients of a comparator model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Coefficients {
    TwoPhase {
        pre: PhaseFit,
        post: PhaseFit,
    },
    /// `mu = b0 + b1 t` before `t_star`, `(b0 + psi) + b1 t + psi_slope (t - t_star + 1)` after.
    AltParam {
        t_star: usize,
        beta0: Estimate,
        beta1: Estimate,
        psi: Estimate,
        psi_slope: Estimate,
    },
    /// `mu = b0 + b1 t + b2 t^2`
    Quadratic {
        beta0: Estimate,
        beta1: Estimate,
        beta2: Estimate,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FittedPoint {
    pub t: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BaselineFit {
    pub kind: BaselineKind,
    pub coefficients: Coefficients,
    /// Fitted mean over the indices that entered the fit.
    pub fitted: Vec<FittedPoint>,
    pub rss: f64,
    /// Residual degrees of freedom: fitted points minus mean parameters.
    pub df: usize,
    /// `rss / df`
    pub mse: f64,
    /// Index at which the level change is evaluated, for two-phase models.
    pub level_at: Option<usize>,
    pub level_change: Option<Estimate>,
    pub trend_change: Option<Estimate>,
}

fn two_phase(kind: BaselineKind, pre: PhaseFit, post: PhaseFit, level_at: usize) -> Result<BaselineFit> {
    let fitted = (pre.first..=pre.last)
        .map(|t| FittedPoint {
            t,
            value: pre.predict(t as f64),
        })
        .chain((post.first..=post.last).map(|t| FittedPoint {
            t,
            value: post.predict(t as f64),
        }))
        .collect();
    let rss = pre.rss + post.rss;
    let df = pre.n + post.n - 4;
    let (level, trend, _) = phase_contrasts(&pre, &post, level_at as f64)?;
    Ok(BaselineFit {
        kind,
        fitted,
        rss,
        df,
        mse: rss / df as f64,
        level_at: Some(level_at),
        level_change: Some(level),
        trend_change: Some(trend),
        coefficients: Coefficients::TwoPhase { pre, post },
    })
}

/// Segmented regression with the change point fixed at the intervention time.
pub fn segmented_fixed(series: &TimeSeries, t_star: usize) -> Result<BaselineFit> {
    let (pre, post) = crate::changepoint::ols_segmented_fit(series, t_star)?;
    two_phase(BaselineKind::FixedTau, pre, post, t_star)
}

/// Indices removed from the censored model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(try_from = "String", into = "String")]
pub enum CensorSet {
    /// The candidate window.
    #[default]
    Window,
    /// No indices; the model reduces to [`segmented_fixed`].
    Empty,
    /// `first..=last`
    Range { first: usize, last: usize },
}

impl fmt::Display for CensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CensorSet::Window => f.write_str("window"),
            CensorSet::Empty => f.write_str("none"),
            CensorSet::Range { first, last } => write!(f, "{first}:{last}"),
        }
    }
}

impl FromStr for CensorSet {
    type Err = Error;

    /// `window`, `none`, or `first:last`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "window" => Ok(CensorSet::Window),
            "none" | "" => Ok(CensorSet::Empty),
            other => {
                let bad = || Error::Config(format!("censor set must be `window`, `none` or `first:last`, got {other:?}"));
                let (a, b) = other.split_once(':').ok_or_else(bad)?;
                let first = a.trim().parse().map_err(|_| bad())?;
                let last = b.trim().parse().map_err(|_| bad())?;
                if first == 0 || last < first {
                    return Err(bad());
                }
                Ok(CensorSet::Range { first, last })
            }
        }
    }
}

impl TryFrom<String> for CensorSet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CensorSet> for String {
    fn from(c: CensorSet) -> String {
        c.to_string()
    }
}

impl CensorSet {
    /// Inclusive censored range, if any.
    pub fn resolve(&self, window: &CandidateWindow) -> Option<(usize, usize)> {
        match *self {
            CensorSet::Window => Some((window.first(), window.last())),
            CensorSet::Empty => None,
            CensorSet::Range { first, last } => Some((first, last)),
        }
    }
}

/// Segmented regression with the censored indices removed: pre-phase on
/// `t < first`, post-phase on `t > last`.
pub fn segmented_censored(series: &TimeSeries, window: &CandidateWindow, censor: CensorSet) -> Result<BaselineFit> {
    let Some((first, last)) = censor.resolve(window) else {
        let mut fit = segmented_fixed(series, window.t_star)?;
        fit.kind = BaselineKind::Censored;
        return Ok(fit);
    };
    if last >= series.len() {
        return Err(Error::PhaseTooShort {
            phase: "post",
            len: 0,
            min: 3,
        });
    }
    let pre = PhaseFit::fit(series, 1..=first.saturating_sub(1), "pre")?;
    let post = PhaseFit::fit(series, last + 1..=series.len(), "post")?;
    two_phase(BaselineKind::Censored, pre, post, last + 1)
}

fn coefficient_estimates(ls: &crate::linalg::LeastSquares, s2: f64, df: usize) -> Vec<Estimate> {
    (0..ls.coefficients.len())
        .map(|j| Estimate::t(ls.coefficients[j], (s2 * ls.xtx_inv[(j, j)]).max(0.0).sqrt(), df as f64))
        .collect()
}

/// Segmented regression in the `psi, psi_slope` parameterization, fit jointly
/// over the whole series.
pub fn alt_param_fit(series: &TimeSeries, t_star: usize) -> Result<BaselineFit> {
    let len = series.len();
    if t_star < 4 || t_star + 2 > len {
        return Err(Error::PhaseTooShort {
            phase: if t_star < 4 { "pre" } else { "post" },
            len: if t_star < 4 { t_star.saturating_sub(1) } else { (len + 1).saturating_sub(t_star) },
            min: 3,
        });
    }
    let design = DMatrix::from_fn(len, 4, |i, j| {
        let t = (i + 1) as f64;
        let after = i + 1 >= t_star;
        match j {
            0 => 1.0,
            1 => t,
            2 if after => 1.0,
            3 if after => t - t_star as f64 + 1.0,
            _ => 0.0,
        }
    });
    let y = DVector::from_column_slice(series.values());
    let ls = least_squares(design, &y)?;
    let df = len - 4;
    let s2 = ls.rss / df as f64;
    let est = coefficient_estimates(&ls, s2, df);
    let fitted = (1..=len)
        .map(|t| FittedPoint {
            t,
            value: ls.fitted[t - 1],
        })
        .collect();
    Ok(BaselineFit {
        kind: BaselineKind::AltParam,
        coefficients: Coefficients::AltParam {
            t_star,
            beta0: est[0],
            beta1: est[1],
            psi: est[2],
            psi_slope: est[3],
        },
        fitted,
        rss: ls.rss,
        df,
        mse: ls.rss / df as f64,
        level_at: None,
        level_change: None,
        trend_change: None,
    })
}

/// Maps alternative-parameterization coefficients to the segmented form:
/// `delta = psi - (t* - 1) psi_slope`, `slope_delta = psi_slope`.
pub fn equivalence_map(alt: &BaselineFit) -> Result<(f64, f64)> {
    match &alt.coefficients {
        Coefficients::AltParam {
            t_star, psi, psi_slope, ..
        } => Ok(map_alt_param(psi.estimate, psi_slope.estimate, *t_star)),
        _ => Err(Error::InvalidInput(format!("{} fit is not in the alternative parameterization", alt.kind))),
    }
}

/// `(psi - (t* - 1) psi_slope, psi_slope)`
pub fn map_alt_param(psi: f64, psi_slope: f64, t_star: usize) -> (f64, f64) {
    (psi - (t_star as f64 - 1.0) * psi_slope, psi_slope)
}

/// Quadratic trend `b0 + b1 t + b2 t^2` with no change point, fit on a
/// centered and scaled time column and mapped back to raw `t`.
pub fn quadratic_fit(series: &TimeSeries) -> Result<BaselineFit> {
    let len = series.len();
    if len < 4 {
        return Err(Error::PhaseTooShort {
            phase: "series",
            len,
            min: 4,
        });
    }
    let m = (len + 1) as f64 / 2.0;
    let s = ((1..=len).map(|t| (t as f64 - m).powi(2)).sum::<f64>() / len as f64).sqrt();
    let design = DMatrix::from_fn(len, 3, |i, j| ((i + 1) as f64 - m).powi(j as i32) / s.powi(j as i32));
    let y = DVector::from_column_slice(series.values());
    let ls = least_squares(design, &y)?;
    let df = len - 3;
    let s2 = ls.rss / df as f64;

    // raw = A * scaled
    let a = nalgebra::Matrix3::new(
        1.0,
        -m / s,
        m * m / (s * s),
        0.0,
        1.0 / s,
        -2.0 * m / (s * s),
        0.0,
        0.0,
        1.0 / (s * s),
    );
    let c = nalgebra::Vector3::new(ls.coefficients[0], ls.coefficients[1], ls.coefficients[2]);
    let raw = a * c;
    let cov_scaled = nalgebra::Matrix3::from_fn(|i, j| s2 * ls.xtx_inv[(i, j)]);
    let cov = a * cov_scaled * a.transpose();
    let est = |j: usize| Estimate::t(raw[j], cov[(j, j)].max(0.0).sqrt(), df as f64);

    let fitted = (1..=len)
        .map(|t| FittedPoint {
            t,
            value: ls.fitted[t - 1],
        })
        .collect();
    Ok(BaselineFit {
        kind: BaselineKind::Quadratic,
        coefficients: Coefficients::Quadratic {
            beta0: est(0),
            beta1: est(1),
            beta2: est(2),
        },
        fitted,
        rss: ls.rss,
        df,
        mse: ls.rss / df as f64,
        level_at: None,
        level_change: None,
        trend_change: None,
    })
}

/// One model's row in an MSE comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ModelEntry {
    pub model: String,
    pub rss: f64,
    pub df: usize,
}

impl ModelEntry {
    pub fn from_mean_fit(name: impl Into<String>, fit: &MeanFit) -> Self {
        Self {
            model: name.into(),
            rss: fit.pre.rss + fit.post.rss,
            df: (fit.pre.n + fit.post.n).saturating_sub(4),
        }
    }

    pub fn from_baseline(fit: &BaselineFit) -> Self {
        Self {
            model: fit.kind.to_string(),
            rss: fit.rss,
            df: fit.df,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ComparisonRow {
    pub model: String,
    pub rss: f64,
    pub df: usize,
    pub mse: f64,
    /// 1 is the smallest MSE; equal MSEs share a rank.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ModelComparison {
    /// Rows sorted by MSE ascending, ties in input order.
    pub rows: Vec<ComparisonRow>,
}

impl ModelComparison {
    pub fn mse(&self, model: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.model == model).map(|r| r.mse)
    }
}

/// Ranks models by residual sum of squares over residual degrees of freedom.
pub fn mse_compare(entries: &[ModelEntry]) -> Result<ModelComparison> {
    if entries.len() < 2 {
        return Err(Error::InvalidInput("at least two models are needed for a comparison".into()));
    }
    if let Some(e) = entries.iter().find(|e| e.df == 0) {
        return Err(Error::Degenerate(format!("{} has no residual degrees of freedom", e.model)));
    }
    let mut rows: Vec<ComparisonRow> = entries
        .iter()
        .map(|e| ComparisonRow {
            model: e.model.clone(),
            rss: e.rss,
            df: e.df,
            mse: e.rss / e.df as f64,
            rank: 0,
        })
        .collect();
    rows.sort_by(|a, b| a.mse.total_cmp(&b.mse));
    for i in 0..rows.len() {
        rows[i].rank = if i > 0 && rows[i].mse == rows[i - 1].mse {
            rows[i - 1].rank
        } else {
            i + 1
        };
    }
    Ok(ModelComparison { rows })
}
