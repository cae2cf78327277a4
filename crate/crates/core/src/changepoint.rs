//! Stage one: two-phase segmented mean with an estimated change point.
//!
//! For every candidate `q` the series is split into `1..q-1` and `q..T`, a
//! straight line is fit to each phase by OLS, and the Gaussian likelihood with
//! separate phase variances is profiled. The change point is the candidate
//! with the largest profile log-likelihood.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{welch_df, Estimate};
use crate::types::{validate_series, CandidateWindow, TimeSeries};

/// Minimum points for a line fit with one residual degree of freedom.
pub const MIN_PHASE_LEN: usize = 3;

/// Relative floor on the MLE variance inside the log-likelihood.
pub const VARIANCE_FLOOR_FACTOR: f64 = 1e-12;

/// OLS line fit over one contiguous phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PhaseFit {
    /// First time index of the phase (1-based, inclusive).
    pub first: usize,
    /// Last time index of the phase (inclusive).
    pub last: usize,
    pub n: usize,
    pub intercept: f64,
    pub slope: f64,
    pub rss: f64,
    /// Covariance of `(intercept, slope)`, scaled by `sigma_sq_unbiased`.
    pub cov: [[f64; 2]; 2],
    /// `rss / n`
    pub sigma_sq_mle: f64,
    /// `rss / (n - 2)`
    pub sigma_sq_unbiased: f64,
    pub dof: usize,
    pub time_mean: f64,
    /// Centered sum of squares of the time index.
    pub sxx: f64,
}

impl PhaseFit {
    /// Fits `y = a + b t` over the 1-based index range `times`.
    pub fn fit(series: &TimeSeries, times: RangeInclusive<usize>, phase: &'static str) -> Result<Self> {
        let (first, last) = (*times.start(), *times.end());
        let n = if last >= first { last - first + 1 } else { 0 };
        if n < MIN_PHASE_LEN {
            return Err(Error::PhaseTooShort {
                phase,
                len: n,
                min: MIN_PHASE_LEN,
            });
        }
        if first == 0 || last > series.len() {
            return Err(Error::IndexOutOfRange {
                index: if first == 0 { 0 } else { last },
                len: series.len(),
            });
        }
        let y = &series.values()[first - 1..last];
        let nf = n as f64;
        let time_mean = (first + last) as f64 / 2.0;
        let y_mean = y.iter().sum::<f64>() / nf;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (i, &v) in y.iter().enumerate() {
            let dt = (first + i) as f64 - time_mean;
            sxx += dt * dt;
            sxy += dt * (v - y_mean);
        }
        debug_assert!(sxx > 0.0, "contiguous integer times are never constant");
        let slope = sxy / sxx;
        let intercept = y_mean - slope * time_mean;
        let rss: f64 = y
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let e = v - (intercept + slope * (first + i) as f64);
                e * e
            })
            .sum();
        let dof = n - 2;
        let sigma_sq_unbiased = rss / dof as f64;
        let cov = [
            [
                sigma_sq_unbiased * (1.0 / nf + time_mean * time_mean / sxx),
                -sigma_sq_unbiased * time_mean / sxx,
            ],
            [-sigma_sq_unbiased * time_mean / sxx, sigma_sq_unbiased / sxx],
        ];
        Ok(Self {
            first,
            last,
            n,
            intercept,
            slope,
            rss,
            cov,
            sigma_sq_mle: rss / nf,
            sigma_sq_unbiased,
            dof,
            time_mean,
            sxx,
        })
    }

    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }

    /// Variance of the fitted mean at `t`.
    pub fn prediction_variance(&self, t: f64) -> f64 {
        self.cov[0][0] + t * t * self.cov[1][1] + 2.0 * t * self.cov[0][1]
    }

    /// Leverage of observation `t` within this phase.
    pub fn leverage(&self, t: f64) -> f64 {
        let d = t - self.time_mean;
        1.0 / self.n as f64 + d * d / self.sxx
    }
}

/// Fits pre-phase `1..q-1` and post-phase `q..T` separately.
pub fn ols_segmented_fit(series: &TimeSeries, q: usize) -> Result<(PhaseFit, PhaseFit)> {
    if q == 0 || q > series.len() {
        return Err(Error::IndexOutOfRange {
            index: q,
            len: series.len(),
        });
    }
    let pre = PhaseFit::fit(series, 1..=q - 1, "pre")?;
    let post = PhaseFit::fit(series, q..=series.len(), "post")?;
    Ok((pre, post))
}

/// Variance floor for a series: `1e-12` times its sample variance (or times 1
/// when the series is constant).
pub fn variance_floor(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let scale = if values.len() > 1 {
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var > 0.0 {
            var
        } else {
            1.0
        }
    } else {
        1.0
    };
    VARIANCE_FLOOR_FACTOR * scale
}

/// Profile log-likelihood at one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ProfilePoint {
    pub q: usize,
    pub loglik: f64,
    /// A phase variance hit the floor.
    pub near_degenerate: bool,
}

fn phase_loglik(n: usize, sigma_sq: f64) -> f64 {
    -(n as f64 / 2.0) * ((2.0 * std::f64::consts::PI * sigma_sq).ln() + 1.0)
}

fn profile_from_fits(q: usize, pre: &PhaseFit, post: &PhaseFit, floor: f64) -> ProfilePoint {
    let near_degenerate = pre.sigma_sq_mle < floor || post.sigma_sq_mle < floor;
    let loglik = phase_loglik(pre.n, pre.sigma_sq_mle.max(floor)) + phase_loglik(post.n, post.sigma_sq_mle.max(floor));
    ProfilePoint {
        q,
        loglik,
        near_degenerate,
    }
}

/// Maximized Gaussian log-likelihood given change point `q`, with OLS
/// coefficients and MLE phase variances.
pub fn profile_loglik(series: &TimeSeries, q: usize) -> Result<ProfilePoint> {
    let (pre, post) = ols_segmented_fit(series, q)?;
    Ok(profile_from_fits(q, &pre, &post, variance_floor(series.values())))
}

/// How the per-candidate fits are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Estimation route that produced a [`MeanFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Ols,
    /// Quasi-differenced refit with separate pre/post AR(1) coefficients.
    GlsSeparate,
    /// Quasi-differenced refit with one AR(1) coefficient across the series.
    GlsOverall,
}

/// Fitted two-phase mean at the selected change point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MeanFit {
    pub window: CandidateWindow,
    pub tau_hat: usize,
    pub beta0: f64,
    pub beta1: f64,
    /// Post minus pre intercept.
    pub intercept_change: f64,
    /// Post minus pre slope.
    pub slope_change: f64,
    /// Unbiased pre-phase error variance.
    pub sigma1_sq: f64,
    /// Unbiased post-phase error variance.
    pub sigma2_sq: f64,
    pub loglik: f64,
    pub near_degenerate: bool,
    pub pre: PhaseFit,
    pub post: PhaseFit,
    /// Profile log-likelihood for every candidate, in index order.
    pub trace: Vec<ProfilePoint>,
    pub method: FitMethod,
}

impl MeanFit {
    pub(crate) fn from_phases(window: CandidateWindow, tau_hat: usize, pre: PhaseFit, post: PhaseFit, profile: ProfilePoint, trace: Vec<ProfilePoint>, method: FitMethod) -> Self {
        Self {
            window,
            tau_hat,
            beta0: pre.intercept,
            beta1: pre.slope,
            intercept_change: post.intercept - pre.intercept,
            slope_change: post.slope - pre.slope,
            sigma1_sq: pre.sigma_sq_unbiased,
            sigma2_sq: post.sigma_sq_unbiased,
            loglik: profile.loglik,
            near_degenerate: profile.near_degenerate,
            pre,
            post,
            trace,
            method,
        }
    }

    /// Fitted mean at 1-based index `t`.
    pub fn mean_at(&self, t: usize) -> f64 {
        if t < self.tau_hat {
            self.pre.predict(t as f64)
        } else {
            self.post.predict(t as f64)
        }
    }

    pub fn delay(&self) -> i64 {
        self.tau_hat as i64 - self.window.t_star as i64
    }
}

/// Selects the change point in the candidate window by maximizing the
/// profile log-likelihood. Ties go to the smallest candidate.
pub fn estimate_change_point(series: &TimeSeries, window: &CandidateWindow) -> Result<MeanFit> {
    estimate_change_point_with(series, window, Execution::default())
}

pub fn estimate_change_point_with(series: &TimeSeries, window: &CandidateWindow, execution: Execution) -> Result<MeanFit> {
    validate_series(series, window).into_result()?;
    let floor = variance_floor(series.values());
    let eval = |q: usize| -> Result<(PhaseFit, PhaseFit, ProfilePoint)> {
        let (pre, post) = ols_segmented_fit(series, q)?;
        let point = profile_from_fits(q, &pre, &post, floor);
        Ok((pre, post, point))
    };
    let fits: Vec<_> = match execution {
        Execution::Parallel => window.candidates().into_par_iter().map(eval).collect::<Result<_>>()?,
        Execution::Serial => window.candidates().map(eval).collect::<Result<_>>()?,
    };

    let trace: Vec<ProfilePoint> = fits.iter().map(|f| f.2).collect();
    let best = argmax_first(&trace);
    let (pre, post, point) = fits.into_iter().nth(best).expect("non-empty candidate set");
    Ok(MeanFit::from_phases(*window, point.q, pre, post, point, trace, FitMethod::Ols))
}

/// Position of the largest log-likelihood; the earliest wins ties.
fn argmax_first(trace: &[ProfilePoint]) -> usize {
    let mut best = 0;
    for (i, p) in trace.iter().enumerate() {
        if p.loglik > trace[best].loglik {
            best = i;
        }
    }
    best
}

/// Effect-size inference for a fitted two-phase mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EffectEstimates {
    /// `-(intercept_change + slope_change * tau_hat)`; positive when the
    /// post-phase mean starts below the extrapolated pre-phase line.
    pub level_change: Estimate,
    pub trend_change: Estimate,
    pub intercept_change: Estimate,
    pub intercept_pre: Estimate,
    pub slope_pre: Estimate,
    pub intercept_post: Estimate,
    pub slope_post: Estimate,
    pub tau_hat: usize,
    /// `tau_hat - t_star`
    pub delay: i64,
}

/// Level, trend and intercept contrasts between two independent phase fits,
/// with the level evaluated at index `at`.
pub(crate) fn phase_contrasts(pre: &PhaseFit, post: &PhaseFit, at: f64) -> Result<(Estimate, Estimate, Estimate)> {
    if pre.dof == 0 || post.dof == 0 {
        return Err(Error::Degenerate("phase without residual degrees of freedom".into()));
    }
    let (d1, d2) = (pre.dof as f64, post.dof as f64);

    let intercept_change = post.intercept - pre.intercept;
    let slope_change = post.slope - pre.slope;
    let level = -(intercept_change + slope_change * at);

    let contrast = |v1: f64, v2: f64, est: f64| {
        let df = welch_df(&[(v1, d1), (v2, d2)]);
        Estimate::t(est, (v1 + v2).max(0.0).sqrt(), df)
    };
    let level_change = contrast(pre.prediction_variance(at), post.prediction_variance(at), level);
    let trend_change = contrast(pre.cov[1][1], post.cov[1][1], slope_change);
    let intercept = contrast(pre.cov[0][0], post.cov[0][0], intercept_change);
    Ok((level_change, trend_change, intercept))
}

/// Point estimates, standard errors, intervals and p-values for the effect
/// sizes of `fit`, treating the two phase fits as independent.
pub fn effect_sizes(fit: &MeanFit) -> Result<EffectEstimates> {
    let (level_change, trend_change, intercept_change) = phase_contrasts(&fit.pre, &fit.post, fit.tau_hat as f64)?;
    let coef = |phase: &PhaseFit, est: f64, var: f64| Estimate::t(est, var.max(0.0).sqrt(), phase.dof as f64);
    Ok(EffectEstimates {
        level_change,
        trend_change,
        intercept_change,
        intercept_pre: coef(&fit.pre, fit.pre.intercept, fit.pre.cov[0][0]),
        slope_pre: coef(&fit.pre, fit.pre.slope, fit.pre.cov[1][1]),
        intercept_post: coef(&fit.post, fit.post.intercept, fit.post.cov[0][0]),
        slope_post: coef(&fit.post, fit.post.slope, fit.post.cov[1][1]),
        tau_hat: fit.tau_hat,
        delay: fit.delay(),
    })
}

/// Level change `-(delta + slope_delta * tau)` from raw coefficients.
pub fn level_change(intercept_change: f64, slope_change: f64, tau: f64) -> f64 {
    -(intercept_change + slope_change * tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(values, 1, 2008).unwrap()
    }

    #[test]
    fn flat_series() {
        let s = series(vec![4.5; 20]);
        let (pre, post) = ols_segmented_fit(&s, 9).unwrap();
        for p in [&pre, &post] {
            assert!(p.slope.abs() < 1e-12);
            assert!((p.intercept - 4.5).abs() < 1e-12);
        }
        assert!((post.intercept - pre.intercept).abs() < 1e-12);
    }

    #[test]
    fn single_line_gives_no_change() {
        let s = series((1..=20).map(|t| 2.0 + 0.5 * t as f64).collect());
        let (pre, post) = ols_segmented_fit(&s, 10).unwrap();
        for p in [&pre, &post] {
            assert!((p.intercept - 2.0).abs() < 1e-10);
            assert!((p.slope - 0.5).abs() < 1e-12);
            assert!(p.rss < 1e-20);
        }
        assert_eq!((pre.first, pre.last, post.first, post.last), (1, 9, 10, 20));
    }

    #[test]
    fn short_phase_rejected() {
        let s = series(vec![1.0; 12]);
        assert!(matches!(ols_segmented_fit(&s, 3), Err(Error::PhaseTooShort { phase: "pre", len: 2, .. })));
        assert!(matches!(ols_segmented_fit(&s, 11), Err(Error::PhaseTooShort { phase: "post", len: 2, .. })));
        assert!(ols_segmented_fit(&s, 13).is_err());
    }

    #[test]
    fn noiseless_break_is_near_degenerate() {
        let s = series((1..=30).map(|t| if t < 15 { 1.0 + t as f64 } else { 40.0 - t as f64 }).collect());
        let p = profile_loglik(&s, 15).unwrap();
        assert!(p.near_degenerate);
        assert!(p.loglik.is_finite());
    }

    #[test]
    fn singleton_window_returns_t_star() {
        let s = series((1..=30).map(|t| (t as f64 * 1.7).sin()).collect());
        let fit = estimate_change_point(&s, &CandidateWindow::new(14, 0, 0)).unwrap();
        assert_eq!(fit.tau_hat, 14);
        assert_eq!(fit.trace.len(), 1);
        assert_eq!(fit.delay(), 0);
    }

    #[test]
    fn invalid_window_propagates() {
        let s = series(vec![1.0; 20]);
        assert!(matches!(estimate_change_point(&s, &CandidateWindow::new(8, 3, 3)), Err(Error::Validation(_))));
    }

    #[test]
    fn ties_pick_smallest_candidate() {
        let point = |q, loglik| ProfilePoint {
            q,
            loglik,
            near_degenerate: false,
        };
        let trace = [point(10, -5.0), point(11, -2.0), point(12, -3.0), point(13, -2.0)];
        assert_eq!(argmax_first(&trace), 1);
        assert_eq!(argmax_first(&[point(4, 1.0), point(5, 1.0)]), 0);
    }

    #[test]
    fn constant_series_is_near_degenerate() {
        let s = series(vec![3.0; 30]);
        let fit = estimate_change_point(&s, &CandidateWindow::new(15, 4, 4)).unwrap();
        assert!(fit.near_degenerate);
        assert!(fit.window.contains(fit.tau_hat));
    }

    #[test]
    fn level_change_worked_value() {
        let v = level_change(2.89, -0.34, 29.0);
        assert!((v - 6.97).abs() < 1e-12);
        assert!((v - 7.00).abs() <= 0.1);
        assert_eq!(level_change(0.0, 0.0, 29.0), 0.0);
    }

    #[test]
    fn zero_effects() {
        let s = series((1..=30).map(|t| 1.0 + 0.2 * t as f64 + if t % 2 == 0 { 0.1 } else { -0.1 }).collect());
        let fit = estimate_change_point(&s, &CandidateWindow::new(15, 0, 0)).unwrap();
        let eff = effect_sizes(&fit).unwrap();
        assert_eq!(eff.level_change.estimate, -(fit.intercept_change + fit.slope_change * 15.0));
        assert!(eff.level_change.estimate.abs() < 0.5);
        assert!(eff.trend_change.estimate.abs() < 0.05);
        for e in [eff.level_change, eff.trend_change, eff.intercept_change] {
            assert!(e.ci_lower <= e.estimate && e.estimate <= e.ci_upper);
            assert!((0.0..=1.0).contains(&e.p_value));
        }
    }
}
