//! Stage two: the error process around the fitted mean.
//!
//! Residuals are split at the estimated change point and each phase gets its
//! own AR(1) fit. A nested F-test compares one AR(1) coefficient across the
//! series with one per phase, and, when neither phase shows autocorrelation,
//! the phase variances are compared with an F-test.

use nalgebra::{DMatrix, DVector};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::changepoint::{FitMethod, MeanFit, PhaseFit};
use crate::error::{Error, Result};
use crate::inference::{f_cdf, f_upper_tail, Estimate, ALPHA};
use crate::linalg::least_squares;
use crate::types::TimeSeries;

/// Minimum segment length for an AR(1) fit.
pub const MIN_AR_SEGMENT: usize = 4;

/// Sample autocorrelations of one stretch of residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Acf {
    pub n: usize,
    pub max_lag: usize,
    /// Autocorrelation at lags `1..=max_lag`.
    pub values: Vec<f64>,
    /// Half-width of the white-noise band, `2 / sqrt(n)`.
    pub band: f64,
    /// Lags whose autocorrelation falls outside the band.
    pub outside: usize,
    /// Lag 1 inside the band and at most `ceil(max_lag / 20)` lags outside.
    pub white_noise: bool,
}

/// Default ACF depth: `min(15, n / 4)`, at least one lag.
pub fn default_max_lag(n: usize) -> usize {
    (n / 4).clamp(1, 15)
}

pub fn acf(x: &[f64], max_lag: usize) -> Acf {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let max_lag = max_lag.min(n.saturating_sub(1));
    let values: Vec<f64> = (1..=max_lag)
        .map(|h| {
            if c0 > 0.0 {
                x.iter()
                    .zip(&x[h..])
                    .map(|(a, b)| (a - mean) * (b - mean))
                    .sum::<f64>()
                    / c0
            } else {
                0.0
            }
        })
        .collect();
    let band = 2.0 / (n as f64).sqrt();
    let outside = values.iter().filter(|v| v.abs() > band).count();
    let allowed = max_lag.div_ceil(20);
    let white_noise = values.first().is_none_or(|v| v.abs() <= band) && outside <= allowed;
    Acf {
        n,
        max_lag,
        values,
        band,
        outside,
        white_noise,
    }
}

/// Residuals of a mean fit with per-phase diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ResidualSet {
    /// `Y_t - mu_hat_t` for `t = 1..=T`.
    pub residuals: Vec<f64>,
    pub tau_hat: usize,
    /// Internally studentized residuals, using each phase's own fit; `None`
    /// where the leverage is 1 or the phase has zero residual variance.
    pub studentized: Vec<Option<f64>>,
    pub acf_pre: Acf,
    pub acf_post: Acf,
    pub acf_all: Acf,
}

impl ResidualSet {
    /// Residuals at `1..tau_hat-1`.
    pub fn pre(&self) -> &[f64] {
        &self.residuals[..self.tau_hat - 1]
    }

    /// Residuals at `tau_hat..=T`.
    pub fn post(&self) -> &[f64] {
        &self.residuals[self.tau_hat - 1..]
    }
}

pub fn compute_residuals(series: &TimeSeries, fit: &MeanFit) -> ResidualSet {
    let residuals: Vec<f64> = (1..=series.len()).map(|t| series.at(t) - fit.mean_at(t)).collect();
    let tau = fit.tau_hat;

    let studentize = |phase: &PhaseFit, range: std::ops::RangeInclusive<usize>, out: &mut Vec<Option<f64>>| {
        let n = range.clone().count();
        let rss: f64 = range.clone().map(|t| residuals[t - 1].powi(2)).sum();
        let s2 = rss / (n as f64 - 2.0);
        for t in range {
            let h = phase.leverage(t as f64);
            let denom = (s2 * (1.0 - h)).sqrt();
            out.push((h < 1.0 && denom > 0.0).then(|| residuals[t - 1] / denom));
        }
    };
    let mut studentized = Vec::with_capacity(series.len());
    studentize(&fit.pre, 1..=tau - 1, &mut studentized);
    studentize(&fit.post, tau..=series.len(), &mut studentized);

    let pre = &residuals[..tau - 1];
    let post = &residuals[tau - 1..];
    ResidualSet {
        acf_pre: acf(pre, default_max_lag(pre.len())),
        acf_post: acf(post, default_max_lag(post.len())),
        acf_all: acf(&residuals, default_max_lag(residuals.len())),
        residuals,
        tau_hat: tau,
        studentized,
    }
}

/// AR(1) conditional estimates for one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Ar1Estimate {
    pub phi: f64,
    pub innov_var: f64,
    pub n: usize,
}

/// Conditional AR(1) fit of a residual segment `x_1..x_n`:
///
/// `phi = sum_{i=2}^{n} (x_i - a)(x_{i-1} - b) / sum_{i=2}^{n} (x_i - a)^2`
/// with `a`, `b` the means of `x_2..x_n` and `x_1..x_{n-1}`; then with
/// `W_i = x_i - phi x_{i-1}` and `w` the mean of `W_2..W_n`,
/// `sigma^2 = 1/(n-2) sum_{i=3}^{n} [(W_i - w) - phi (W_{i-1} - w)]^2`.
pub fn ar1_fit(segment: &[f64]) -> Result<Ar1Estimate> {
    let n = segment.len();
    if n < MIN_AR_SEGMENT {
        return Err(Error::PhaseTooShort {
            phase: "AR(1) segment",
            len: n,
            min: MIN_AR_SEGMENT,
        });
    }
    let lead = &segment[1..];
    let lag = &segment[..n - 1];
    let lead_mean = lead.iter().sum::<f64>() / lead.len() as f64;
    let lag_mean = lag.iter().sum::<f64>() / lag.len() as f64;
    let (num, den) = lead.iter().zip(lag).fold((0.0, 0.0), |(num, den), (x, y)| {
        let d = x - lead_mean;
        (num + d * (y - lag_mean), den + d * d)
    });
    if den == 0.0 {
        return Err(Error::Degenerate("constant residual segment".into()));
    }
    let phi = num / den;

    let w: Vec<f64> = lead.iter().zip(lag).map(|(x, y)| x - phi * y).collect();
    let w_mean = w.iter().sum::<f64>() / w.len() as f64;
    let ss: f64 = w
        .windows(2)
        .map(|p| ((p[1] - w_mean) - phi * (p[0] - w_mean)).powi(2))
        .sum();
    Ok(Ar1Estimate {
        phi,
        innov_var: ss / (n - 2) as f64,
        n,
    })
}

/// One coefficient across the series versus one per phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NestedFTest {
    pub statistic: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
    pub rss_reduced: f64,
    pub rss_full: f64,
    /// Least-squares coefficient over `t = 2..=T`.
    pub phi_reduced: f64,
    /// Least-squares coefficient over `t = 2..tau-1`.
    pub phi_pre: f64,
    /// Least-squares coefficient over `t = tau+1..=T`.
    pub phi_post: f64,
}

/// Uncentered least-squares AR(1) coefficient and its RSS over the given
/// `(R_t, R_{t-1})` pairs.
fn ls_ar1(pairs: &[(f64, f64)]) -> (f64, f64) {
    let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
    let syy: f64 = pairs.iter().map(|(_, y)| y * y).sum();
    let phi = if syy > 0.0 { sxy / syy } else { 0.0 };
    let rss = pairs.iter().map(|(x, y)| (x - phi * y).powi(2)).sum();
    (phi, rss)
}

/// F statistic `((RSS_R - RSS_F) / 2) / (RSS_F / (T - 2))` on `(2, T - 2)` df.
pub fn nested_f_from_rss(rss_reduced: f64, rss_full: f64, len: usize) -> Result<(f64, usize, usize, f64)> {
    if rss_full <= 0.0 {
        return Err(Error::Degenerate("full AR model has zero residual sum of squares".into()));
    }
    if len < 3 {
        return Err(Error::PhaseTooShort {
            phase: "series",
            len,
            min: 3,
        });
    }
    let (df1, df2) = (2, len - 2);
    let statistic = ((rss_reduced - rss_full) / df1 as f64) / (rss_full / df2 as f64);
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        f_upper_tail(statistic, df1 as f64, df2 as f64)
    };
    Ok((statistic, df1, df2, p_value))
}

pub fn nested_f_test(resid: &ResidualSet) -> Result<NestedFTest> {
    let r = &resid.residuals;
    let len = r.len();
    let tau = resid.tau_hat;
    // pairs (R_t, R_{t-1}) over 1-based t in the given range
    let pairs = |from: usize, to: usize| -> Vec<(f64, f64)> { (from..=to).map(|t| (r[t - 1], r[t - 2])).collect() };
    let (phi_reduced, rss_reduced) = ls_ar1(&pairs(2, len));
    let (phi_pre, rss_pre) = ls_ar1(&pairs(2, tau - 1));
    let (phi_post, rss_post) = ls_ar1(&pairs(tau + 1, len));
    let rss_full = rss_pre + rss_post;
    debug_assert!(rss_full <= rss_reduced * (1.0 + 1e-12) + f64::MIN_POSITIVE);
    let (statistic, df1, df2, p_value) = nested_f_from_rss(rss_reduced, rss_full, len)?;
    Ok(NestedFTest {
        statistic,
        df1,
        df2,
        p_value,
        rss_reduced,
        rss_full,
        phi_reduced,
        phi_pre,
        phi_post,
    })
}

/// Pre/post AR(1) structure of the residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ArFit {
    pub phi1: Estimate,
    pub phi2: Estimate,
    /// `phi2 - phi1`
    pub nu: Estimate,
    pub innov_var_pre: f64,
    pub innov_var_post: f64,
    pub n_pre: usize,
    pub n_post: usize,
    /// `|phi1| < 1`
    pub causal_pre: bool,
    /// `|phi2| < 1`
    pub causal_post: bool,
    pub nested_f: NestedFTest,
}

impl ArFit {
    /// Neither phase coefficient differs from zero at the 5% level.
    pub fn white_noise(&self) -> bool {
        self.phi1.covers(0.0) && self.phi2.covers(0.0)
    }
}

fn phi_estimate(fit: &Ar1Estimate) -> Estimate {
    Estimate::normal(fit.phi, ((1.0 - fit.phi * fit.phi).max(0.0) / fit.n as f64).sqrt())
}

/// AR(1) fits on `1..tau-1` and `tau..T`, their difference, and the nested
/// F-test. Non-causal estimates are flagged, not clamped.
pub fn fit_stochastic(resid: &ResidualSet) -> Result<ArFit> {
    let pre = ar1_fit(resid.pre())?;
    let post = ar1_fit(resid.post())?;
    let phi1 = phi_estimate(&pre);
    let phi2 = phi_estimate(&post);
    let nu = Estimate::normal(post.phi - pre.phi, (phi1.se.powi(2) + phi2.se.powi(2)).sqrt());
    Ok(ArFit {
        phi1,
        phi2,
        nu,
        innov_var_pre: pre.innov_var,
        innov_var_post: post.innov_var,
        n_pre: pre.n,
        n_post: post.n,
        causal_pre: pre.phi.abs() < 1.0,
        causal_post: post.phi.abs() < 1.0,
        nested_f: nested_f_test(resid)?,
    })
}

/// Pre/post residual variance comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VarianceComparison {
    pub s1: f64,
    pub s2: f64,
    pub n_pre: usize,
    pub n_post: usize,
    /// `s1 / s2`
    pub f_stat: f64,
    pub df1: usize,
    pub df2: usize,
    /// Two-sided; `None` when the test does not apply.
    pub p_value: Option<f64>,
    pub applicable: bool,
    pub reason: Option<String>,
}

/// F-test of `s1 / s2` on `(n_pre - 3, n_post - 3)` df with a doubled-tail
/// two-sided p-value.
pub fn variance_ratio_test(s1: f64, s2: f64, n_pre: usize, n_post: usize) -> Result<VarianceComparison> {
    if n_pre < 4 || n_post < 4 {
        return Err(Error::PhaseTooShort {
            phase: if n_pre < 4 { "pre" } else { "post" },
            len: n_pre.min(n_post),
            min: 4,
        });
    }
    if s2.is_nan() || s2 <= 0.0 {
        return Err(Error::Degenerate("post-phase variance is zero".into()));
    }
    let (df1, df2) = (n_pre - 3, n_post - 3);
    let f_stat = s1 / s2;
    let lower = f_cdf(f_stat, df1 as f64, df2 as f64);
    let p_value = (2.0 * lower.min(1.0 - lower)).min(1.0);
    Ok(VarianceComparison {
        s1,
        s2,
        n_pre,
        n_post,
        f_stat,
        df1,
        df2,
        p_value: Some(p_value),
        applicable: true,
        reason: None,
    })
}

/// Compares the per-phase residual variances `RSS_j / (n_j - 2)`. The test
/// only applies when neither AR(1) coefficient is significant; otherwise the
/// variances are reported untested.
pub fn variance_f_test(resid: &ResidualSet, ar: &ArFit) -> Result<VarianceComparison> {
    let unbiased = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / (x.len() as f64 - 2.0);
    let (pre, post) = (resid.pre(), resid.post());
    let mut cmp = variance_ratio_test(unbiased(pre), unbiased(post), pre.len(), post.len())?;
    if !ar.white_noise() {
        cmp.applicable = false;
        cmp.p_value = None;
        cmp.reason = Some(
            "autocorrelation is significant in at least one phase; variances are estimated but not compared".into(),
        );
    }
    Ok(cmp)
}

/// Which AR(1) structure the GLS pass whitens with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlsMode {
    /// One coefficient per phase; pre refit on `2..tau-1`, post on `tau+1..T`.
    Separate { phi_pre: f64, phi_post: f64 },
    /// One coefficient across the series; refit on `2..T`.
    Overall { phi: f64 },
}

impl GlsMode {
    /// Separate phases when the nested test rejects a common coefficient.
    pub fn from_ar_fit(ar: &ArFit) -> Self {
        if ar.nested_f.p_value < ALPHA {
            GlsMode::Separate {
                phi_pre: ar.phi1.estimate,
                phi_post: ar.phi2.estimate,
            }
        } else {
            GlsMode::Overall {
                phi: ar.nested_f.phi_reduced,
            }
        }
    }
}

/// Phase fit from a quasi-differenced regression over `first..=last` with
/// columns `(1 - phi, t - phi (t - 1))`.
fn quasi_differenced_phase(series: &TimeSeries, first: usize, last: usize, phi: f64, phase: &'static str) -> Result<PhaseFit> {
    let n = (first..=last).count();
    if n < 3 {
        return Err(Error::PhaseTooShort { phase, len: n, min: 3 });
    }
    let design = DMatrix::from_fn(n, 2, |i, j| {
        let t = (first + i) as f64;
        if j == 0 {
            1.0 - phi
        } else {
            t - phi * (t - 1.0)
        }
    });
    let z = DVector::from_fn(n, |i, _| {
        let t = first + i;
        series.at(t) - phi * series.at(t - 1)
    });
    let ls = least_squares(design, &z)?;
    let s2 = ls.rss / (n - 2) as f64;
    Ok(phase_from_ls(first, last, ls.coefficients[0], ls.coefficients[1], ls.rss, n, n - 2, s2, [
        [ls.xtx_inv[(0, 0)], ls.xtx_inv[(0, 1)]],
        [ls.xtx_inv[(1, 0)], ls.xtx_inv[(1, 1)]],
    ]))
}

#[allow(clippy::too_many_arguments)]
fn phase_from_ls(first: usize, last: usize, intercept: f64, slope: f64, rss: f64, n: usize, dof: usize, s2: f64, xtx_inv: [[f64; 2]; 2]) -> PhaseFit {
    let time_mean = (first + last) as f64 / 2.0;
    let sxx = (first..=last).map(|t| (t as f64 - time_mean).powi(2)).sum();
    PhaseFit {
        first,
        last,
        n,
        intercept,
        slope,
        rss,
        cov: [
            [s2 * xtx_inv[0][0], s2 * xtx_inv[0][1]],
            [s2 * xtx_inv[1][0], s2 * xtx_inv[1][1]],
        ],
        sigma_sq_mle: rss / n as f64,
        sigma_sq_unbiased: s2,
        dof,
        time_mean,
        sxx,
    }
}

/// Re-estimates the mean after whitening with the fitted AR(1) structure.
///
/// `Separate` refits each phase on its quasi-differenced values without the
/// phase's first point. `Overall` refits all four coefficients jointly on
/// `t = 2..=T`; the reported phase covariances are the diagonal blocks of the
/// joint covariance and share its residual variance.
pub fn gls_reestimate(series: &TimeSeries, fit: &MeanFit, mode: GlsMode) -> Result<MeanFit> {
    let tau = fit.tau_hat;
    let len = series.len();
    let (pre, post, method) = match mode {
        GlsMode::Separate { phi_pre, phi_post } => (
            quasi_differenced_phase(series, 2, tau - 1, phi_pre, "pre")?,
            quasi_differenced_phase(series, tau + 1, len, phi_post, "post")?,
            FitMethod::GlsSeparate,
        ),
        GlsMode::Overall { phi } => {
            let (pre, post) = gls_overall(series, tau, phi)?;
            (pre, post, FitMethod::GlsOverall)
        }
    };
    let profile = crate::changepoint::ProfilePoint {
        q: tau,
        loglik: fit.loglik,
        near_degenerate: fit.near_degenerate,
    };
    Ok(MeanFit::from_phases(fit.window, tau, pre, post, profile, fit.trace.clone(), method))
}

fn gls_overall(series: &TimeSeries, tau: usize, phi: f64) -> Result<(PhaseFit, PhaseFit)> {
    let len = series.len();
    let n_pre = tau.saturating_sub(2);
    let n_post = len + 1 - tau;
    if n_pre < 3 {
        return Err(Error::PhaseTooShort {
            phase: "pre",
            len: n_pre,
            min: 3,
        });
    }
    let regressors = |t: usize| -> [f64; 4] {
        let tf = t as f64;
        if t < tau {
            [1.0, tf, 0.0, 0.0]
        } else {
            [0.0, 0.0, 1.0, tf]
        }
    };
    let rows = len - 1;
    let design = DMatrix::from_fn(rows, 4, |i, j| {
        let t = i + 2;
        regressors(t)[j] - phi * regressors(t - 1)[j]
    });
    let z = DVector::from_fn(rows, |i, _| series.at(i + 2) - phi * series.at(i + 1));
    let ls = least_squares(design, &z)?;
    let s2 = ls.rss / (rows - 4) as f64;
    let resid = &z - &ls.fitted;
    let rss_pre: f64 = resid.rows(0, n_pre).norm_squared();
    let rss_post: f64 = resid.rows(n_pre, n_post).norm_squared();
    let c = &ls.coefficients;
    let block = |o: usize| [[ls.xtx_inv[(o, o)], ls.xtx_inv[(o, o + 1)]], [ls.xtx_inv[(o + 1, o)], ls.xtx_inv[(o + 1, o + 1)]]];
    let pre = phase_from_ls(2, tau - 1, c[0], c[1], rss_pre, n_pre, n_pre - 2, s2, block(0));
    let post = phase_from_ls(tau, len, c[2], c[3], rss_post, n_post, n_post - 2, s2, block(2));
    Ok((pre, post))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::changepoint::estimate_change_point;
    use crate::simulate::oracle;
    use crate::types::CandidateWindow;

    #[test]
    fn ar1_matches_transcription() {
        let r: Vec<f64> = (1..=40).map(|t| ((t * t) as f64 * 0.37).sin() + 0.1 * t as f64 % 1.3).collect();
        let tau = 17;
        let ((p1, s1), (p2, s2)) = oracle::ar1_segments(&r, tau);
        let pre = ar1_fit(&r[..tau - 1]).unwrap();
        let post = ar1_fit(&r[tau - 1..]).unwrap();
        assert!((pre.phi - p1).abs() < 1e-12);
        assert!((pre.innov_var - s1).abs() < 1e-12);
        assert!((post.phi - p2).abs() < 1e-12);
        assert!((post.innov_var - s2).abs() < 1e-12);
    }

    #[test]
    fn constant_segment_is_degenerate() {
        assert!(matches!(ar1_fit(&[1.0; 8]), Err(Error::Degenerate(_))));
        assert!(matches!(ar1_fit(&[1.0, 2.0, 3.0]), Err(Error::PhaseTooShort { .. })));
    }

    #[test]
    fn nested_df_and_identity() {
        let (f, d1, d2, p) = nested_f_from_rss(10.0, 10.0, 60).unwrap();
        assert_eq!((f, d1, d2, p), (0.0, 2, 58, 1.0));
        assert!(nested_f_from_rss(1.0, 0.0, 60).is_err());
    }

    #[test]
    fn variance_df_convention() {
        let v = variance_ratio_test(4.0, 4.0, 25, 35).unwrap();
        assert_eq!((v.df1, v.df2), (22, 32));
        assert_eq!(v.f_stat, 1.0);
        assert!((v.p_value.unwrap() - 1.0).abs() < 0.02);
        assert!(variance_ratio_test(1.0, 1.0, 3, 10).is_err());
    }

    #[test]
    fn variance_test_swaps_antisymmetrically() {
        let a = variance_ratio_test(10.259, 7.976, 24, 36).unwrap();
        let b = variance_ratio_test(7.976, 10.259, 36, 24).unwrap();
        assert!((a.f_stat * b.f_stat - 1.0).abs() < 1e-12);
        assert_eq!((a.df1, a.df2), (b.df2, b.df1));
        assert!((a.p_value.unwrap() - b.p_value.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn acf_of_alternating_series() {
        let x: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = acf(&x, default_max_lag(40));
        assert_eq!(a.max_lag, 10);
        assert!(a.values[0] < -0.9);
        assert!(!a.white_noise);
        assert_eq!(default_max_lag(200), 15);
        assert_eq!(default_max_lag(5), 1);
    }

    #[test]
    fn exact_fit_has_zero_residuals() {
        let values: Vec<f64> = (1..=30).map(|t| if t < 14 { 2.0 * t as f64 } else { 50.0 - t as f64 }).collect();
        let s = TimeSeries::new(values, 1, 2008).unwrap();
        let fit = estimate_change_point(&s, &CandidateWindow::new(14, 0, 0)).unwrap();
        let r = compute_residuals(&s, &fit);
        assert!(r.residuals.iter().all(|v| v.abs() < 1e-9));
        assert_eq!(r.residuals.len(), 30);
    }

    #[test]
    fn gls_with_zero_phi_drops_endpoints() {
        let values: Vec<f64> = (1..=40).map(|t| 5.0 + 0.3 * t as f64 + ((t * 7) % 5) as f64 - 2.0).collect();
        let s = TimeSeries::new(values, 1, 2008).unwrap();
        let fit = estimate_change_point(&s, &CandidateWindow::new(20, 0, 0)).unwrap();
        let sep = gls_reestimate(&s, &fit, GlsMode::Separate { phi_pre: 0.0, phi_post: 0.0 }).unwrap();
        let pre = PhaseFit::fit(&s, 2..=19, "pre").unwrap();
        let post = PhaseFit::fit(&s, 21..=40, "post").unwrap();
        assert!((sep.pre.intercept - pre.intercept).abs() < 1e-10);
        assert!((sep.pre.slope - pre.slope).abs() < 1e-12);
        assert!((sep.post.intercept - post.intercept).abs() < 1e-10);
        assert!((sep.post.cov[1][1] - post.cov[1][1]).abs() < 1e-12);
        assert_eq!(sep.method, FitMethod::GlsSeparate);

        let overall = gls_reestimate(&s, &fit, GlsMode::Overall { phi: 0.0 }).unwrap();
        let post_all = PhaseFit::fit(&s, 20..=40, "post").unwrap();
        assert!((overall.pre.slope - pre.slope).abs() < 1e-10);
        assert!((overall.post.slope - post_all.slope).abs() < 1e-10);
        assert_eq!(overall.method, FitMethod::GlsOverall);
    }

    #[test]
    fn gls_separate_matches_refit_oracle() {
        let values: Vec<f64> = (1..=50).map(|t| 3.0 + 0.2 * t as f64 + ((t as f64) * 1.3).sin()).collect();
        let s = TimeSeries::new(values.clone(), 1, 2008).unwrap();
        let fit = estimate_change_point(&s, &CandidateWindow::new(22, 0, 0)).unwrap();
        let g = gls_reestimate(&s, &fit, GlsMode::Separate { phi_pre: 0.5, phi_post: -0.3 }).unwrap();
        let (a, b, sa, sb) = oracle::quasi_differenced_line(&values, 2, 21, 0.5);
        assert!((g.pre.intercept - a).abs() < 1e-10 && (g.pre.slope - b).abs() < 1e-10);
        assert!((g.pre.cov[0][0].sqrt() - sa).abs() < 1e-10 && (g.pre.cov[1][1].sqrt() - sb).abs() < 1e-10);
        let (a, b, _, sb) = oracle::quasi_differenced_line(&values, 23, 50, -0.3);
        assert!((g.post.intercept - a).abs() < 1e-10 && (g.post.slope - b).abs() < 1e-10);
        assert!((g.post.cov[1][1].sqrt() - sb).abs() < 1e-10);
    }

    #[test]
    fn gls_requires_room_after_dropping() {
        let values: Vec<f64> = (1..=12).map(|t| (t as f64).sqrt()).collect();
        let s = TimeSeries::new(values, 1, 2008).unwrap();
        let fit = estimate_change_point(&s, &CandidateWindow::new(6, 0, 0)).unwrap();
        // pre phase 1..5 keeps 2..5 = 4 points; post 7..12 = 6 points
        assert!(gls_reestimate(&s, &fit, GlsMode::Separate { phi_pre: 0.1, phi_post: 0.1 }).is_ok());
        let s = TimeSeries::new((1..=12).map(|t| t as f64 * 0.5 + (t % 3) as f64).collect(), 1, 2008).unwrap();
        let mut fit = estimate_change_point(&s, &CandidateWindow::new(6, 0, 0)).unwrap();
        fit.tau_hat = 4;
        assert!(matches!(
            gls_reestimate(&s, &fit, GlsMode::Separate { phi_pre: 0.1, phi_post: 0.1 }),
            Err(Error::PhaseTooShort { phase: "pre", len: 2, .. })
        ));
    }
}
