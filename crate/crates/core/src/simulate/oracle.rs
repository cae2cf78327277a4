//! Independent reference implementations used to cross-check the estimators.
//!
//! Everything here works on plain slices with explicit loops over 1-based
//! time indices and shares no code with the estimation modules. Slower and
//! less stable than the main routes; use only for verification.

use std::f64::consts::PI;

/// `y[t-1]` for 1-based `t`.
fn y_at(y: &[f64], t: usize) -> f64 {
    y[t - 1]
}

/// Simple linear regression of `y_t` on `t` over `first..=last` from the raw
/// normal equations `[n, St; St, Stt] [a; b] = [Sy; Sty]`, solved by
/// Cramer's rule. Returns `(intercept, slope)`.
pub fn simple_regression(y: &[f64], first: usize, last: usize) -> (f64, f64) {
    let (mut n, mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in first..=last {
        let tf = t as f64;
        let v = y_at(y, t);
        n += 1.0;
        st += tf;
        stt += tf * tf;
        sy += v;
        sty += tf * v;
    }
    let det = n * stt - st * st;
    let a = (sy * stt - st * sty) / det;
    let b = (n * sty - st * sy) / det;
    (a, b)
}

/// Residual sum of squares of a line over `first..=last`.
pub fn line_rss(y: &[f64], first: usize, last: usize, intercept: f64, slope: f64) -> f64 {
    (first..=last)
        .map(|t| (y_at(y, t) - intercept - slope * t as f64).powi(2))
        .sum()
}

/// The four mean estimators written as closed forms of the change point:
/// `beta1 = sum (t - tau/2) Y_t / sum (t - tau/2) t` over the pre-phase, etc.
/// Returns `(beta0, beta1, delta, slope_delta)`.
///
/// The intercept difference is `Ybar_post - (beta1 + D) tbar_post
/// - (Ybar_pre - beta1 tau / 2)`.
pub fn mean_closed_form(y: &[f64], tau: usize) -> (f64, f64, f64, f64) {
    let big_t = y.len();
    let half_tau = tau as f64 / 2.0;
    let ybar = |a: usize, b: usize| (a..=b).map(|t| y_at(y, t)).sum::<f64>() / (b - (a - 1)) as f64;
    let tbar_post = (tau..=big_t).map(|t| t as f64).sum::<f64>() / (big_t - (tau - 1)) as f64;

    let num1: f64 = (1..tau).map(|t| (t as f64 - half_tau) * y_at(y, t)).sum();
    let den1: f64 = (1..tau).map(|t| (t as f64 - half_tau) * t as f64).sum();
    let beta1 = num1 / den1;
    let beta0 = ybar(1, tau - 1) - beta1 * half_tau;

    let num2: f64 = (tau..=big_t).map(|t| (t as f64 - tbar_post) * y_at(y, t)).sum();
    let den2: f64 = (tau..=big_t).map(|t| (t as f64 - tbar_post) * t as f64).sum();
    let slope_delta = num2 / den2 - num1 / den1;
    let delta = ybar(tau, big_t) - (beta1 + slope_delta) * tbar_post - ybar(1, tau - 1) + beta1 * half_tau;
    (beta0, beta1, delta, slope_delta)
}

/// Log of the two-phase Gaussian likelihood at change point `q`, evaluated
/// observation by observation at the OLS coefficients and MLE variances.
pub fn profile_loglik(y: &[f64], q: usize) -> f64 {
    let big_t = y.len();
    let (a1, b1) = simple_regression(y, 1, q - 1);
    let (a2, b2) = simple_regression(y, q, big_t);
    let s1 = line_rss(y, 1, q - 1, a1, b1) / (q - 1) as f64;
    let s2 = line_rss(y, q, big_t, a2, b2) / (big_t - (q - 1)) as f64;
    let log_density = |v: f64, mu: f64, s: f64| -0.5 * (2.0 * PI * s).ln() - (v - mu).powi(2) / (2.0 * s);
    let mut total = 0.0;
    for t in 1..q {
        total += log_density(y_at(y, t), a1 + b1 * t as f64, s1);
    }
    for t in q..=big_t {
        total += log_density(y_at(y, t), a2 + b2 * t as f64, s2);
    }
    total
}

/// AR(1) conditional estimates for the pre (`1..tau-1`) and post (`tau..T`)
/// residual segments, transcribed in full-series index form. Returns
/// `((phi1, sigma1_sq), (phi2, sigma2_sq))`.
///
/// The post-segment innovation variance is
/// `1/(T - tau - 1) * sum_{t=tau+2}^{T} [(W_t - Wbar_{tau+1:T}) - phi2 (W_{t-1} - Wbar_{tau+1:T})]^2`;
/// the pre-segment uses the same limits shifted to `1..tau-1`.
pub fn ar1_segments(r: &[f64], tau: usize) -> ((f64, f64), (f64, f64)) {
    let big_t = r.len();
    let mean = |v: &dyn Fn(usize) -> f64, a: usize, b: usize| (a..=b).map(v).sum::<f64>() / (b - a + 1) as f64;
    let rr = |t: usize| r[t - 1];

    // pre
    let rbar_lead = mean(&rr, 2, tau - 1);
    let rbar_lag = mean(&rr, 1, tau - 2);
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 2..=tau - 1 {
        num += (rr(t) - rbar_lead) * (rr(t - 1) - rbar_lag);
        den += (rr(t) - rbar_lead).powi(2);
    }
    let phi1 = num / den;
    let w1 = |t: usize| rr(t) - phi1 * rr(t - 1);
    let wbar1 = mean(&w1, 2, tau - 1);
    let mut ss1 = 0.0;
    for t in 3..=tau - 1 {
        ss1 += ((w1(t) - wbar1) - phi1 * (w1(t - 1) - wbar1)).powi(2);
    }
    let sigma1 = ss1 / (tau - 3) as f64;

    // post
    let rbar_lead = mean(&rr, tau + 1, big_t);
    let rbar_lag = mean(&rr, tau, big_t - 1);
    let mut num = 0.0;
    let mut den = 0.0;
    for t in tau + 1..=big_t {
        num += (rr(t) - rbar_lead) * (rr(t - 1) - rbar_lag);
        den += (rr(t) - rbar_lead).powi(2);
    }
    let phi2 = num / den;
    let w2 = |t: usize| rr(t) - phi2 * rr(t - 1);
    let wbar2 = mean(&w2, tau + 1, big_t);
    let mut ss2 = 0.0;
    for t in tau + 2..=big_t {
        ss2 += ((w2(t) - wbar2) - phi2 * (w2(t - 1) - wbar2)).powi(2);
    }
    let sigma2 = ss2 / (big_t - tau - 1) as f64;

    ((phi1, sigma1), (phi2, sigma2))
}

/// `w' S w` for a weight vector and a symmetric covariance matrix.
pub fn linear_combination_variance(weights: &[f64], cov: &[Vec<f64>]) -> f64 {
    let mut v = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        for (j, wj) in weights.iter().enumerate() {
            v += wi * wj * cov[i][j];
        }
    }
    v
}

/// Joint covariance of `(a1, b1, a2, b2)` for two independent phase line fits,
/// each `s^2 (X'X)^{-1}` built from the raw normal equations.
pub fn two_phase_covariance(y: &[f64], q: usize) -> Vec<Vec<f64>> {
    let big_t = y.len();
    let block = |first: usize, last: usize| {
        let (a, b) = simple_regression(y, first, last);
        let n = (last - first + 1) as f64;
        let s2 = line_rss(y, first, last, a, b) / (n - 2.0);
        let st: f64 = (first..=last).map(|t| t as f64).sum();
        let stt: f64 = (first..=last).map(|t| (t as f64).powi(2)).sum();
        let det = n * stt - st * st;
        [[s2 * stt / det, -s2 * st / det], [-s2 * st / det, s2 * n / det]]
    };
    let pre = block(1, q - 1);
    let post = block(q, big_t);
    let mut cov = vec![vec![0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            cov[i][j] = pre[i][j];
            cov[i + 2][j + 2] = post[i][j];
        }
    }
    cov
}

/// Standard error of the level change `(a1 + b1 q) - (a2 + b2 q)` at change
/// point `q`.
pub fn level_change_se(y: &[f64], q: usize) -> f64 {
    let qf = q as f64;
    linear_combination_variance(&[1.0, qf, -1.0, -qf], &two_phase_covariance(y, q)).sqrt()
}

/// Least-squares polynomial fit of the given degree on `t = 1..=T` via
/// normal equations on unit-scaled columns, solved by Gaussian elimination
/// with partial pivoting. Returns coefficients in raw `t` powers.
#[allow(clippy::needless_range_loop)]
pub fn polynomial_fit(y: &[f64], degree: usize) -> Vec<f64> {
    let p = degree + 1;
    let big_t = y.len();
    let column = |t: usize, j: usize| (t as f64).powi(j as i32);
    let scale: Vec<f64> = (0..p)
        .map(|j| (1..=big_t).map(|t| column(t, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut a = vec![vec![0.0; p + 1]; p];
    for t in 1..=big_t {
        for i in 0..p {
            let xi = column(t, i) / scale[i];
            for j in 0..p {
                a[i][j] += xi * column(t, j) / scale[j];
            }
            a[i][p] += xi * y_at(y, t);
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..p).map(|j| a[j][p] / a[j][j] / scale[j]).collect()
}

/// Quasi-differenced line fit over `first..=last`: regresses
/// `Y_t - phi Y_{t-1}` on `(1 - phi)` and `t - phi (t - 1)` without an extra
/// intercept. Returns `(intercept, slope, se_intercept, se_slope)`.
pub fn quasi_differenced_line(y: &[f64], first: usize, last: usize, phi: f64) -> (f64, f64, f64, f64) {
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let rows: Vec<(f64, f64, f64)> = (first..=last)
        .map(|t| {
            let tf = t as f64;
            (1.0 - phi, tf - phi * (tf - 1.0), y_at(y, t) - phi * y_at(y, t - 1))
        })
        .collect();
    for &(x1, x2, z) in &rows {
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        s1y += x1 * z;
        s2y += x2 * z;
    }
    let det = s11 * s22 - s12 * s12;
    let a = (s22 * s1y - s12 * s2y) / det;
    let b = (s11 * s2y - s12 * s1y) / det;
    let rss: f64 = rows.iter().map(|&(x1, x2, z)| (z - a * x1 - b * x2).powi(2)).sum();
    let s2 = rss / (rows.len() as f64 - 2.0);
    (a, b, (s2 * s22 / det).sqrt(), (s2 * s11 / det).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_of_exact_line() {
        let y: Vec<f64> = (1..=10).map(|t| 3.0 - 0.25 * t as f64).collect();
        let (a, b) = simple_regression(&y, 1, 10);
        assert!((a - 3.0).abs() < 1e-12 && (b + 0.25).abs() < 1e-12);
        let (b0, b1, d, dd) = mean_closed_form(&y, 5);
        assert!((b0 - 3.0).abs() < 1e-12 && (b1 + 0.25).abs() < 1e-12);
        assert!(d.abs() < 1e-12 && dd.abs() < 1e-12);
    }

    #[test]
    fn closed_form_recovers_a_break() {
        let y: Vec<f64> = (1..=20)
            .map(|t| if t < 9 { 1.0 + 0.5 * t as f64 } else { 4.0 - 0.1 * t as f64 })
            .collect();
        let (b0, b1, d, dd) = mean_closed_form(&y, 9);
        assert!((b0 - 1.0).abs() < 1e-12);
        assert!((b1 - 0.5).abs() < 1e-12);
        assert!((d - 3.0).abs() < 1e-12);
        assert!((dd + 0.6).abs() < 1e-12);
    }

    #[test]
    fn quadratic_exact() {
        let y: Vec<f64> = (1..=30).map(|t| (t * t) as f64).collect();
        let c = polynomial_fit(&y, 2);
        assert!(c[0].abs() < 1e-8 && c[1].abs() < 1e-8 && (c[2] - 1.0).abs() < 1e-10);
    }
}
