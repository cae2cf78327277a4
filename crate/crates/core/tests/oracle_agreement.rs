//! Estimators against the independent reference implementations.

mod common;

use common::{close, dataset};
use itsa_core::changepoint::{effect_sizes, estimate_change_point, ols_segmented_fit, profile_loglik};
use itsa_core::simulate::oracle;
use itsa_core::stochastic::{ar1_fit, compute_residuals};
use itsa_core::types::CandidateWindow;
use proptest::prelude::*;

const TOL: f64 = 1e-8;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn segmented_fit_matches_closed_form(d in dataset()) {
        let (pre, post) = ols_segmented_fit(&d.series, d.q).unwrap();
        let (b0, b1, delta, slope_delta) = oracle::mean_closed_form(d.y(), d.q);
        prop_assert!(close(pre.intercept, b0, TOL), "{} {}", pre.intercept, b0);
        prop_assert!(close(pre.slope, b1, TOL));
        prop_assert!(close(post.intercept - pre.intercept, delta, TOL), "{} {}", post.intercept - pre.intercept, delta);
        prop_assert!(close(post.slope - pre.slope, slope_delta, TOL));
        let (a2, s2) = oracle::simple_regression(d.y(), d.q, d.y().len());
        prop_assert!(close(post.rss, oracle::line_rss(d.y(), d.q, d.y().len(), a2, s2), TOL));
    }

    #[test]
    fn loglik_matches_termwise(d in dataset()) {
        let p = profile_loglik(&d.series, d.q).unwrap();
        let o = oracle::profile_loglik(d.y(), d.q);
        prop_assert!(close(p.loglik, o, TOL), "{} {}", p.loglik, o);
    }

    #[test]
    fn ar1_matches_transcription(d in dataset()) {
        let fit = estimate_change_point(&d.series, &CandidateWindow::new(d.q, 0, 0)).unwrap();
        let resid = compute_residuals(&d.series, &fit);
        let pre = ar1_fit(resid.pre()).unwrap();
        let post = ar1_fit(resid.post()).unwrap();
        let ((phi1, s1), (phi2, s2)) = oracle::ar1_segments(&resid.residuals, d.q);
        prop_assert!(close(pre.phi, phi1, TOL), "{} {}", pre.phi, phi1);
        prop_assert!(close(pre.innov_var, s1, TOL));
        prop_assert!(close(post.phi, phi2, TOL));
        prop_assert!(close(post.innov_var, s2, TOL));
    }

    #[test]
    fn effect_ses_match_covariance_oracle(d in dataset()) {
        let fit = estimate_change_point(&d.series, &CandidateWindow::new(d.q, 0, 0)).unwrap();
        let e = effect_sizes(&fit).unwrap();
        let cov = oracle::two_phase_covariance(d.y(), d.q);
        prop_assert!(close(e.level_change.se, oracle::level_change_se(d.y(), d.q), TOL));
        let trend = oracle::linear_combination_variance(&[0.0, 1.0, 0.0, -1.0], &cov).sqrt();
        prop_assert!(close(e.trend_change.se, trend, TOL));
        let intercept = oracle::linear_combination_variance(&[-1.0, 0.0, 1.0, 0.0], &cov).sqrt();
        prop_assert!(close(e.intercept_change.se, intercept, TOL));
    }
}
