//! Invariants of the estimators, checked on random datasets.

mod common;

use common::{close, dataset};
use itsa_core::baselines::{alt_param_fit, equivalence_map, mse_compare, quadratic_fit, segmented_censored, segmented_fixed, CensorSet, Coefficients, ModelEntry};
use itsa_core::changepoint::{effect_sizes, estimate_change_point, ols_segmented_fit};
use itsa_core::stochastic::{compute_residuals, fit_stochastic, variance_ratio_test};
use itsa_core::types::{CandidateWindow, TimeSeries};
use proptest::prelude::*;

fn window_for(len: usize, q: usize) -> CandidateWindow {
    // widest symmetric window around q that keeps five points outside on each side
    let before = (q - 6).min(3);
    let after = (len - q).saturating_sub(5).min(3);
    CandidateWindow::new(q, before, after)
}

fn map(s: &TimeSeries, f: impl Fn(f64) -> f64) -> TimeSeries {
    TimeSeries::new(s.values().iter().map(|&v| f(v)).collect(), 1, 2008).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn shift_moves_only_intercepts(d in dataset(), c in -100.0f64..100.0) {
        let (p, q) = ols_segmented_fit(&d.series, d.q).unwrap();
        let (ps, qs) = ols_segmented_fit(&map(&d.series, |v| v + c), d.q).unwrap();
        prop_assert!(close(ps.intercept, p.intercept + c, 1e-8));
        prop_assert!(close(qs.intercept, q.intercept + c, 1e-8));
        prop_assert!(close(ps.slope, p.slope, 1e-8) && close(qs.slope, q.slope, 1e-8));
        prop_assert!(close(qs.intercept - ps.intercept, q.intercept - p.intercept, 1e-8));
    }

    #[test]
    fn change_point_is_affine_invariant(d in dataset(), a in 0.1f64..10.0, b in -100.0f64..100.0) {
        let w = window_for(d.series.len(), d.q);
        let fit = estimate_change_point(&d.series, &w).unwrap();
        let scaled = estimate_change_point(&map(&d.series, |v| a * v + b), &w).unwrap();
        prop_assert_eq!(fit.tau_hat, scaled.tau_hat);
        // the trace shifts by the same constant at every q
        let shift = scaled.trace[0].loglik - fit.trace[0].loglik;
        for (x, y) in fit.trace.iter().zip(&scaled.trace) {
            prop_assert!(close(y.loglik - x.loglik, shift, 1e-8));
        }
    }

    #[test]
    fn tau_hat_maximizes_trace(d in dataset()) {
        let w = window_for(d.series.len(), d.q);
        let fit = estimate_change_point(&d.series, &w).unwrap();
        prop_assert_eq!(fit.trace.len(), w.candidates().count());
        for p in &fit.trace {
            prop_assert!(fit.loglik >= p.loglik);
            if p.loglik == fit.loglik {
                prop_assert!(p.q >= fit.tau_hat);
            }
        }
    }

    #[test]
    fn level_change_is_gap_below_extrapolation(d in dataset()) {
        let fit = estimate_change_point(&d.series, &CandidateWindow::new(d.q, 0, 0)).unwrap();
        let e = effect_sizes(&fit).unwrap();
        let tau = fit.tau_hat as f64;
        let gap = fit.pre.predict(tau) - fit.post.predict(tau);
        prop_assert!(close(e.level_change.estimate, gap, 1e-8));
        prop_assert_eq!(e.level_change.estimate > 0.0, fit.post.predict(tau) < fit.pre.predict(tau));
    }

    #[test]
    fn nested_f_nonnegative(d in dataset()) {
        let fit = estimate_change_point(&d.series, &CandidateWindow::new(d.q, 0, 0)).unwrap();
        let ar = fit_stochastic(&compute_residuals(&d.series, &fit)).unwrap();
        let nf = ar.nested_f;
        prop_assert!(nf.rss_full <= nf.rss_reduced * (1.0 + 1e-12));
        prop_assert!(nf.statistic >= -1e-12);
        prop_assert_eq!((nf.df1, nf.df2), (2, d.series.len() - 2));
        prop_assert!((0.0..=1.0).contains(&nf.p_value));
    }

    #[test]
    fn causality_flags_follow_estimates(d in dataset()) {
        let fit = estimate_change_point(&d.series, &CandidateWindow::new(d.q, 0, 0)).unwrap();
        let ar = fit_stochastic(&compute_residuals(&d.series, &fit)).unwrap();
        prop_assert_eq!(ar.causal_pre, ar.phi1.estimate.abs() < 1.0);
        prop_assert_eq!(ar.causal_post, ar.phi2.estimate.abs() < 1.0);
    }

    #[test]
    fn variance_test_antisymmetric(s1 in 0.01f64..100.0, s2 in 0.01f64..100.0, n1 in 5usize..200, n2 in 5usize..200) {
        let a = variance_ratio_test(s1, s2, n1, n2).unwrap();
        let b = variance_ratio_test(s2, s1, n2, n1).unwrap();
        prop_assert!(close(a.f_stat * b.f_stat, 1.0, 1e-12));
        prop_assert_eq!((a.df1, a.df2), (b.df2, b.df1));
        prop_assert!(close(a.p_value.unwrap(), b.p_value.unwrap(), 1e-9));
    }

    #[test]
    fn alt_parameterization_is_equivalent(d in dataset()) {
        let alt = alt_param_fit(&d.series, d.q).unwrap();
        let fixed = segmented_fixed(&d.series, d.q).unwrap();
        let Coefficients::TwoPhase { pre, post } = &fixed.coefficients else { unreachable!() };
        let (delta, slope_delta) = equivalence_map(&alt).unwrap();
        prop_assert!(close(delta, post.intercept - pre.intercept, 1e-8), "{} {}", delta, post.intercept - pre.intercept);
        prop_assert!(close(slope_delta, post.slope - pre.slope, 1e-8));
        for (a, f) in alt.fitted.iter().zip(&fixed.fitted) {
            prop_assert!(close(a.value, f.value, 1e-8));
        }
        prop_assert!(close(alt.rss, fixed.rss, 1e-8));
    }

    #[test]
    fn empty_censor_set_is_fixed(d in dataset()) {
        let fixed = segmented_fixed(&d.series, d.q).unwrap();
        let c = segmented_censored(&d.series, &CandidateWindow::new(d.q, 2, 2), CensorSet::Empty).unwrap();
        prop_assert_eq!(&c.coefficients, &fixed.coefficients);
        prop_assert_eq!(c.rss, fixed.rss);
        prop_assert_eq!(c.df, fixed.df);
    }

    #[test]
    fn mse_nonnegative_with_parameter_df(d in dataset()) {
        let len = d.series.len();
        let w = window_for(len, d.q);
        let fixed = segmented_fixed(&d.series, d.q).unwrap();
        let cens = segmented_censored(&d.series, &w, CensorSet::Window).unwrap();
        let quad = quadratic_fit(&d.series).unwrap();
        prop_assert_eq!(fixed.df, len - 4);
        prop_assert_eq!(cens.df, len - w.candidates().count() - 4);
        prop_assert_eq!(quad.df, len - 3);
        let cmp = mse_compare(&[ModelEntry::from_baseline(&fixed), ModelEntry::from_baseline(&cens), ModelEntry::from_baseline(&quad)]).unwrap();
        for r in &cmp.rows {
            prop_assert!(r.mse >= 0.0);
        }
        prop_assert!(cmp.rows.windows(2).all(|p| p[0].mse <= p[1].mse));
    }
}
