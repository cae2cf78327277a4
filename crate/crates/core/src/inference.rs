//! Interval and p-value helpers shared by the estimators.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

/// Confidence level used for every reported interval.
pub const CONFIDENCE: f64 = 0.95;

/// Significance level used for every reported test.
pub const ALPHA: f64 = 1.0 - CONFIDENCE;

/// A point estimate with its standard error, 95% interval and two-sided
/// p-value for the null of zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value: f64,
    /// Degrees of freedom of the reference t distribution; `None` means the
    /// standard normal was used.
    pub df: Option<f64>,
}

impl Estimate {
    /// t-based interval and test.
    pub fn t(estimate: f64, se: f64, df: f64) -> Self {
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
        let crit = dist.inverse_cdf(1.0 - ALPHA / 2.0);
        Self::build(estimate, se, crit, Some(df), |x| 2.0 * dist.sf(x))
    }

    /// Normal-based interval and test.
    pub fn normal(estimate: f64, se: f64) -> Self {
        let dist = Normal::standard();
        let crit = dist.inverse_cdf(1.0 - ALPHA / 2.0);
        Self::build(estimate, se, crit, None, |x| 2.0 * dist.sf(x))
    }

    fn build(estimate: f64, se: f64, crit: f64, df: Option<f64>, two_tail: impl Fn(f64) -> f64) -> Self {
        let p_value = if se > 0.0 {
            two_tail((estimate / se).abs()).clamp(0.0, 1.0)
        } else if estimate == 0.0 {
            1.0
        } else {
            0.0
        };
        Self {
            estimate,
            se,
            ci_lower: estimate - crit * se,
            ci_upper: estimate + crit * se,
            p_value,
            df,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }

    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Welch-Satterthwaite degrees of freedom for a sum of independent variance
/// components `(variance, df)`.
pub fn welch_df(components: &[(f64, f64)]) -> f64 {
    let total: f64 = components.iter().map(|(v, _)| v).sum();
    let denom: f64 = components.iter().map(|(v, d)| v * v / d).sum();
    if denom > 0.0 {
        total * total / denom
    } else {
        components.iter().map(|(_, d)| d).sum()
    }
}

/// Upper tail probability of F(d1, d2) at `x`.
pub fn f_upper_tail(x: f64, d1: f64, d2: f64) -> f64 {
    FisherSnedecor::new(d1, d2).expect("positive df").sf(x).clamp(0.0, 1.0)
}

/// CDF of F(d1, d2) at `x`.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    FisherSnedecor::new(d1, d2).expect("positive df").cdf(x).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_interval_matches_tables() {
        // t_{0.975, 10} = 2.228139
        let e = Estimate::t(1.0, 1.0, 10.0);
        assert!((e.ci_upper - 3.228139).abs() < 1e-5);
        assert!((e.p_value - 0.3409).abs() < 1e-4);
    }

    #[test]
    fn zero_se_is_finite() {
        let e = Estimate::t(0.0, 0.0, 5.0);
        assert_eq!(e.p_value, 1.0);
        assert_eq!((e.ci_lower, e.ci_upper), (0.0, 0.0));
        assert_eq!(Estimate::normal(2.0, 0.0).p_value, 0.0);
    }

    #[test]
    fn welch_reduces_to_sum_for_equal_components() {
        // Equal variance-per-df components give the pooled df.
        let df = welch_df(&[(1.0, 10.0), (1.0, 10.0)]);
        assert!((df - 20.0).abs() < 1e-12);
        assert_eq!(welch_df(&[(0.0, 3.0), (0.0, 4.0)]), 7.0);
    }

    #[test]
    fn f_tails() {
        // F_{0.95}(2, 58) ~= 3.1559
        assert!((f_upper_tail(3.1559, 2.0, 58.0) - 0.05).abs() < 1e-4);
        assert!((f_cdf(1.0, 22.0, 32.0) + f_upper_tail(1.0, 22.0, 32.0) - 1.0).abs() < 1e-12);
    }
}
