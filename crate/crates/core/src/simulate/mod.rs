//! Synthetic interrupted series with known ground truth.
//!
//! The mean is the two-phase line and the errors follow two AR(1) regimes
//! that switch at the true change point. Draws come from ChaCha8 seeded with
//! a `u64`; replication `i` of a study uses stream `i` of the same seed, so
//! every replication is independent and reproducible on its own.

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Bounds, TimeSeries, MIN_SERIES_LEN};

/// Parameters of a simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub length: usize,
    pub true_tau: usize,
    pub beta0: f64,
    pub beta1: f64,
    /// Intercept increment at the change point.
    pub delta: f64,
    /// Slope increment at the change point.
    pub slope_delta: f64,
    #[serde(default)]
    pub phi1: f64,
    #[serde(default)]
    pub phi2: f64,
    pub innov_sd_pre: f64,
    pub innov_sd_post: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bounds: Option<Bounds>,
    #[serde(default = "default_start_month")]
    pub start_month: u32,
    #[serde(default = "default_start_year")]
    pub start_year: i32,
}

fn default_start_month() -> u32 {
    1
}

fn default_start_year() -> i32 {
    2000
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.length < MIN_SERIES_LEN {
            return bad(format!("length {} below {MIN_SERIES_LEN}", self.length));
        }
        if self.true_tau < 6 || self.true_tau + 4 > self.length {
            return bad(format!("true_tau {} outside 6..={}", self.true_tau, self.length - 4));
        }
        for (name, phi) in [("phi1", self.phi1), ("phi2", self.phi2)] {
            if phi.is_nan() || phi.abs() >= 1.0 {
                return bad(format!("{name} = {phi} outside (-1, 1)"));
            }
        }
        for (name, sd) in [("innov_sd_pre", self.innov_sd_pre), ("innov_sd_post", self.innov_sd_post)] {
            if !(sd.is_finite() && sd >= 0.0) {
                return bad(format!("{name} = {sd} must be finite and non-negative"));
            }
        }
        for v in [self.beta0, self.beta1, self.delta, self.slope_delta] {
            if !v.is_finite() {
                return bad("mean parameters must be finite".into());
            }
        }
        if let Some(b) = self.bounds {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower >= b.upper {
                return bad(format!("bounds [{}, {}] are empty", b.lower, b.upper));
            }
        }
        if !(1..=12).contains(&self.start_month) {
            return bad(format!("start_month {} outside 1..=12", self.start_month));
        }
        Ok(())
    }

    /// Noise-free mean at 1-based index `t`.
    pub fn mean_at(&self, t: usize) -> f64 {
        let tf = t as f64;
        if t < self.true_tau {
            self.beta0 + self.beta1 * tf
        } else {
            self.beta0 + self.delta + (self.beta1 + self.slope_delta) * tf
        }
    }

    /// The spec with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// A generated series and whether clamping to bounds touched any value.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub series: TimeSeries,
    pub clamped: bool,
    /// The AR errors before clamping.
    pub errors: Vec<f64>,
}

/// Generator for replication `replicate` of a study seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Generates the series described by `spec` from its own seed.
pub fn generate(spec: &SimSpec) -> Result<Simulated> {
    generate_with(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// Generates the series described by `spec`, drawing from `rng`.
pub fn generate_with<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<Simulated> {
    spec.validate()?;
    let errors = ar1_regimes(spec, rng);
    let mut clamped = false;
    let values = errors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let v = spec.mean_at(i + 1) + e;
            match spec.bounds {
                Some(b) if v <= b.lower || v >= b.upper => {
                    clamped = true;
                    v.clamp(b.lower, b.upper)
                }
                _ => v,
            }
        })
        .collect();
    let series = TimeSeries::new(values, spec.start_month, spec.start_year)?.with_bounds(spec.bounds);
    Ok(Simulated {
        series,
        clamped,
        errors,
    })
}

/// Two-regime AR(1) errors: the pre regime starts from its stationary
/// distribution and the post regime continues from the last pre-regime error.
fn ar1_regimes<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Vec<f64> {
    let mut errors = Vec::with_capacity(spec.length);
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let first = spec.innov_sd_pre / (1.0 - spec.phi1 * spec.phi1).sqrt() * z();
    errors.push(first);
    for t in 2..=spec.length {
        let (phi, sd) = if t < spec.true_tau {
            (spec.phi1, spec.innov_sd_pre)
        } else {
            (spec.phi2, spec.innov_sd_post)
        };
        let prev = errors[t - 2];
        errors.push(phi * prev + sd * z());
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SimSpec {
        SimSpec {
            length: 60,
            true_tau: 25,
            beta0: 64.0,
            beta1: 0.56,
            delta: 1.5,
            slope_delta: -0.34,
            phi1: 0.3,
            phi2: -0.2,
            innov_sd_pre: 3.0,
            innov_sd_post: 2.0,
            seed: 7,
            bounds: None,
            start_month: 1,
            start_year: 2008,
        }
    }

    #[test]
    fn noiseless_is_piecewise_linear() {
        let s = SimSpec {
            innov_sd_pre: 0.0,
            innov_sd_post: 0.0,
            ..spec()
        };
        let sim = generate(&s).unwrap();
        for t in 1..=60 {
            assert_eq!(sim.series.at(t), s.mean_at(t));
        }
        assert_eq!(s.mean_at(24), 64.0 + 0.56 * 24.0);
        assert_eq!(s.mean_at(25), 65.5 + 0.22 * 25.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate(&spec()).unwrap();
        let b = generate(&spec()).unwrap();
        let bits = |s: &Simulated| s.series.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&generate(&spec().with_seed(8)).unwrap()));
    }

    #[test]
    fn post_regime_continues_previous_error() {
        let s = SimSpec {
            innov_sd_post: 0.0,
            ..spec()
        };
        let sim = generate(&s).unwrap();
        for t in 25..=60 {
            assert_eq!(sim.errors[t - 1], s.phi2 * sim.errors[t - 2]);
        }
    }

    #[test]
    fn white_noise_lag_one_near_zero() {
        let s = SimSpec {
            length: 2000,
            true_tau: 1000,
            phi1: 0.0,
            phi2: 0.0,
            innov_sd_post: 3.0,
            ..spec()
        };
        let sim = generate(&s).unwrap();
        let mean = sim.errors.iter().sum::<f64>() / 2000.0;
        let c0: f64 = sim.errors.iter().map(|e| (e - mean).powi(2)).sum();
        let c1: f64 = sim.errors.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        assert!((c1 / c0).abs() < 2.0 / 2000f64.sqrt());
    }

    #[test]
    fn clamping_is_flagged() {
        let s = SimSpec {
            bounds: Some(Bounds {
                lower: 0.0,
                upper: 80.0,
            }),
            ..spec()
        };
        let sim = generate(&s).unwrap();
        assert!(sim.clamped);
        assert!(sim.series.values().iter().all(|v| (0.0..=80.0).contains(v)));

        let loose = SimSpec {
            bounds: Some(Bounds {
                lower: 0.0,
                upper: 1000.0,
            }),
            ..spec()
        };
        assert!(!generate(&loose).unwrap().clamped);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(generate(&SimSpec { phi1: 1.0, ..spec() }).is_err());
        assert!(generate(&SimSpec { true_tau: 5, ..spec() }).is_err());
        assert!(generate(&SimSpec { true_tau: 57, ..spec() }).is_err());
        assert!(generate(&SimSpec { length: 11, ..spec() }).is_err());
        assert!(generate(&SimSpec { innov_sd_pre: -1.0, ..spec() }).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = toml::to_string(&spec()).unwrap();
        let back: SimSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec());
    }
}
