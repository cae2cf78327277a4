#![allow(dead_code)]

use itsa_core::simulate::{generate, SimSpec};
use itsa_core::types::TimeSeries;
use proptest::prelude::*;

/// Random two-phase AR(1) dataset plus a split point with room on both sides
/// for line and AR(1) fits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: SimSpec,
    pub series: TimeSeries,
    pub q: usize,
}

impl Dataset {
    pub fn y(&self) -> &[f64] {
        self.series.values()
    }
}

pub fn spec(length: usize, tau: usize, seed: u64) -> SimSpec {
    SimSpec {
        length,
        true_tau: tau,
        beta0: 64.32,
        beta1: 0.56,
        delta: 1.5,
        slope_delta: -0.34,
        phi1: 0.0,
        phi2: 0.0,
        innov_sd_pre: 3.0,
        innov_sd_post: 3.0,
        seed,
        bounds: None,
        start_month: 1,
        start_year: 2008,
    }
}

prop_compose! {
    pub fn dataset()(
        length in 20usize..=120,
        tau_frac in 0.2f64..0.8,
        q_frac in 0.0f64..1.0,
        beta0 in -50.0f64..50.0,
        beta1 in -2.0f64..2.0,
        delta in -10.0f64..10.0,
        slope_delta in -1.0f64..1.0,
        sd_pre in 0.1f64..5.0,
        sd_post in 0.1f64..5.0,
        phi1 in -0.6f64..0.6,
        phi2 in -0.6f64..0.6,
        seed in any::<u64>(),
    ) -> Dataset {
        let true_tau = ((length as f64 * tau_frac) as usize).clamp(6, length - 4);
        let spec = SimSpec {
            length,
            true_tau,
            beta0,
            beta1,
            delta,
            slope_delta,
            phi1,
            phi2,
            innov_sd_pre: sd_pre,
            innov_sd_post: sd_post,
            seed,
            bounds: None,
            start_month: 1,
            start_year: 2008,
        };
        let series = generate(&spec).unwrap().series;
        let q = 6 + ((length - 11) as f64 * q_frac) as usize;
        Dataset { spec, series, q }
    }
}

/// `|a - b| <= tol * max(|a|, |b|, 1)`
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
