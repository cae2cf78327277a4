//! End-to-end analysis run and its report.

use std::fmt::{self, Write as _};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{mse_compare, quadratic_fit, segmented_censored, segmented_fixed, BaselineFit, Coefficients, ModelComparison, ModelEntry};
use crate::changepoint::{effect_sizes, estimate_change_point_with, EffectEstimates, Execution, MeanFit};
use crate::config::AnalysisConfig;
use crate::error::Error;
use crate::inference::Estimate;
use crate::stochastic::{compute_residuals, fit_stochastic, gls_reestimate, variance_f_test, Acf, ArFit, GlsMode, ResidualSet, VarianceComparison};
use crate::types::{validate_series, TimeSeries};

/// Report format version. Bumped on any change to field names or meaning.
pub const SCHEMA_VERSION: &str = "1.0.0";

pub const SOFTWARE: &str = "itsa";

/// Pipeline step that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Validation,
    ChangePoint,
    EffectSizes,
    Stochastic,
    VarianceTest,
    Gls,
    Baselines,
    Comparison,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage}: {error}")]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl StageError {
    pub fn is_validation(&self) -> bool {
        self.error.is_validation()
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> StageError {
    move |error| StageError { stage, error }
}

/// A report part that either ran or was skipped for a stated reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section<T> {
    Applicable { result: T },
    NotApplicable { reason: String },
}

impl<T> Section<T> {
    pub fn result(&self) -> Option<&T> {
        match self {
            Section::Applicable { result } => Some(result),
            Section::NotApplicable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct InputSummary {
    pub length: usize,
    pub start: String,
    pub end: String,
    pub t_star: usize,
    pub t_star_date: String,
    pub window_first: usize,
    pub window_last: usize,
    pub tau_hat: usize,
    pub tau_hat_date: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRegime {
    WhiteNoise,
    ArStructure,
}

impl NoiseRegime {
    pub fn label(self) -> &'static str {
        match self {
            NoiseRegime::WhiteNoise => "white noise: variance comparison applies",
            NoiseRegime::ArStructure => "AR structure: variances estimated but not compared",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StochasticSection {
    pub regime: NoiseRegime,
    pub label: String,
    pub ar_fit: ArFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Diagnostics {
    pub residuals: ResidualSet,
    /// Both phase ACFs read as white noise.
    pub acf_white_noise: bool,
    /// Both AR(1) confidence intervals cover zero.
    pub phi_white_noise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum GlsStructure {
    Separate,
    Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GlsReport {
    pub structure: GlsStructure,
    pub phi_pre: f64,
    pub phi_post: f64,
    pub iterations: usize,
    pub mean_fit: MeanFit,
    pub effects: EffectEstimates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Baselines {
    pub fixed: BaselineFit,
    pub censored: BaselineFit,
    pub quadratic: BaselineFit,
    pub comparison: ModelComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SeriesPoint {
    pub t: usize,
    pub date: String,
    pub observed: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LoglikPoint {
    pub q: usize,
    pub date: String,
    pub loglik: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ResidualPoint {
    pub t: usize,
    pub studentized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AcfPlot {
    /// Lags `1..=max_lag`.
    pub values: Vec<f64>,
    pub band: f64,
}

impl From<&Acf> for AcfPlot {
    fn from(a: &Acf) -> Self {
        Self {
            values: a.values.clone(),
            band: a.band,
        }
    }
}

/// Plot-ready series for the four chart families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlotData {
    pub series: Vec<SeriesPoint>,
    pub t_star: usize,
    pub tau_hat: usize,
    pub loglik: Vec<LoglikPoint>,
    pub residuals: Vec<ResidualPoint>,
    /// Studentized residuals beyond `±residual_guide` deserve a look.
    pub residual_guide: f64,
    pub acf_pre: AcfPlot,
    pub acf_post: AcfPlot,
    pub acf_all: AcfPlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Provenance {
    pub software: String,
    pub version: String,
    /// SHA-256 of the outcome values as little-endian IEEE-754 doubles.
    pub input_sha256: String,
    pub config: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub input: InputSummary,
    pub mean_fit: MeanFit,
    pub effects: EffectEstimates,
    pub stochastic: StochasticSection,
    pub variance_comparison: VarianceComparison,
    pub gls: Section<GlsReport>,
    pub diagnostics: Diagnostics,
    pub baselines: Baselines,
    pub plots: PlotData,
    pub provenance: Provenance,
}

pub fn input_sha256(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn date(series: &TimeSeries, t: usize) -> String {
    series.start().add_months(t as i64 - 1).to_string()
}

pub fn run_pipeline(series: &TimeSeries, config: &AnalysisConfig) -> Result<AnalysisReport, StageError> {
    run_pipeline_with(series, config, Execution::default())
}

/// Runs validation, change-point search, effect sizes, AR diagnostics, the
/// gated variance test, the optional GLS pass, and the comparator models.
pub fn run_pipeline_with(series: &TimeSeries, config: &AnalysisConfig, execution: Execution) -> Result<AnalysisReport, StageError> {
    let window = config.window(series).map_err(at(Stage::Input))?;
    validate_series(series, &window).into_result().map_err(at(Stage::Validation))?;
    if config.gls.enabled && config.gls.iterations == 0 {
        return Err(at(Stage::Validation)(Error::Config("gls.iterations must be at least 1".into())));
    }

    let fit = estimate_change_point_with(series, &window, execution).map_err(at(Stage::ChangePoint))?;
    let effects = effect_sizes(&fit).map_err(at(Stage::EffectSizes))?;
    let resid = compute_residuals(series, &fit);
    let ar = fit_stochastic(&resid).map_err(at(Stage::Stochastic))?;
    let variance = variance_f_test(&resid, &ar).map_err(at(Stage::VarianceTest))?;

    let gls = if config.gls.enabled {
        Section::Applicable {
            result: run_gls(series, &fit, &ar, config.gls.iterations).map_err(at(Stage::Gls))?,
        }
    } else {
        Section::NotApplicable {
            reason: "GLS re-estimation not requested".into(),
        }
    };

    let fixed = segmented_fixed(series, window.t_star).map_err(at(Stage::Baselines))?;
    let censored = segmented_censored(series, &window, config.censor_set).map_err(at(Stage::Baselines))?;
    let quadratic = quadratic_fit(series).map_err(at(Stage::Baselines))?;
    let comparison = mse_compare(&[
        ModelEntry::from_mean_fit("change_point", &fit),
        ModelEntry::from_baseline(&fixed),
        ModelEntry::from_baseline(&censored),
        ModelEntry::from_baseline(&quadratic),
    ])
    .map_err(at(Stage::Comparison))?;

    let regime = if ar.white_noise() {
        NoiseRegime::WhiteNoise
    } else {
        NoiseRegime::ArStructure
    };
    let len = series.len();
    let plots = PlotData {
        series: (1..=len)
            .map(|t| SeriesPoint {
                t,
                date: date(series, t),
                observed: series.at(t),
                fitted: fit.mean_at(t),
            })
            .collect(),
        t_star: window.t_star,
        tau_hat: fit.tau_hat,
        loglik: fit
            .trace
            .iter()
            .map(|p| LoglikPoint {
                q: p.q,
                date: date(series, p.q),
                loglik: p.loglik,
                selected: p.q == fit.tau_hat,
            })
            .collect(),
        residuals: resid
            .studentized
            .iter()
            .enumerate()
            .map(|(i, s)| ResidualPoint {
                t: i + 1,
                studentized: *s,
            })
            .collect(),
        residual_guide: 2.0,
        acf_pre: (&resid.acf_pre).into(),
        acf_post: (&resid.acf_post).into(),
        acf_all: (&resid.acf_all).into(),
    };

    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION.into(),
        input: InputSummary {
            length: len,
            start: date(series, 1),
            end: date(series, len),
            t_star: window.t_star,
            t_star_date: date(series, window.t_star),
            window_first: window.first(),
            window_last: window.last(),
            tau_hat: fit.tau_hat,
            tau_hat_date: date(series, fit.tau_hat),
        },
        diagnostics: Diagnostics {
            acf_white_noise: resid.acf_pre.white_noise && resid.acf_post.white_noise,
            phi_white_noise: ar.white_noise(),
            residuals: resid,
        },
        stochastic: StochasticSection {
            regime,
            label: regime.label().into(),
            ar_fit: ar,
        },
        mean_fit: fit,
        effects,
        variance_comparison: variance,
        gls,
        baselines: Baselines {
            fixed,
            censored,
            quadratic,
            comparison,
        },
        plots,
        provenance: Provenance {
            software: SOFTWARE.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            input_sha256: input_sha256(series.values()),
            config: config.clone(),
        },
    })
}

fn run_gls(series: &TimeSeries, ols: &MeanFit, ar: &ArFit, iterations: usize) -> crate::Result<GlsReport> {
    let mut mode = GlsMode::from_ar_fit(ar);
    let mut current = gls_reestimate(series, ols, mode)?;
    for _ in 1..iterations {
        let resid = compute_residuals(series, &current);
        mode = GlsMode::from_ar_fit(&fit_stochastic(&resid)?);
        current = gls_reestimate(series, ols, mode)?;
    }
    let (structure, phi_pre, phi_post) = match mode {
        GlsMode::Separate { phi_pre, phi_post } => (GlsStructure::Separate, phi_pre, phi_post),
        GlsMode::Overall { phi } => (GlsStructure::Overall, phi, phi),
    };
    Ok(GlsReport {
        structure,
        phi_pre,
        phi_post,
        iterations,
        effects: effect_sizes(&current)?,
        mean_fit: current,
    })
}

/// Parses CSV text with `config` and runs the pipeline.
pub fn analyze_csv<R: std::io::Read>(reader: R, config: &AnalysisConfig, execution: Execution) -> Result<AnalysisReport, StageError> {
    let series = config.series_from_csv(reader).map_err(at(Stage::Input))?;
    run_pipeline_with(&series, config, execution)
}

/// Runs the pipeline on raw values anchored by `config`.
pub fn analyze_values(values: Vec<f64>, config: &AnalysisConfig, execution: Execution) -> Result<AnalysisReport, StageError> {
    let series = config.series_from_values(values).map_err(at(Stage::Input))?;
    run_pipeline_with(&series, config, execution)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            _ => Err(Error::Config(format!("format must be json or text, got {s:?}"))),
        }
    }
}

pub fn emit_report(report: &AnalysisReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Text => render_text(report),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json(report: &AnalysisReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// JSON schema of [`AnalysisReport`], tagged with [`SCHEMA_VERSION`].
pub fn report_schema() -> serde_json::Value {
    let mut v = serde_json::to_value(schemars::schema_for!(AnalysisReport)).expect("schema serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.insert("$id".into(), format!("https://itsa.invalid/schema/report/{SCHEMA_VERSION}").into());
        obj.insert("version".into(), SCHEMA_VERSION.into());
    }
    v
}

fn p_text(p: f64) -> String {
    if p < 1e-4 {
        "<0.0001".into()
    } else {
        format!("{p:.4}")
    }
}

fn row(out: &mut String, name: &str, e: &Estimate) {
    let _ = writeln!(
        out,
        "  {name:<28}{:>10.3}{:>10.3}   [{:>8.3}, {:>8.3}]{:>9}",
        e.estimate,
        e.se,
        e.ci_lower,
        e.ci_upper,
        p_text(e.p_value)
    );
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n{title}");
    let _ = writeln!(out, "  {:<28}{:>10}{:>10}   {:<20}{:>9}", "", "Estimate", "SE", "95% CI", "p");
}

/// Effect-size table in the usual segmented-regression row order.
pub fn render_effects(out: &mut String, title: &str, e: &EffectEstimates) {
    header(out, title);
    row(out, "Intercept (pre)", &e.intercept_pre);
    row(out, "Slope (pre)", &e.slope_pre);
    row(out, "Change in intercept", &e.intercept_change);
    row(out, "Change in slope", &e.trend_change);
    row(out, "Change in level", &e.level_change);
    let _ = writeln!(out, "  {:<28}{:>10}", "Delay in effect (months)", e.delay);
}

fn render_baseline(out: &mut String, name: &str, b: &BaselineFit) {
    match &b.coefficients {
        Coefficients::TwoPhase { pre, post } => {
            let _ = writeln!(
                out,
                "  {name:<12} pre {}..{}  post {}..{}  level at {}",
                pre.first,
                pre.last,
                post.first,
                post.last,
                b.level_at.unwrap_or_default()
            );
        }
        Coefficients::Quadratic { .. } | Coefficients::AltParam { .. } => {
            let _ = writeln!(out, "  {name}");
        }
    }
    if let Some(l) = &b.level_change {
        row(out, "Change in level", l);
    }
    if let Some(t) = &b.trend_change {
        row(out, "Change in slope", t);
    }
    if let Coefficients::Quadratic { beta0, beta1, beta2 } = &b.coefficients {
        row(out, "b0", beta0);
        row(out, "b1", beta1);
        row(out, "b2 (curvature)", beta2);
    }
}

/// Human-readable tables. Every number printed here is a field of the JSON
/// report, rounded for display.
pub fn render_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let i = &r.input;
    let _ = writeln!(out, "Interrupted time-series analysis ({} {})", r.provenance.software, r.provenance.version);
    let _ = writeln!(out, "  Series: {} points, {} to {}", i.length, i.start, i.end);
    let _ = writeln!(out, "  Intervention time: {} ({}); candidates {}..{}", i.t_star, i.t_star_date, i.window_first, i.window_last);
    let _ = writeln!(out, "  Estimated change point: {} ({}); delay {}", i.tau_hat, i.tau_hat_date, r.effects.delay);
    let _ = writeln!(out, "  Log-likelihood at change point: {:.4}", r.mean_fit.loglik);
    if r.mean_fit.near_degenerate {
        let _ = writeln!(out, "  warning: a phase fit is near-degenerate (variance at floor)");
    }

    render_effects(&mut out, "Mean parameters (OLS)", &r.effects);

    let ar = &r.stochastic.ar_fit;
    header(&mut out, "Autocorrelation (AR(1) per phase)");
    row(&mut out, "phi pre", &ar.phi1);
    row(&mut out, "phi post", &ar.phi2);
    row(&mut out, "phi post - phi pre", &ar.nu);
    if !(ar.causal_pre && ar.causal_post) {
        let _ = writeln!(out, "  warning: an AR(1) estimate lies outside (-1, 1)");
    }
    let nf = &ar.nested_f;
    let _ = writeln!(
        out,
        "  Common-phi F test: F({}, {}) = {:.4}, p = {}",
        nf.df1,
        nf.df2,
        nf.statistic,
        p_text(nf.p_value)
    );
    let _ = writeln!(out, "  Noise: {}", r.stochastic.label);

    let v = &r.variance_comparison;
    let _ = writeln!(out, "\nVariance comparison");
    let _ = writeln!(out, "  s1^2 = {:.4} (n = {}), s2^2 = {:.4} (n = {})", v.s1, v.n_pre, v.s2, v.n_post);
    match (v.applicable, v.p_value) {
        (true, Some(p)) => {
            let _ = writeln!(out, "  F({}, {}) = {:.4}, p = {}", v.df1, v.df2, v.f_stat, p_text(p));
        }
        _ => {
            let _ = writeln!(out, "  not applicable: {}", v.reason.as_deref().unwrap_or("not tested"));
        }
    }

    match &r.gls {
        Section::Applicable { result } => {
            let structure = match result.structure {
                GlsStructure::Separate => "separate",
                GlsStructure::Overall => "overall",
            };
            render_effects(
                &mut out,
                &format!(
                    "Mean parameters (GLS, {structure} phi: {:.4} / {:.4}, {} pass)",
                    result.phi_pre, result.phi_post, result.iterations
                ),
                &result.effects,
            );
        }
        Section::NotApplicable { reason } => {
            let _ = writeln!(out, "\nGLS: not applicable: {reason}");
        }
    }

    header(&mut out, "Comparator models");
    render_baseline(&mut out, "fixed_tau", &r.baselines.fixed);
    render_baseline(&mut out, "censored", &r.baselines.censored);
    render_baseline(&mut out, "quadratic", &r.baselines.quadratic);

    let _ = writeln!(out, "\nMSE comparison");
    let _ = writeln!(out, "  {:<6}{:<16}{:>14}{:>6}{:>14}", "rank", "model", "RSS", "df", "MSE");
    for c in &r.baselines.comparison.rows {
        let _ = writeln!(out, "  {:<6}{:<16}{:>14.4}{:>6}{:>14.4}", c.rank, c.model, c.rss, c.df, c.mse);
    }

    let d = &r.diagnostics;
    let _ = writeln!(out, "\nResidual diagnostics");
    let _ = writeln!(
        out,
        "  ACF reads white noise: pre {}, post {}, all {}",
        d.residuals.acf_pre.white_noise, d.residuals.acf_post.white_noise, d.residuals.acf_all.white_noise
    );
    let flagged: Vec<String> = r
        .plots
        .residuals
        .iter()
        .filter(|p| p.studentized.is_some_and(|s| s.abs() > r.plots.residual_guide))
        .map(|p| p.t.to_string())
        .collect();
    let _ = writeln!(
        out,
        "  Studentized residuals beyond +/-{}: {}",
        r.plots.residual_guide,
        if flagged.is_empty() { "none".into() } else { flagged.join(", ") }
    );
    let _ = writeln!(out, "\nInput sha256: {}", r.provenance.input_sha256);
    out
}
