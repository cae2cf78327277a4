//! `itsa`: interrupted time-series analysis from the command line.
//!
//! Exit codes: 0 success, 2 invalid input or settings, 3 numerical failure.

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use itsa_core::baselines::CensorSet;
use itsa_core::changepoint::Execution;
use itsa_core::config::{AnalysisConfig, Tet};
use itsa_core::csvio::{write_csv, CsvSchema};
use itsa_core::report::{analyze_csv, emit_report, report_schema, Format};
use itsa_core::simulate::{generate, generate_with, replicate_rng, SimSpec};
use itsa_service::{router, ServiceConfig, DEFAULT_BODY_LIMIT};

#[derive(Parser)]
#[command(name = "itsa", version, about = "Interrupted time-series analysis with change-point estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV series and write a report.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic series as CSV.
    Simulate(SimulateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Print the report JSON schema.
    Schema,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV file ("-" for stdin).
    #[arg(long, short)]
    input: PathBuf,
    /// TOML settings file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Formal intervention time: 1-based index or YYYY-MM.
    #[arg(long)]
    tet: Option<Tet>,
    /// Candidate change points before the intervention time.
    #[arg(long)]
    before: Option<usize>,
    /// Candidate change points after the intervention time.
    #[arg(long)]
    after: Option<usize>,
    #[arg(long)]
    start_month: Option<u32>,
    #[arg(long)]
    start_year: Option<i32>,
    /// Outcome column name.
    #[arg(long)]
    value_column: Option<String>,
    /// Date column name (YYYY-MM), if the file has one.
    #[arg(long)]
    date_column: Option<String>,
    /// Indices dropped from the censored comparator: `window`, `none` or `first:last`.
    #[arg(long)]
    censor_set: Option<CensorSet>,
    /// Add a GLS re-estimation pass under the fitted AR(1) structure.
    #[arg(long)]
    gls_pass: bool,
    /// Number of GLS refit rounds.
    #[arg(long)]
    gls_iterations: Option<usize>,
    /// Report destination (stdout when absent).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Evaluate candidates on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML simulation spec.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replication index; draws from stream `replicate` of the seed.
    #[arg(long)]
    replicate: Option<u64>,
    /// CSV destination (stdout when absent).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "ITSA_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Browser origins allowed to call the API, comma separated.
    #[arg(long, env = "ITSA_CORS_ORIGIN", value_delimiter = ',')]
    cors_origin: Vec<String>,
    #[arg(long, env = "ITSA_BODY_LIMIT", default_value_t = DEFAULT_BODY_LIMIT)]
    body_limit: usize,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(s) => simulate(s),
        Command::Serve(s) => serve(s).map_err(|e| Failure { code: 1, error: e }),
        Command::Schema => write_out(None, &(serde_json::to_string_pretty(&report_schema()).unwrap_or_default() + "\n")).map_err(|e| Failure { code: 1, error: e }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().lock().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn read_in(path: &Path) -> Result<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::Read::read_to_end(&mut io::stdin(), &mut buf).context("reading stdin")?;
        Ok(buf)
    } else {
        fs::read(path).with_context(|| format!("reading {}", path.display()))
    }
}

/// Settings from the config file (if any) with command-line overrides.
fn resolve_config(a: &AnalyzeArgs) -> Result<AnalysisConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            // let flags fill in required fields the file leaves out
            if let Some(t) = a.tet {
                table.insert("tet".into(), toml::Value::try_from(t)?);
            }
            for (key, v) in [("before", a.before), ("after", a.after)] {
                if let Some(v) = v {
                    table.insert(key.into(), toml::Value::Integer(v as i64));
                }
            }
            AnalysisConfig::from_toml(&toml::to_string(&table)?)?
        }
        None => {
            let tet = a.tet.context("--tet is required without --config")?;
            let before = a.before.context("--before is required without --config")?;
            let after = a.after.context("--after is required without --config")?;
            AnalysisConfig::new(tet, before, after)
        }
    };
    if a.start_month.is_some() {
        cfg.start_month = a.start_month;
    }
    if a.start_year.is_some() {
        cfg.start_year = a.start_year;
    }
    if let Some(c) = &a.value_column {
        cfg.csv.value_column = c.clone();
    }
    if a.date_column.is_some() {
        cfg.csv.date_column = a.date_column.clone();
    }
    if let Some(c) = a.censor_set {
        cfg.censor_set = c;
    }
    if a.gls_pass {
        cfg.gls.enabled = true;
    }
    if let Some(n) = a.gls_iterations {
        cfg.gls.iterations = n;
    }
    Ok(cfg)
}

fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&a).map_err(invalid)?;
    let input = read_in(&a.input).map_err(invalid)?;
    let execution = if a.serial { Execution::Serial } else { Execution::Parallel };
    let report = analyze_csv(input.as_slice(), &cfg, execution).map_err(|e| Failure {
        code: if e.is_validation() { 2 } else { 3 },
        error: e.into(),
    })?;
    write_out(a.output.as_deref(), &emit_report(&report, a.format)).map_err(|e| Failure { code: 1, error: e })
}

fn simulate(s: SimulateArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&s.config)
        .with_context(|| format!("reading {}", s.config.display()))
        .map_err(invalid)?;
    let mut spec: SimSpec = toml::from_str(&text)
        .with_context(|| format!("parsing {}", s.config.display()))
        .map_err(invalid)?;
    if let Some(seed) = s.seed {
        spec.seed = seed;
    }
    let sim = match s.replicate {
        Some(r) => generate_with(&spec, &mut replicate_rng(spec.seed, r)),
        None => generate(&spec),
    }
    .map_err(invalid)?;
    if sim.clamped {
        eprintln!("warning: values were clamped to the bounds");
    }
    let mut buf = Vec::new();
    write_csv(&sim.series, &CsvSchema::default(), &mut buf).map_err(invalid)?;
    write_out(s.output.as_deref(), &String::from_utf8_lossy(&buf)).map_err(|e| Failure { code: 1, error: e })
}

#[tokio::main]
async fn serve(s: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let cfg = ServiceConfig {
        cors_origins: s.cors_origin,
        body_limit: s.body_limit,
    };
    let listener = tokio::net::TcpListener::bind(s.bind).await.with_context(|| format!("binding {}", s.bind))?;
    tracing::info!(addr = %s.bind, "listening");
    axum::serve(listener, router(&cfg)).await.context("serving")
}
