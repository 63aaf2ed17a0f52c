//! Batch entry points behind the `cfguide` binary.
//!
//! Each command returns the JSON it would print, so the binary stays a thin
//! wrapper and tests can call the same functions directly.

use std::fs;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{load_csv, write_csv, Dataset, DatasetConfig, Range};
use crate::guidance::{guidance_report, rank_variables, GuidanceMode, ReportMode, VariableRanking};
use crate::metrics::{analyze, parse_log, MetricsError};
use crate::partition::{FilterClause, FilterSet};
use crate::server::router;
use crate::session::{ServiceConfig, SessionStore};
use crate::synth::{default_study_spec, generate, CausalGraphSpec, GroundTruth};

/// Environment variable naming the default data directory for `serve`.
pub const DATA_DIR_ENV: &str = "CFGUIDE_DATA_DIR";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::User(_) => 1,
            CommandError::Internal(_) => 2,
        }
    }
}

fn user(e: impl std::fmt::Display) -> CommandError {
    CommandError::User(e.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CommandError + '_ {
    move |e| CommandError::User(format!("{}: {e}", path.display()))
}

fn to_json(v: &impl Serialize) -> Result<String, CommandError> {
    serde_json::to_string(v).map_err(|e| CommandError::Internal(e.to_string()))
}

fn pretty(v: &impl Serialize) -> Result<String, CommandError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CommandError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, CommandError> {
    let s = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&s).map_err(|e| CommandError::User(format!("{}: {e}", path.display())))
}

/// Parses `var=lo:hi`. The variable name may itself contain `=`; the last one
/// separates the range.
pub fn parse_filter(s: &str) -> Result<FilterClause, CommandError> {
    let bad = || CommandError::User(format!("bad filter '{s}': expected var=lo:hi"));
    let (var, range) = s.rsplit_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let var = var.trim();
    if var.is_empty() {
        return Err(bad());
    }
    Ok(FilterClause {
        variable: var.to_string(),
        range: Range::new(lo, hi).map_err(user)?,
    })
}

pub struct GenerateOptions {
    /// Causal graph JSON; the built-in study graph when absent.
    pub spec: Option<PathBuf>,
    pub n: usize,
    pub out: PathBuf,
    /// Overrides the graph's seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Generated {
    rows: usize,
    columns: usize,
    data: PathBuf,
    config: PathBuf,
    truth: PathBuf,
}

/// Writes `data.csv`, `config.json` and `truth.json` into `out`.
pub fn cmd_generate(opts: &GenerateOptions) -> Result<String, CommandError> {
    let mut spec: CausalGraphSpec = match &opts.spec {
        Some(p) => read_json(p)?,
        None => default_study_spec(),
    };
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    let (data, truth) = generate(&spec, opts.n).map_err(user)?;
    fs::create_dir_all(&opts.out).map_err(io_err(&opts.out))?;
    let out = Generated {
        rows: data.row_count(),
        columns: data.column_count(),
        data: opts.out.join("data.csv"),
        config: opts.out.join("config.json"),
        truth: opts.out.join("truth.json"),
    };
    let file = fs::File::create(&out.data).map_err(io_err(&out.data))?;
    write_csv(&data, file).map_err(user)?;
    fs::write(&out.config, pretty(&data.config())?).map_err(io_err(&out.config))?;
    fs::write(&out.truth, pretty(&truth)?).map_err(io_err(&out.truth))?;
    to_json(&out)
}

pub fn load_dataset(csv: &Path, config: &Path) -> Result<Dataset, CommandError> {
    let config: DatasetConfig = read_json(config)?;
    let file = fs::File::open(csv).map_err(io_err(csv))?;
    load_csv(BufReader::new(file), &config).map_err(|e| CommandError::User(format!("{}: {e}", csv.display())))
}

pub struct GuideOptions {
    pub csv: PathBuf,
    pub config: PathBuf,
    /// `var=lo:hi` clauses.
    pub filters: Vec<String>,
    pub mode: ReportMode,
}

#[derive(Debug, Serialize)]
struct BothRankings {
    cf: VariableRanking,
    corr: VariableRanking,
}

/// A guidance report for the given filters, or a ranking of all candidate
/// variables when there are none.
pub fn cmd_guide(opts: &GuideOptions) -> Result<String, CommandError> {
    let clauses = opts
        .filters
        .iter()
        .map(|s| parse_filter(s))
        .collect::<Result<Vec<_>, _>>()?;
    let filters = FilterSet::from_clauses(clauses).map_err(user)?;
    let d = load_dataset(&opts.csv, &opts.config)?;
    if !filters.is_empty() {
        return to_json(&guidance_report(&d, &filters, opts.mode).map_err(user)?);
    }
    let rank = |m| rank_variables(&d, &filters, m).map_err(user);
    match opts.mode {
        ReportMode::Cf => to_json(&rank(GuidanceMode::Cf)?),
        ReportMode::Corr => to_json(&rank(GuidanceMode::Corr)?),
        ReportMode::Both => to_json(&BothRankings {
            cf: rank(GuidanceMode::Cf)?,
            corr: rank(GuidanceMode::Corr)?,
        }),
    }
}

/// Behavior counts and tree metrics for a JSONL interaction log, plus wrong
/// attempts when a ground truth is given.
pub fn cmd_analyze(log: &Path, truth: Option<&Path>) -> Result<String, CommandError> {
    let file = fs::File::open(log).map_err(io_err(log))?;
    let events = parse_log(BufReader::new(file)).map_err(|e| match e {
        MetricsError::Parse { line, message } => {
            CommandError::User(format!("{}: line {line}: {message}", log.display()))
        }
        other => user(other),
    })?;
    let truth: Option<GroundTruth> = truth.map(read_json).transpose()?;
    to_json(&analyze(&events, truth.as_ref(), None).map_err(user)?)
}

pub struct ServeOptions {
    pub host: String,
    pub port: u16,
    pub data_dir: Option<PathBuf>,
    pub row_cap: Option<usize>,
}

/// Binds the listener and serves until interrupted. The bound address is
/// reported on stderr as `listening on <addr>`.
pub fn cmd_serve(opts: &ServeOptions) -> Result<(), CommandError> {
    let store = SessionStore::open(ServiceConfig {
        data_dir: opts.data_dir.clone(),
        row_cap: opts.row_cap,
    })
    .map_err(user)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CommandError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((opts.host.as_str(), opts.port))
            .await
            .map_err(|e| CommandError::User(format!("cannot bind {}:{}: {e}", opts.host, opts.port)))?;
        let addr: SocketAddr = listener.local_addr().map_err(|e| CommandError::Internal(e.to_string()))?;
        eprintln!("listening on {addr}");
        tracing::info!(%addr, sessions = store.session_ids().len(), "serving");
        axum::serve(listener, router(Arc::new(store)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CommandError::Internal(e.to_string()))
    })
}
