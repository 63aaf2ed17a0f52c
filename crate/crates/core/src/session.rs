//! Analyst sessions: dataset registry, filter state, event log, answers.
//!
//! A [`SessionStore`] owns every loaded dataset and session. Each session is
//! guarded by its own mutex so mutations on one session serialize while other
//! sessions proceed. With a data directory configured, everything is written
//! to disk as it changes:
//!
//! ```text
//! <root>/datasets/<id>/data.csv
//! <root>/datasets/<id>/config.json
//! <root>/datasets/<id>/truth.json      (optional)
//! <root>/sessions/<id>/events.jsonl
//! <root>/sessions/<id>/snapshot.json
//! ```
//!
//! On open the store reloads both trees. A session whose snapshot filters do
//! not match a replay of its event log is skipped.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    column_stats, load_csv, write_csv, ColumnRole, ColumnStats, Dataset, DatasetConfig,
    DatasetError, Histogram, Range,
};
use crate::guidance::{GuidanceError, GuidanceMode, GuidanceReport, Guide, VariableRanking};
use crate::metrics::{
    analyze, check_distinct, evaluate_answers, parse_log, AnalysisReport, EventKind, InteractionEvent,
    MetricsError, RankingEvaluation,
};
use crate::partition::{apply_filters, FilterSet, PartitionError};
use crate::synth::GroundTruth;

pub const LABEL_IN: &str = "filtered data";
pub const LABEL_CF: &str = "those similar with filtered data";
pub const LABEL_REM: &str = "those dissimilar with filtered data";
pub const LABEL_EX: &str = "those not in filtered data";

/// Suggested row cap for large uploads.
pub const DEFAULT_ROW_CAP: usize = 5000;
pub const SUBSAMPLE_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    /// The request is well formed but does not fit the session's state.
    #[error("{0}")]
    State(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Invalid(_) => "invalid_request",
            ServiceError::State(_) => "state_error",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl From<DatasetError> for ServiceError {
    fn from(e: DatasetError) -> Self {
        ServiceError::Invalid(e.to_string())
    }
}

impl From<MetricsError> for ServiceError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidAnswer(m) => ServiceError::Invalid(m),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<GuidanceError> for ServiceError {
    fn from(e: GuidanceError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Persist datasets and sessions under this directory.
    pub data_dir: Option<PathBuf>,
    /// Compute guidance on a seeded subsample of at most this many rows.
    pub row_cap: Option<usize>,
}

struct DatasetEntry {
    data: Dataset,
    truth: Option<GroundTruth>,
    full_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub name: String,
    pub rows: usize,
    /// Rows used for guidance; below `rows` when the row cap applies.
    pub guidance_rows: usize,
    pub outcome: String,
    pub columns: Vec<String>,
    pub has_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub role: ColumnRole,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default_range: Option<Range>,
    pub stats: ColumnStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSubmission {
    /// Up to five variables believed to cause the outcome.
    pub t1: Vec<String>,
    /// Up to five variables, strongest first.
    pub t2: Vec<String>,
    pub t1_confidence: u8,
    pub t2_confidence: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub answers: AnswerSubmission,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<RankingEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub dataset: String,
    pub mode: GuidanceMode,
    pub filters: FilterSet,
    #[serde(skip)]
    pub events: Vec<InteractionEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<AnswerSubmission>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<RankingEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum FilterAction {
    /// Without a range the variable's default range is used.
    Add {
        variable: String,
        #[serde(default)]
        range: Option<Range>,
    },
    Remove { variable: String },
    SetRange { variable: String, range: Range },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    In,
    Cf,
    Rem,
    Ex,
}

impl Subset {
    pub fn label(self) -> &'static str {
        match self {
            Subset::In => LABEL_IN,
            Subset::Cf => LABEL_CF,
            Subset::Rem => LABEL_REM,
            Subset::Ex => LABEL_EX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetHistogram {
    pub subset: Subset,
    pub label: String,
    pub size: usize,
    pub counts: Vec<usize>,
}

/// Outcome histograms of the current subsets over shared bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionPayload {
    pub mode: GuidanceMode,
    pub outcome: String,
    pub edges: Vec<f64>,
    /// Empty while no filter is applied.
    pub subsets: Vec<SubsetHistogram>,
    /// Guidance for the current filters; absent without filters or when the
    /// subsets degenerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<GuidanceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationResponse {
    pub filters: FilterSet,
    pub ranking: VariableRanking,
    pub distributions: DistributionPayload,
}

/// Outcome distributions of IN/CF/REM (cf) or IN/EX (corr) for `filters`.
pub fn distribution_payload(
    guide: &Guide<'_>,
    filters: &FilterSet,
    mode: GuidanceMode,
) -> Result<DistributionPayload, PartitionError> {
    let d = guide.dataset();
    let y = d.outcome_index();
    let spec = &d.columns()[y];
    let edges = Histogram::edges_for(spec.min, spec.max, d.bins());
    let hist = |subset: Subset, rows: &[usize]| SubsetHistogram {
        subset,
        label: subset.label().to_string(),
        size: rows.len(),
        counts: Histogram::with_edges(rows.iter().map(|&i| d.value(i, y)), edges.clone()).counts,
    };

    if filters.is_empty() {
        return Ok(DistributionPayload {
            mode,
            outcome: d.outcome_name().to_string(),
            edges,
            subsets: Vec::new(),
            summary: None,
        });
    }
    let (in_idx, ex_idx) = apply_filters(d, filters)?;
    let subsets = match mode {
        GuidanceMode::Cf => {
            // degenerate splits keep all three series: nothing is matched
            let (cf, rem) = match guide.partition(filters) {
                Ok(p) => (p.cf_idx, p.rem_idx),
                Err(_) => (Vec::new(), ex_idx.clone()),
            };
            vec![hist(Subset::In, &in_idx), hist(Subset::Cf, &cf), hist(Subset::Rem, &rem)]
        }
        GuidanceMode::Corr => vec![hist(Subset::In, &in_idx), hist(Subset::Ex, &ex_idx)],
    };
    Ok(DistributionPayload {
        mode,
        outcome: d.outcome_name().to_string(),
        edges,
        subsets,
        summary: guide.report(filters, mode.into()).ok(),
    })
}

/// Rebuilds the filter state from a log. Adds without a range use the
/// dataset's default range.
pub fn replay_filters(events: &[InteractionEvent], d: &Dataset) -> Result<FilterSet, ServiceError> {
    let mut f = FilterSet::new();
    for (i, e) in events.iter().enumerate() {
        let bad = |m: String| ServiceError::State(format!("event {i}: {m}"));
        match e.kind {
            EventKind::AddVariable => {
                let range = match e.range {
                    Some(r) => r,
                    None => d
                        .column_spec(&e.variable)
                        .and_then(|c| c.default_range)
                        .ok_or_else(|| bad(format!("no range for '{}'", e.variable)))?,
                };
                f.add(e.variable.clone(), range).map_err(|e| bad(e.to_string()))?;
            }
            EventKind::RemoveVariable => {
                f.remove(&e.variable)
                    .ok_or_else(|| bad(format!("'{}' is not filtered", e.variable)))?;
            }
            EventKind::ChangeRange => {
                let range = e.range.ok_or_else(|| bad("range change without a range".into()))?;
                f.set_range(&e.variable, range).map_err(|e| bad(e.to_string()))?;
            }
        }
    }
    Ok(f)
}

fn subsample(d: Dataset, cap: usize) -> Result<Dataset, DatasetError> {
    if d.row_count() <= cap {
        return Ok(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
    let mut rows = rand::seq::index::sample(&mut rng, d.row_count(), cap).into_vec();
    rows.sort_unstable();
    d.select_rows(&rows)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|t| t.as_millis() as u64)
        .unwrap_or(0)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), ServiceError> {
    let tmp = path.with_extension("json.tmp");
    let body = serde_json::to_vec_pretty(value).map_err(|e| ServiceError::Internal(e.to_string()))?;
    fs::write(&tmp, body)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ServiceError> {
    let s = fs::read_to_string(path)?;
    serde_json::from_str(&s)
        .map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
}

pub struct SessionStore {
    config: ServiceConfig,
    datasets: RwLock<HashMap<String, Arc<DatasetEntry>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    /// In-memory store without persistence or row cap.
    pub fn in_memory() -> Self {
        Self {
            config: ServiceConfig::default(),
            datasets: RwLock::default(),
            sessions: RwLock::default(),
        }
    }

    /// Opens a store, restoring anything found under the data directory.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let store = Self {
            config,
            datasets: RwLock::default(),
            sessions: RwLock::default(),
        };
        if let Some(root) = store.config.data_dir.clone() {
            fs::create_dir_all(root.join("datasets"))?;
            fs::create_dir_all(root.join("sessions"))?;
            store.restore(&root)?;
        }
        Ok(store)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn restore(&self, root: &Path) -> Result<(), ServiceError> {
        for entry in fs::read_dir(root.join("datasets"))? {
            let dir = entry?.path();
            let id = dir.file_name().unwrap_or_default().to_string_lossy().to_string();
            let config: DatasetConfig = read_json(&dir.join("config.json"))?;
            let file = fs::File::open(dir.join("data.csv"))?;
            let data = load_csv(BufReader::new(file), &config)?;
            let truth_path = dir.join("truth.json");
            let truth = if truth_path.exists() { Some(read_json(&truth_path)?) } else { None };
            self.register(id, data, truth)?;
        }
        for entry in fs::read_dir(root.join("sessions"))? {
            let dir = entry?.path();
            match self.restore_session(&dir) {
                Ok(s) => {
                    tracing::info!(session = %s.id, events = s.events.len(), "restored session");
                    self.sessions.write().unwrap().insert(s.id.clone(), Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipping session"),
            }
        }
        Ok(())
    }

    fn restore_session(&self, dir: &Path) -> Result<Session, ServiceError> {
        let mut s: Session = read_json(&dir.join("snapshot.json"))?;
        let log = dir.join("events.jsonl");
        if log.exists() {
            s.events = parse_log(BufReader::new(fs::File::open(log)?))?;
        }
        let entry = self.entry(&s.dataset)?;
        let replayed = replay_filters(&s.events, &entry.data)?;
        if replayed != s.filters {
            return Err(ServiceError::State(format!(
                "session {}: snapshot filters differ from the event log",
                s.id
            )));
        }
        Ok(s)
    }

    fn register(&self, id: String, data: Dataset, truth: Option<GroundTruth>) -> Result<DatasetInfo, ServiceError> {
        if let Some(t) = &truth {
            if let Some(bad) = t.ranking.iter().find(|c| data.column_index(&c.variable).is_none()) {
                return Err(ServiceError::Invalid(format!(
                    "ground truth names unknown variable '{}'",
                    bad.variable
                )));
            }
        }
        let full_rows = data.row_count();
        let data = match self.config.row_cap {
            Some(cap) => subsample(data, cap)?,
            None => data,
        };
        let entry = DatasetEntry { data, truth, full_rows };
        let info = Self::info(&id, &entry);
        self.datasets.write().unwrap().insert(id, Arc::new(entry));
        Ok(info)
    }

    fn info(id: &str, e: &DatasetEntry) -> DatasetInfo {
        DatasetInfo {
            id: id.to_string(),
            name: e.data.name().to_string(),
            rows: e.full_rows,
            guidance_rows: e.data.row_count(),
            outcome: e.data.outcome_name().to_string(),
            columns: e.data.columns().iter().map(|c| c.name.clone()).collect(),
            has_truth: e.truth.is_some(),
        }
    }

    /// Parses and registers an uploaded CSV.
    pub fn add_dataset_csv(
        &self,
        csv: &[u8],
        config: DatasetConfig,
        truth: Option<GroundTruth>,
    ) -> Result<DatasetInfo, ServiceError> {
        let data = load_csv(csv, &config)?;
        self.add_dataset(data, truth)
    }

    pub fn add_dataset(&self, data: Dataset, truth: Option<GroundTruth>) -> Result<DatasetInfo, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        if let Some(root) = &self.config.data_dir {
            let dir = root.join("datasets").join(&id);
            fs::create_dir_all(&dir)?;
            write_csv(&data, fs::File::create(dir.join("data.csv"))?)?;
            write_json(&dir.join("config.json"), &data.config())?;
            if let Some(t) = &truth {
                write_json(&dir.join("truth.json"), t)?;
            }
        }
        self.register(id, data, truth)
    }

    fn entry(&self, id: &str) -> Result<Arc<DatasetEntry>, ServiceError> {
        self.datasets
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown dataset '{id}'")))
    }

    fn session_handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session '{id}'")))
    }

    pub fn dataset_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.datasets.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn dataset_info(&self, id: &str) -> Result<DatasetInfo, ServiceError> {
        Ok(Self::info(id, &*self.entry(id)?))
    }

    /// The rows guidance is computed on.
    pub fn dataset(&self, id: &str) -> Result<Dataset, ServiceError> {
        Ok(self.entry(id)?.data.clone())
    }

    /// Per-column statistics and histograms for range brushing.
    pub fn columns(&self, id: &str) -> Result<Vec<ColumnSummary>, ServiceError> {
        let e = self.entry(id)?;
        e.data
            .columns()
            .iter()
            .map(|c| {
                Ok(ColumnSummary {
                    name: c.name.clone(),
                    role: c.role,
                    default_range: c.default_range,
                    stats: column_stats(&e.data, &c.name)?,
                })
            })
            .collect()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn create_session(&self, dataset: &str, mode: GuidanceMode) -> Result<Session, ServiceError> {
        self.entry(dataset)?;
        let s = Session {
            id: uuid::Uuid::new_v4().to_string(),
            dataset: dataset.to_string(),
            mode,
            filters: FilterSet::new(),
            events: Vec::new(),
            answers: None,
            evaluation: None,
        };
        if let Some(root) = &self.config.data_dir {
            let dir = root.join("sessions").join(&s.id);
            fs::create_dir_all(&dir)?;
            fs::File::create(dir.join("events.jsonl"))?;
            write_json(&dir.join("snapshot.json"), &s)?;
        }
        self.sessions
            .write()
            .unwrap()
            .insert(s.id.clone(), Arc::new(Mutex::new(s.clone())));
        Ok(s)
    }

    pub fn session(&self, id: &str) -> Result<Session, ServiceError> {
        Ok(self.session_handle(id)?.lock().unwrap().clone())
    }

    fn persist(&self, s: &Session, new_event: Option<&InteractionEvent>) -> Result<(), ServiceError> {
        let Some(root) = &self.config.data_dir else {
            return Ok(());
        };
        let dir = root.join("sessions").join(&s.id);
        if let Some(e) = new_event {
            let mut line = serde_json::to_string(e).map_err(|e| ServiceError::Internal(e.to_string()))?;
            line.push('\n');
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join("events.jsonl"))?
                .write_all(line.as_bytes())?;
        }
        write_json(&dir.join("snapshot.json"), s)
    }

    /// Applies one filter action, logs it, and returns the refreshed
    /// ranking and distributions.
    pub fn mutate_filter(&self, id: &str, action: FilterAction) -> Result<MutationResponse, ServiceError> {
        let handle = self.session_handle(id)?;
        let mut s = handle.lock().unwrap();
        let entry = self.entry(&s.dataset)?;
        let d = &entry.data;

        let (kind, variable, range) = match action {
            FilterAction::Add { variable, range } => {
                let spec = d
                    .column_spec(&variable)
                    .ok_or_else(|| ServiceError::Invalid(format!("unknown variable '{variable}'")))?;
                let range = range.or(spec.default_range).ok_or_else(|| {
                    ServiceError::Invalid(format!("'{variable}' is the outcome and cannot be filtered"))
                })?;
                if s.filters.contains(&variable) {
                    return Err(ServiceError::State(format!("'{variable}' is already filtered")));
                }
                (EventKind::AddVariable, variable, Some(range))
            }
            FilterAction::SetRange { variable, range } => {
                if !s.filters.contains(&variable) {
                    return Err(ServiceError::State(format!("'{variable}' is not filtered")));
                }
                (EventKind::ChangeRange, variable, Some(range))
            }
            FilterAction::Remove { variable } => {
                if !s.filters.contains(&variable) {
                    tracing::warn!(session = %s.id, %variable, "remove of a variable that is not filtered; ignored");
                    return Err(ServiceError::State(format!("'{variable}' is not filtered")));
                }
                (EventKind::RemoveVariable, variable, None)
            }
        };

        let mut filters = s.filters.clone();
        match kind {
            EventKind::AddVariable => filters.add(variable.clone(), range.expect("add has a range")),
            EventKind::ChangeRange => filters.set_range(&variable, range.expect("change has a range")),
            EventKind::RemoveVariable => filters.remove(&variable).map(|_| ()).ok_or_else(|| {
                PartitionError::InvalidFilter(format!("'{variable}' is not filtered"))
            }),
        }
        .map_err(|e| ServiceError::State(e.to_string()))?;

        let guide = Guide::new(d);
        let ranking = guide.rank(&filters, s.mode)?;
        let distributions = distribution_payload(&guide, &filters, s.mode)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;

        let ts = now_ms().max(s.events.last().map_or(0, |e| e.timestamp));
        let mut event = InteractionEvent::new(ts, &s.id, kind, &variable);
        if let Some(r) = range {
            event = event.with_range(r);
        }
        s.filters = filters;
        s.events.push(event.clone());
        self.persist(&s, Some(&event))?;

        Ok(MutationResponse {
            filters: s.filters.clone(),
            ranking,
            distributions,
        })
    }

    /// Ranking for the session's current filters.
    pub fn guidance(&self, id: &str) -> Result<VariableRanking, ServiceError> {
        let (dataset, filters, mode) = {
            let s = self.session_handle(id)?;
            let s = s.lock().unwrap();
            (s.dataset.clone(), s.filters.clone(), s.mode)
        };
        let entry = self.entry(&dataset)?;
        Ok(Guide::new(&entry.data).rank(&filters, mode)?)
    }

    pub fn distributions(&self, id: &str) -> Result<DistributionPayload, ServiceError> {
        let (dataset, filters, mode) = {
            let s = self.session_handle(id)?;
            let s = s.lock().unwrap();
            (s.dataset.clone(), s.filters.clone(), s.mode)
        };
        let entry = self.entry(&dataset)?;
        distribution_payload(&Guide::new(&entry.data), &filters, mode)
            .map_err(|e| ServiceError::Internal(e.to_string()))
    }

    pub fn submit_answers(&self, id: &str, answers: AnswerSubmission) -> Result<AnswerResponse, ServiceError> {
        for c in [answers.t1_confidence, answers.t2_confidence] {
            if !(1..=5).contains(&c) {
                return Err(ServiceError::Invalid(format!("confidence {c} is outside 1..=5")));
            }
        }
        let handle = self.session_handle(id)?;
        let mut s = handle.lock().unwrap();
        let entry = self.entry(&s.dataset)?;
        for v in answers.t1.iter().chain(&answers.t2) {
            if entry.data.column_index(v).is_none() {
                return Err(ServiceError::Invalid(format!("unknown variable '{v}'")));
            }
        }
        let evaluation = match &entry.truth {
            Some(t) => Some(evaluate_answers(&answers.t1, &answers.t2, t)?),
            None => {
                check_distinct(&answers.t1, 5)?;
                check_distinct(&answers.t2, 5)?;
                None
            }
        };
        s.answers = Some(answers.clone());
        s.evaluation = evaluation.clone();
        self.persist(&s, None)?;
        Ok(AnswerResponse { answers, evaluation })
    }

    pub fn export_analysis(&self, id: &str) -> Result<AnalysisReport, ServiceError> {
        let s = self.session(id)?;
        let entry = self.entry(&s.dataset)?;
        Ok(analyze(&s.events, entry.truth.as_ref(), s.evaluation)?)
    }
}
