//! Numeric tables with one outcome column.
//!
//! A [`Dataset`] is immutable once built. Every cell is finite, column names
//! are unique, and each filterable column carries a default filter range that
//! seeds the initial variable ranking. [`NormalizedView`] rescales every column
//! to `[0, 1]` so that point distances are comparable across variables.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Histogram bin count used when the dataset config does not set one.
pub const DEFAULT_BINS: usize = 20;

/// Quantile used for the automatic default filter range.
pub const AUTO_RANGE_QUANTILE: f64 = 0.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("row {row}, column '{column}': cannot parse '{value}' as a finite number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for DatasetError {
    fn from(e: csv::Error) -> Self {
        DatasetError::Csv(e.to_string())
    }
}

/// Closed interval `[lo, hi]`. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self, InvalidRange> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(InvalidRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("invalid range [{lo}, {hi}]: bounds must be finite with lo <= hi")]
pub struct InvalidRange {
    pub lo: f64,
    pub hi: f64,
}

impl TryFrom<[f64; 2]> for Range {
    type Error = InvalidRange;
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Range::new(v[0], v[1])
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Outcome,
    Filterable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    /// `None` only for the outcome column.
    pub default_range: Option<Range>,
    pub role: ColumnRole,
}

/// Per-column entry of the dataset config document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_range: Option<Range>,
}

/// Dataset config document: `{name, outcome, columns: [{name, default_range?}], bins?}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(default)]
    pub name: String,
    pub outcome: String,
    #[serde(default)]
    pub columns: Vec<ColumnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

impl DatasetConfig {
    pub fn new(name: impl Into<String>, outcome: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            outcome: outcome.into(),
            ..Default::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(s).map_err(|e| DatasetError::Config(e.to_string()))
    }
}

/// Immutable N x M table of finite reals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    columns: Vec<ColumnSpec>,
    values: Vec<f64>,
    rows: usize,
    outcome: usize,
    bins: usize,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Builds a dataset from named columns of equal length.
    ///
    /// Default ranges come from `config` where given, otherwise from the
    /// upper-quartile rule `[q75, max]`.
    pub fn from_columns(
        config: &DatasetConfig,
        columns: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, DatasetError> {
        let rows = columns.first().map(|c| c.1.len()).unwrap_or(0);
        if columns.is_empty() {
            return Err(DatasetError::Config("no columns".into()));
        }
        let mut index = HashMap::with_capacity(columns.len());
        for (i, (name, col)) in columns.iter().enumerate() {
            if name.is_empty() {
                return Err(DatasetError::Config(format!("column {i} has an empty name")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(DatasetError::Config(format!("duplicate column '{name}'")));
            }
            if col.len() != rows {
                return Err(DatasetError::Config(format!(
                    "column '{name}' has {} values, expected {rows}",
                    col.len()
                )));
            }
            if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::Parse {
                    row: r + 1,
                    column: name.clone(),
                    value: col[r].to_string(),
                });
            }
        }
        if rows == 0 {
            return Err(DatasetError::EmptyDataset);
        }
        let outcome = *index.get(&config.outcome).ok_or_else(|| {
            DatasetError::Config(format!("outcome column '{}' not in header", config.outcome))
        })?;

        let mut overrides: HashMap<&str, Option<Range>> = HashMap::new();
        for c in &config.columns {
            if !index.contains_key(&c.name) {
                return Err(DatasetError::Config(format!(
                    "config names unknown column '{}'",
                    c.name
                )));
            }
            if c.name == config.outcome && c.default_range.is_some() {
                return Err(DatasetError::Config(
                    "the outcome column cannot have a default range".into(),
                ));
            }
            overrides.insert(&c.name, c.default_range);
        }

        let bins = config.bins.unwrap_or(DEFAULT_BINS);
        if bins == 0 {
            return Err(DatasetError::Config("bins must be at least 1".into()));
        }

        let mut specs = Vec::with_capacity(columns.len());
        for (i, (name, col)) in columns.iter().enumerate() {
            let (min, max) = min_max(col);
            let (role, default_range) = if i == outcome {
                (ColumnRole::Outcome, None)
            } else {
                let range = match overrides.get(name.as_str()).copied().flatten() {
                    Some(r) => clamp_range(name, r, min, max)?,
                    None => {
                        let sorted = sorted_copy(col);
                        Range::new(quantile_sorted(&sorted, AUTO_RANGE_QUANTILE), max)
                            .expect("q75 <= max")
                    }
                };
                (ColumnRole::Filterable, Some(range))
            };
            specs.push(ColumnSpec {
                name: name.clone(),
                min,
                max,
                default_range,
                role,
            });
        }

        let m = columns.len();
        let mut values = vec![0.0; rows * m];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                values[i * m + j] = *v;
            }
        }

        Ok(Self {
            name: config.name.clone(),
            columns: specs,
            values,
            rows,
            outcome,
            bins,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn outcome_index(&self) -> usize {
        self.outcome
    }

    pub fn outcome_name(&self) -> &str {
        &self.columns[self.outcome].name
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require_column(&self, name: &str) -> Result<usize, DatasetError> {
        self.column_index(name)
            .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))
    }

    pub fn column_spec(&self, name: &str) -> Option<&ColumnSpec> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    /// Names of every non-outcome column, in table order.
    pub fn filterable_names(&self) -> impl Iterator<Item = &str> {
        self.columns
            .iter()
            .filter(|c| c.role == ColumnRole::Filterable)
            .map(|c| c.name.as_str())
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.columns.len();
        &self.values[i * m..(i + 1) * m]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.value(i, col)).collect()
    }

    /// New dataset holding only `rows` (in the given order). Column specs keep
    /// the parent's default ranges; min/max are recomputed.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let m = self.columns.len();
        let mut values = Vec::with_capacity(rows.len() * m);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        let mut columns = self.columns.clone();
        for (j, spec) in columns.iter_mut().enumerate() {
            let col: Vec<f64> = rows.iter().map(|&r| self.value(r, j)).collect();
            let (min, max) = min_max(&col);
            spec.min = min;
            spec.max = max;
            if let Some(r) = spec.default_range {
                let lo = r.lo().clamp(min, max);
                let hi = r.hi().clamp(min, max);
                spec.default_range = Some(Range::new(lo, hi).expect("clamped range"));
            }
        }
        Ok(Self {
            name: self.name.clone(),
            columns,
            values,
            rows: rows.len(),
            outcome: self.outcome,
            bins: self.bins,
            index: self.index.clone(),
        })
    }

    /// Config document reproducing this dataset's outcome, ranges, and bins.
    pub fn config(&self) -> DatasetConfig {
        DatasetConfig {
            name: self.name.clone(),
            outcome: self.outcome_name().to_string(),
            columns: self
                .columns
                .iter()
                .filter(|c| c.role == ColumnRole::Filterable)
                .map(|c| ColumnConfig {
                    name: c.name.clone(),
                    default_range: c.default_range,
                })
                .collect(),
            bins: Some(self.bins),
        }
    }
}

fn clamp_range(name: &str, r: Range, min: f64, max: f64) -> Result<Range, DatasetError> {
    let lo = r.lo().max(min);
    let hi = r.hi().min(max);
    Range::new(lo, hi).map_err(|_| {
        DatasetError::Config(format!(
            "default range {r} for '{name}' does not overlap observed [{min}, {max}]"
        ))
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Linear-interpolation quantile of an ascending slice (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Parses a headered CSV of numbers.
///
/// Parse errors report 1-based data row numbers (the header is not counted).
pub fn load_csv<R: Read>(reader: R, config: &DatasetConfig) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DatasetError::Config("CSV header row is missing".into()));
    }
    if !header.iter().any(|h| *h == config.outcome) {
        return Err(DatasetError::Config(format!(
            "outcome column '{}' not in header",
            config.outcome
        )));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, cell) in record.iter().enumerate() {
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite());
            match v {
                Some(v) => cols[j].push(v),
                None => {
                    return Err(DatasetError::Parse {
                        row: r + 1,
                        column: header[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
    }
    if cols[0].is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Dataset::from_columns(config, header.into_iter().zip(cols).collect())
}

/// Writes the dataset as CSV. Values use the shortest round-trip formatting,
/// so `load_csv` recovers identical cells.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(d.columns.iter().map(|c| c.name.as_str()))?;
    let mut buf = Vec::with_capacity(d.column_count());
    for i in 0..d.row_count() {
        buf.clear();
        buf.extend(d.row(i).iter().map(|v| v.to_string()));
        w.write_record(&buf)?;
    }
    w.flush().map_err(|e| DatasetError::Csv(e.to_string()))?;
    Ok(())
}

/// Min-max rescaled copy of a dataset. Constant columns map to 0.
#[derive(Debug, Clone)]
pub struct NormalizedView<'a> {
    dataset: &'a Dataset,
    values: Vec<f64>,
}

impl<'a> NormalizedView<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.dataset.column_count();
        &self.values[i * m..(i + 1) * m]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.dataset.column_count() + col]
    }
}

pub fn normalize(d: &Dataset) -> NormalizedView<'_> {
    let m = d.column_count();
    let spans: Vec<(f64, f64)> = d.columns.iter().map(|c| (c.min, c.max - c.min)).collect();
    let values = d
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (min, span) = spans[k % m];
            if span > 0.0 {
                ((v - min) / span).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    NormalizedView { dataset: d, values }
}

/// Min-max rescaling of a single column.
pub fn normalize_values(values: &[f64]) -> Vec<f64> {
    let (min, max) = min_max(values);
    let span = max - min;
    values
        .iter()
        .map(|&v| if span > 0.0 { ((v - min) / span).clamp(0.0, 1.0) } else { 0.0 })
        .collect()
}

/// Equal-width histogram. `edges` has `counts.len() + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins spanning `[min, max]`. A zero-width span is widened to
    /// `[v - 0.5, v + 0.5]`.
    pub fn edges_for(min: f64, max: f64, bins: usize) -> Vec<f64> {
        let (lo, hi) = if max > min { (min, max) } else { (min - 0.5, min + 0.5) };
        let w = (hi - lo) / bins as f64;
        (0..=bins)
            .map(|k| if k == bins { hi } else { lo + w * k as f64 })
            .collect()
    }

    /// Counts `values` into the given edges. Values outside the edges are
    /// dropped; the last bin is closed on the right.
    pub fn with_edges(values: impl IntoIterator<Item = f64>, edges: Vec<f64>) -> Self {
        let bins = edges.len().saturating_sub(1);
        let mut counts = vec![0usize; bins];
        if bins > 0 {
            let lo = edges[0];
            let hi = edges[bins];
            let span = hi - lo;
            for v in values {
                if v < lo || v > hi {
                    continue;
                }
                let mut k = (((v - lo) / span) * bins as f64).floor() as usize;
                if k >= bins {
                    k = bins - 1;
                }
                counts[k] += 1;
            }
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub histogram: Histogram,
}

pub fn column_stats(d: &Dataset, var: &str) -> Result<ColumnStats, DatasetError> {
    let j = d.require_column(var)?;
    let sorted = sorted_copy(&d.column_values(j));
    let spec = &d.columns[j];
    let edges = Histogram::edges_for(spec.min, spec.max, d.bins);
    Ok(ColumnStats {
        min: spec.min,
        max: spec.max,
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        histogram: Histogram::with_edges(sorted.iter().copied(), edges),
    })
}
