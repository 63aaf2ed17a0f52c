//! IN/EX/CF/REM subsets.
//!
//! Filters split the rows into IN (matches every clause) and EX. Counterfactual
//! matching then moves the EX rows closest to IN into CF; the rest of EX is REM.
//! The CF size follows the threshold rule: `min(|IN|, |EX|)` while IN holds at
//! most a third of the rows, otherwise half of EX (rounded down).

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, NormalizedView, Range};

/// IN sizes below this carry a low-confidence flag.
pub const MIN_SUBSET_SIZE: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("row has no value for column {0}")]
    MissingColumn(usize),
    #[error("invalid distance space: {0}")]
    InvalidSpace(String),
}

impl From<DatasetError> for PartitionError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::UnknownColumn(c) => PartitionError::UnknownVariable(c),
            other => PartitionError::InvalidFilter(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterClause {
    pub variable: String,
    pub range: Range,
}

/// Conjunction of per-variable closed ranges, at most one clause per variable,
/// kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FilterClause>", into = "Vec<FilterClause>")]
pub struct FilterSet {
    clauses: Vec<FilterClause>,
}

impl TryFrom<Vec<FilterClause>> for FilterSet {
    type Error = PartitionError;
    fn try_from(v: Vec<FilterClause>) -> Result<Self, Self::Error> {
        Self::from_clauses(v)
    }
}

impl From<FilterSet> for Vec<FilterClause> {
    fn from(f: FilterSet) -> Self {
        f.clauses
    }
}

impl FilterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_clauses(
        clauses: impl IntoIterator<Item = FilterClause>,
    ) -> Result<Self, PartitionError> {
        let mut f = Self::new();
        for c in clauses {
            f.add(c.variable, c.range)?;
        }
        Ok(f)
    }

    /// Appends a clause. Fails if the variable already has one.
    pub fn add(&mut self, variable: impl Into<String>, range: Range) -> Result<(), PartitionError> {
        let variable = variable.into();
        if self.contains(&variable) {
            return Err(PartitionError::InvalidFilter(format!(
                "variable '{variable}' already filtered"
            )));
        }
        self.clauses.push(FilterClause { variable, range });
        Ok(())
    }

    /// Replaces the range of an existing clause.
    pub fn set_range(&mut self, variable: &str, range: Range) -> Result<(), PartitionError> {
        match self.clauses.iter_mut().find(|c| c.variable == variable) {
            Some(c) => {
                c.range = range;
                Ok(())
            }
            None => Err(PartitionError::InvalidFilter(format!(
                "variable '{variable}' is not filtered"
            ))),
        }
    }

    pub fn remove(&mut self, variable: &str) -> Option<FilterClause> {
        let pos = self.clauses.iter().position(|c| c.variable == variable)?;
        Some(self.clauses.remove(pos))
    }

    /// Copy with one more clause.
    pub fn with(&self, variable: &str, range: Range) -> Result<Self, PartitionError> {
        let mut f = self.clone();
        f.add(variable, range)?;
        Ok(f)
    }

    pub fn contains(&self, variable: &str) -> bool {
        self.clauses.iter().any(|c| c.variable == variable)
    }

    pub fn clauses(&self) -> &[FilterClause] {
        &self.clauses
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.clauses.iter().map(|c| c.variable.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    fn resolve(&self, d: &Dataset) -> Result<Vec<(usize, Range)>, PartitionError> {
        if self.is_empty() {
            return Err(PartitionError::InvalidFilter(
                "at least one filter clause is required".into(),
            ));
        }
        self.clauses
            .iter()
            .map(|c| {
                let j = d
                    .column_index(&c.variable)
                    .ok_or_else(|| PartitionError::UnknownVariable(c.variable.clone()))?;
                if j == d.outcome_index() {
                    return Err(PartitionError::InvalidFilter(format!(
                        "cannot filter on the outcome '{}'",
                        c.variable
                    )));
                }
                Ok((j, c.range))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMeasure {
    #[default]
    Euclidean,
}

impl DistanceMeasure {
    /// Distance over the given column indices. Summation runs in index order.
    #[inline]
    pub(crate) fn eval(self, a: &[f64], b: &[f64], cols: &[usize]) -> f64 {
        match self {
            DistanceMeasure::Euclidean => {
                let mut s = 0.0;
                for &j in cols {
                    let d = a[j] - b[j];
                    s += d * d;
                }
                s.sqrt()
            }
        }
    }
}

/// Variables (by column index) and the measure used for point distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceSpace {
    columns: Vec<usize>,
    measure: DistanceMeasure,
}

impl DistanceSpace {
    pub fn new(
        d: &Dataset,
        variables: impl IntoIterator<Item = impl AsRef<str>>,
        measure: DistanceMeasure,
    ) -> Result<Self, PartitionError> {
        let mut columns = Vec::new();
        for v in variables {
            let j = d
                .column_index(v.as_ref())
                .ok_or_else(|| PartitionError::UnknownVariable(v.as_ref().to_string()))?;
            if !columns.contains(&j) {
                columns.push(j);
            }
        }
        Self::from_indices(columns, measure)
    }

    pub fn from_indices(
        mut columns: Vec<usize>,
        measure: DistanceMeasure,
    ) -> Result<Self, PartitionError> {
        if columns.is_empty() {
            return Err(PartitionError::InvalidSpace("no variables".into()));
        }
        columns.sort_unstable();
        columns.dedup();
        Ok(Self { columns, measure })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn measure(&self) -> DistanceMeasure {
        self.measure
    }

    pub fn names<'d>(&self, d: &'d Dataset) -> Vec<&'d str> {
        self.columns
            .iter()
            .map(|&j| d.columns()[j].name.as_str())
            .collect()
    }
}

/// Which columns counterfactual matching compares rows on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingSpaceRule {
    /// Every column except the filter variables and the outcome.
    #[default]
    ExcludeFiltersAndOutcome,
    /// Every column except the outcome.
    ExcludeOutcome,
    AllColumns,
}

impl MatchingSpaceRule {
    pub fn space(
        self,
        d: &Dataset,
        f: &FilterSet,
        measure: DistanceMeasure,
    ) -> Result<DistanceSpace, PartitionError> {
        let filtered: Vec<usize> = f.variables().filter_map(|v| d.column_index(v)).collect();
        let cols = (0..d.column_count())
            .filter(|&j| match self {
                MatchingSpaceRule::ExcludeFiltersAndOutcome => {
                    j != d.outcome_index() && !filtered.contains(&j)
                }
                MatchingSpaceRule::ExcludeOutcome => j != d.outcome_index(),
                MatchingSpaceRule::AllColumns => true,
            })
            .collect();
        DistanceSpace::from_indices(cols, measure).map_err(|_| {
            PartitionError::DegeneratePartition(
                "no variables left to match counterfactuals on".into(),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPartition {
    pub in_idx: Vec<usize>,
    pub ex_idx: Vec<usize>,
    pub cf_idx: Vec<usize>,
    pub rem_idx: Vec<usize>,
    /// `|IN| < MIN_SUBSET_SIZE`.
    pub low_confidence: bool,
}

impl SubsetPartition {
    pub fn n(&self) -> usize {
        self.in_idx.len()
    }
}

/// Splits rows into (IN, EX). Bounds are closed.
pub fn apply_filters(
    d: &Dataset,
    f: &FilterSet,
) -> Result<(Vec<usize>, Vec<usize>), PartitionError> {
    let clauses = f.resolve(d)?;
    let (in_idx, ex_idx) = (0..d.row_count())
        .partition(|&i| clauses.iter().all(|&(j, r)| r.contains(d.value(i, j))));
    Ok((in_idx, ex_idx))
}

/// Distance between two rows restricted to `space`.
pub fn point_distance(a: &[f64], b: &[f64], space: &DistanceSpace) -> Result<f64, PartitionError> {
    if let Some(&j) = space.columns.iter().find(|&&j| j >= a.len() || j >= b.len()) {
        return Err(PartitionError::MissingColumn(j));
    }
    Ok(space.measure.eval(a, b, &space.columns))
}

/// CF size for a dataset of `total` rows.
pub fn counterfactual_size(total: usize, in_len: usize, ex_len: usize) -> usize {
    // strict: more than a third triggers the even split
    if 3 * in_len > total {
        ex_len / 2
    } else {
        in_len.min(ex_len)
    }
}

/// Selects CF from EX: the rows with the smallest minimum distance to any IN
/// row, ties broken by ascending row index. Both outputs are sorted.
pub fn match_counterfactuals(
    view: &NormalizedView<'_>,
    in_idx: &[usize],
    ex_idx: &[usize],
    space: &DistanceSpace,
) -> Result<(Vec<usize>, Vec<usize>), PartitionError> {
    if ex_idx.is_empty() {
        return Err(PartitionError::DegeneratePartition("EX is empty".into()));
    }
    if in_idx.is_empty() {
        return Err(PartitionError::DegeneratePartition("IN is empty".into()));
    }
    let total = view.dataset().row_count();
    let k = counterfactual_size(total, in_idx.len(), ex_idx.len());

    let cols = space.columns();
    let dim = cols.len();
    let packed_in: Vec<f64> = in_idx
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| view.value(i, j)))
        .collect();

    let mut scored: Vec<(f64, usize)> = ex_idx
        .par_iter()
        .map(|&e| {
            let row = view.row(e);
            let point: Vec<f64> = cols.iter().map(|&j| row[j]).collect();
            let mut best = f64::INFINITY;
            for other in packed_in.chunks_exact(dim) {
                let mut s = 0.0;
                for (a, b) in point.iter().zip(other) {
                    let d = a - b;
                    s += d * d;
                }
                if s < best {
                    best = s;
                    if best == 0.0 {
                        break;
                    }
                }
            }
            (best.sqrt(), e)
        })
        .collect();

    let by_distance = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    };
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, by_distance);
    }
    let mut cf: Vec<usize> = scored[..k].iter().map(|p| p.1).collect();
    let mut rem: Vec<usize> = scored[k..].iter().map(|p| p.1).collect();
    cf.sort_unstable();
    rem.sort_unstable();
    Ok((cf, rem))
}

/// Full IN/EX/CF/REM construction.
pub fn partition(
    view: &NormalizedView<'_>,
    f: &FilterSet,
    rule: MatchingSpaceRule,
    measure: DistanceMeasure,
) -> Result<SubsetPartition, PartitionError> {
    let d = view.dataset();
    let (in_idx, ex_idx) = apply_filters(d, f)?;
    let space = rule.space(d, f, measure)?;
    let (cf_idx, rem_idx) = match_counterfactuals(view, &in_idx, &ex_idx, &space)?;
    Ok(SubsetPartition {
        low_confidence: in_idx.len() < MIN_SUBSET_SIZE,
        in_idx,
        ex_idx,
        cf_idx,
        rem_idx,
    })
}
