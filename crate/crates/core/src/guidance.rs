//! Guidance scores for filter variables.
//!
//! Counterfactual guidance compares IN against CF and REM over the guidance
//! space (filter variables plus the outcome):
//!
//! ```text
//! similarity(i, j)  = exp(-distance(i, j))
//! D(A, B)           = mean over A x B of (1 - similarity)
//! guidance_cf       = (D(IN,CF) + sqrt(D(IN,CF) * D(IN,REM))) / 2
//! ```
//!
//! The correlation baseline is the absolute point-biserial correlation between
//! IN membership and the outcome. Both scores come with a subset distribution
//! score that flags unreliable splits.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{normalize, Dataset, NormalizedView};
use crate::partition::{
    self, apply_filters, DistanceMeasure, DistanceSpace, FilterSet, MatchingSpaceRule,
    PartitionError, SubsetPartition,
};

/// Distribution scores below this mark a guidance value as unreliable.
pub const VALIDITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("value {0} is outside the domain of this function")]
    Domain(f64),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    Cf,
    Corr,
}

impl std::str::FromStr for GuidanceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cf" => Ok(Self::Cf),
            "corr" => Ok(Self::Corr),
            other => Err(format!("unknown guidance mode '{other}' (expected cf or corr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    Cf,
    Corr,
    Both,
}

impl ReportMode {
    fn wants_cf(self) -> bool {
        matches!(self, Self::Cf | Self::Both)
    }

    fn wants_corr(self) -> bool {
        matches!(self, Self::Corr | Self::Both)
    }
}

impl From<GuidanceMode> for ReportMode {
    fn from(m: GuidanceMode) -> Self {
        match m {
            GuidanceMode::Cf => Self::Cf,
            GuidanceMode::Corr => Self::Corr,
        }
    }
}

impl std::str::FromStr for ReportMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cf" => Ok(Self::Cf),
            "corr" => Ok(Self::Corr),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown mode '{other}' (expected cf, corr or both)")),
        }
    }
}

/// Which columns the subset dissimilarities are measured over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceSpaceRule {
    /// Applied filter variables plus the outcome.
    #[default]
    FiltersAndOutcome,
    AllColumns,
}

impl GuidanceSpaceRule {
    pub fn space(
        self,
        d: &Dataset,
        f: &FilterSet,
        measure: DistanceMeasure,
    ) -> Result<DistanceSpace, PartitionError> {
        match self {
            GuidanceSpaceRule::FiltersAndOutcome => {
                let mut cols = vec![d.outcome_index()];
                for v in f.variables() {
                    cols.push(d.require_column(v)?);
                }
                DistanceSpace::from_indices(cols, measure)
            }
            GuidanceSpaceRule::AllColumns => {
                DistanceSpace::from_indices((0..d.column_count()).collect(), measure)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    #[serde(default)]
    pub matching_space: MatchingSpaceRule,
    #[serde(default)]
    pub guidance_space: GuidanceSpaceRule,
    #[serde(default)]
    pub measure: DistanceMeasure,
}

/// `exp(-dist)`.
pub fn similarity(dist: f64) -> Result<f64, GuidanceError> {
    if !(dist >= 0.0) {
        return Err(GuidanceError::Domain(dist));
    }
    Ok((-dist).exp())
}

/// Mean pairwise dissimilarity `1 - exp(-distance)` between two row sets.
pub fn subset_dissimilarity(
    view: &NormalizedView<'_>,
    a: &[usize],
    b: &[usize],
    space: &DistanceSpace,
) -> Result<f64, GuidanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(PartitionError::DegeneratePartition(
            "dissimilarity needs two non-empty subsets".into(),
        )
        .into());
    }
    let cols = space.columns();
    let dim = cols.len();
    let pack = |idx: &[usize]| -> Vec<f64> {
        idx.iter()
            .flat_map(|&i| cols.iter().map(move |&j| view.value(i, j)))
            .collect()
    };
    let pa = pack(a);
    let pb = pack(b);
    let measure = space.measure();

    // per-row partial sums, combined in row order so the result does not
    // depend on thread scheduling
    let partial: Vec<f64> = pa
        .par_chunks_exact(dim)
        .map(|p| {
            pb.chunks_exact(dim)
                .map(|q| match measure {
                    DistanceMeasure::Euclidean => {
                        let mut s = 0.0;
                        for (x, y) in p.iter().zip(q) {
                            let d = x - y;
                            s += d * d;
                        }
                        1.0 - (-s.sqrt()).exp()
                    }
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = partial.iter().sum();
    Ok((total / (a.len() as f64 * b.len() as f64)).clamp(0.0, 1.0))
}

/// `(d_in_cf + sqrt(d_in_cf * d_in_rem)) / 2`.
pub fn cf_guidance(d_in_cf: f64, d_in_rem: f64) -> Result<f64, GuidanceError> {
    for v in [d_in_cf, d_in_rem] {
        if !(0.0..=1.0).contains(&v) {
            return Err(GuidanceError::Domain(v));
        }
    }
    Ok(0.5 * (d_in_cf + (d_in_cf * d_in_rem).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrGuidance {
    pub value: f64,
    /// The outcome has zero variance over IN and EX; `value` is 0.
    pub degenerate: bool,
}

/// Absolute point-biserial correlation between IN membership and the outcome.
pub fn corr_guidance(
    d: &Dataset,
    in_idx: &[usize],
    ex_idx: &[usize],
) -> Result<CorrGuidance, GuidanceError> {
    if in_idx.is_empty() || ex_idx.is_empty() {
        return Err(PartitionError::DegeneratePartition(
            "correlation needs non-empty IN and EX".into(),
        )
        .into());
    }
    let y = d.outcome_index();
    let mean = |idx: &[usize]| idx.iter().map(|&i| d.value(i, y)).sum::<f64>() / idx.len() as f64;
    let n1 = in_idx.len() as f64;
    let n0 = ex_idx.len() as f64;
    let n = n1 + n0;
    let m1 = mean(in_idx);
    let m0 = mean(ex_idx);
    let m = (m1 * n1 + m0 * n0) / n;
    let ss: f64 = in_idx
        .iter()
        .chain(ex_idx)
        .map(|&i| {
            let e = d.value(i, y) - m;
            e * e
        })
        .sum();
    let sd = (ss / n).sqrt();
    if !(sd > 0.0) || sd * 1e12 < m.abs() {
        return Ok(CorrGuidance {
            value: 0.0,
            degenerate: true,
        });
    }
    let r = (m1 - m0) / sd * (n1 / n * (n0 / n)).sqrt();
    Ok(CorrGuidance {
        value: r.abs().min(1.0),
        degenerate: false,
    })
}

/// Subset balance score `1 - 2 |s2 / (s1 + s2) - 1/2|`, evaluated as the
/// equal `1 - |s1 - s2| / (s1 + s2)` so swapping the arguments is exact.
pub fn distribution_score(s1: usize, s2: usize) -> Result<f64, GuidanceError> {
    if s1 + s2 == 0 {
        return Err(PartitionError::DegeneratePartition("both subsets are empty".into()).into());
    }
    Ok(1.0 - s1.abs_diff(s2) as f64 / (s1 + s2) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSizes {
    #[serde(rename = "in")]
    pub in_: usize,
    pub ex: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rem: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceReport {
    pub filters: FilterSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_in_cf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_in_rem: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guidance_cf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guidance_corr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution_in_cf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution_in_ex: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_cf: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_corr: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_degenerate: Option<bool>,
    pub sizes: SubsetSizes,
    pub low_confidence: bool,
}

impl GuidanceReport {
    /// (score, distribution, valid) for one mode, if it was computed.
    pub fn score(&self, mode: GuidanceMode) -> Option<(f64, f64, bool)> {
        match mode {
            GuidanceMode::Cf => Some((self.guidance_cf?, self.distribution_in_cf?, self.valid_cf?)),
            GuidanceMode::Corr => Some((
                self.guidance_corr?,
                self.distribution_in_ex?,
                self.valid_corr?,
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedVariable {
    pub variable: String,
    /// Displayed as "Relevance".
    pub score: f64,
    pub distribution: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRanking {
    pub mode: GuidanceMode,
    pub entries: Vec<RankedVariable>,
}

impl VariableRanking {
    pub fn variables(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.variable.as_str()).collect()
    }
}

/// Guidance computations over one dataset.
#[derive(Debug, Clone)]
pub struct Guide<'a> {
    view: NormalizedView<'a>,
    config: GuidanceConfig,
}

impl<'a> Guide<'a> {
    pub fn new(d: &'a Dataset) -> Self {
        Self::with_config(d, GuidanceConfig::default())
    }

    pub fn with_config(d: &'a Dataset, config: GuidanceConfig) -> Self {
        Self {
            view: normalize(d),
            config,
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.view.dataset()
    }

    pub fn view(&self) -> &NormalizedView<'a> {
        &self.view
    }

    pub fn config(&self) -> &GuidanceConfig {
        &self.config
    }

    pub fn partition(&self, f: &FilterSet) -> Result<SubsetPartition, PartitionError> {
        partition::partition(&self.view, f, self.config.matching_space, self.config.measure)
    }

    pub fn report(&self, f: &FilterSet, mode: ReportMode) -> Result<GuidanceReport, GuidanceError> {
        let d = self.dataset();
        let mut report = if mode.wants_cf() {
            let p = self.partition(f)?;
            let space = self.config.guidance_space.space(d, f, self.config.measure)?;
            let d_in_cf = subset_dissimilarity(&self.view, &p.in_idx, &p.cf_idx, &space)?;
            let d_in_rem = subset_dissimilarity(&self.view, &p.in_idx, &p.rem_idx, &space)?;
            let distribution_in_cf = distribution_score(p.in_idx.len(), p.cf_idx.len())?;
            GuidanceReport {
                filters: f.clone(),
                d_in_cf: Some(d_in_cf),
                d_in_rem: Some(d_in_rem),
                guidance_cf: Some(cf_guidance(d_in_cf, d_in_rem)?),
                guidance_corr: None,
                distribution_in_cf: Some(distribution_in_cf),
                distribution_in_ex: None,
                valid_cf: Some(distribution_in_cf >= VALIDITY_THRESHOLD),
                valid_corr: None,
                corr_degenerate: None,
                sizes: SubsetSizes {
                    in_: p.in_idx.len(),
                    ex: p.ex_idx.len(),
                    cf: Some(p.cf_idx.len()),
                    rem: Some(p.rem_idx.len()),
                },
                low_confidence: p.low_confidence,
            }
        } else {
            let (in_idx, ex_idx) = apply_filters(d, f)?;
            GuidanceReport {
                filters: f.clone(),
                d_in_cf: None,
                d_in_rem: None,
                guidance_cf: None,
                guidance_corr: None,
                distribution_in_cf: None,
                distribution_in_ex: None,
                valid_cf: None,
                valid_corr: None,
                corr_degenerate: None,
                sizes: SubsetSizes {
                    in_: in_idx.len(),
                    ex: ex_idx.len(),
                    cf: None,
                    rem: None,
                },
                low_confidence: in_idx.len() < partition::MIN_SUBSET_SIZE,
            }
        };
        if mode.wants_corr() {
            let (in_idx, ex_idx) = apply_filters(d, f)?;
            let corr = corr_guidance(d, &in_idx, &ex_idx)?;
            let distribution_in_ex = distribution_score(in_idx.len(), ex_idx.len())?;
            report.guidance_corr = Some(corr.value);
            report.corr_degenerate = Some(corr.degenerate);
            report.distribution_in_ex = Some(distribution_in_ex);
            report.valid_corr = Some(distribution_in_ex >= VALIDITY_THRESHOLD);
        }
        Ok(report)
    }

    /// Ranks every candidate variable (not the outcome, not already applied)
    /// by the guidance of `applied` plus the candidate at its default range.
    ///
    /// Candidates whose subsets degenerate (for example an empty EX) score 0
    /// and are marked invalid.
    pub fn rank(
        &self,
        applied: &FilterSet,
        mode: GuidanceMode,
    ) -> Result<VariableRanking, GuidanceError> {
        let d = self.dataset();
        for v in applied.variables() {
            let j = d
                .column_index(v)
                .ok_or_else(|| PartitionError::UnknownVariable(v.to_string()))?;
            if j == d.outcome_index() {
                return Err(PartitionError::InvalidFilter("outcome cannot be filtered".into()).into());
            }
        }
        let candidates: Vec<_> = d
            .columns()
            .iter()
            .filter(|c| c.default_range.is_some() && !applied.contains(&c.name))
            .collect();
        let mut entries: Vec<RankedVariable> = candidates
            .par_iter()
            .map(|c| {
                let range = c.default_range.expect("filterable column");
                let scored = applied
                    .with(&c.name, range)
                    .map_err(GuidanceError::from)
                    .and_then(|f| self.report(&f, mode.into()))
                    .ok()
                    .and_then(|r| r.score(mode));
                let (score, distribution, valid) = scored.unwrap_or((0.0, 0.0, false));
                RankedVariable {
                    variable: c.name.clone(),
                    score,
                    distribution,
                    valid,
                }
            })
            .collect();
        entries.sort_by(|a, b| match b.score.total_cmp(&a.score) {
            Ordering::Equal => a.variable.cmp(&b.variable),
            o => o,
        });
        Ok(VariableRanking { mode, entries })
    }
}

/// Report for `f` with the default configuration.
pub fn guidance_report(
    d: &Dataset,
    f: &FilterSet,
    mode: ReportMode,
) -> Result<GuidanceReport, GuidanceError> {
    Guide::new(d).report(f, mode)
}

/// Ranking with the default configuration.
pub fn rank_variables(
    d: &Dataset,
    applied: &FilterSet,
    mode: GuidanceMode,
) -> Result<VariableRanking, GuidanceError> {
    Guide::new(d).rank(applied, mode)
}
