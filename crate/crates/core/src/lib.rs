//! Counterfactual guidance for guided exploratory filtering.
//!
//! The crate scores filter variables over a numeric table by how differently
//! the outcome behaves for the filtered rows (IN) and for the excluded rows
//! that most resemble them (CF), against the rest (REM). It also generates
//! synthetic data with known causal structure, analyzes interaction logs, and
//! serves everything over HTTP for an interactive front end.
//!
//! Module map:
//!
//! - [`dataset`]: CSV loading, normalization, column statistics
//! - [`partition`]: filters and counterfactual matching (IN/EX/CF/REM)
//! - [`guidance`]: counterfactual and correlation guidance, variable ranking
//! - [`synth`]: causal-graph synthetic data with ground truth
//! - [`metrics`]: answer scoring and interaction-log analysis
//! - [`session`] and [`server`]: the stateful HTTP service
//! - [`commands`]: batch entry points behind the `cfguide` binary
//! - [`archetypes`]: the five canonical IN/CF/REM outcome patterns

pub mod archetypes;
pub mod commands;
pub mod dataset;
pub mod guidance;
pub mod metrics;
pub mod partition;
pub mod server;
pub mod session;
pub mod synth;

pub use dataset::{load_csv, normalize, Dataset, DatasetConfig, NormalizedView, Range};
pub use guidance::{
    guidance_report, rank_variables, GuidanceMode, GuidanceReport, Guide, ReportMode,
    VariableRanking,
};
pub use partition::{FilterClause, FilterSet, SubsetPartition};
pub use synth::{default_study_spec, generate, CausalGraphSpec, GroundTruth};
