//! Interaction-log analysis and answer scoring.
//!
//! An interaction log is an ordered list of atomic events: adding or removing a
//! filter variable, or changing a filter range. The log format is JSONL, one
//! [`InteractionEvent`] per line.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Range;
use crate::synth::GroundTruth;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid answer: {0}")]
    InvalidAnswer(String),
    #[error("log error at event {index}: {message}")]
    Log { index: usize, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AddVariable,
    RemoveVariable,
    ChangeRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub session: String,
    pub kind: EventKind,
    pub variable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
}

impl InteractionEvent {
    pub fn new(timestamp: u64, session: &str, kind: EventKind, variable: &str) -> Self {
        Self {
            timestamp,
            session: session.to_string(),
            kind,
            variable: variable.to_string(),
            range: None,
        }
    }

    pub fn with_range(mut self, range: Range) -> Self {
        self.range = Some(range);
        self
    }
}

/// Parses a JSONL log. Blank lines are skipped; errors carry 1-based line numbers.
pub fn parse_log<R: BufRead>(reader: R) -> Result<Vec<InteractionEvent>, MetricsError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::Parse { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line)
            .map_err(|e| MetricsError::Parse { line: i + 1, message: e.to_string() })?;
        events.push(ev);
    }
    Ok(events)
}

pub fn write_log(events: &[InteractionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Checks timestamp order and add/remove/range consistency.
pub fn validate_log(events: &[InteractionEvent]) -> Result<(), MetricsError> {
    let mut added: HashSet<&str> = HashSet::new();
    let mut last = 0u64;
    for (index, e) in events.iter().enumerate() {
        let fail = |message: String| Err(MetricsError::Log { index, message });
        if e.timestamp < last {
            return fail(format!("timestamp {} goes backwards", e.timestamp));
        }
        last = e.timestamp;
        let v = e.variable.as_str();
        match e.kind {
            EventKind::AddVariable => {
                if !added.insert(v) {
                    return fail(format!("'{v}' added twice"));
                }
            }
            EventKind::RemoveVariable => {
                if !added.remove(v) {
                    return fail(format!("'{v}' removed but not added"));
                }
            }
            EventKind::ChangeRange => {
                if !added.contains(v) {
                    return fail(format!("range change on '{v}', which is not added"));
                }
                if e.range.is_none() {
                    return fail("range change without a range".into());
                }
            }
        }
    }
    Ok(())
}

/// At most `max` answers, no duplicates.
pub fn check_distinct(answers: &[impl AsRef<str>], max: usize) -> Result<(), MetricsError> {
    if answers.len() > max {
        return Err(MetricsError::InvalidAnswer(format!(
            "{} answers given, at most {max} allowed",
            answers.len()
        )));
    }
    let mut seen = HashSet::new();
    for a in answers {
        if !seen.insert(a.as_ref()) {
            return Err(MetricsError::InvalidAnswer(format!("duplicate answer '{}'", a.as_ref())));
        }
    }
    Ok(())
}

/// Share of the five true causes found, ignoring order.
pub fn t1_accuracy(answers: &[impl AsRef<str>], truth_top5: &[impl AsRef<str>]) -> Result<f64, MetricsError> {
    check_distinct(answers, 5)?;
    let truth: HashSet<&str> = truth_top5.iter().map(AsRef::as_ref).collect();
    let hits = answers.iter().filter(|a| truth.contains(a.as_ref())).count();
    Ok(hits as f64 / 5.0)
}

/// `sum_i |i - rank(answer_i)|` over the given answers, ranks 1-based.
fn rank_offset(answers: &[impl AsRef<str>], truth: &GroundTruth) -> Result<usize, MetricsError> {
    answers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            truth
                .rank_of(a.as_ref())
                .map(|r| r.abs_diff(i + 1))
                .ok_or_else(|| MetricsError::InvalidAnswer(format!("'{}' is not ranked", a.as_ref())))
        })
        .sum()
}

/// Position offset of a five-variable ranking against the full ground truth.
pub fn t2_offset(answers: &[impl AsRef<str>], truth: &GroundTruth) -> Result<usize, MetricsError> {
    check_distinct(answers, 5)?;
    if answers.len() != 5 {
        return Err(MetricsError::InvalidAnswer(format!(
            "ranking needs exactly 5 variables, got {}",
            answers.len()
        )));
    }
    rank_offset(answers, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEvaluation {
    pub answers: Vec<String>,
    pub ranking: Vec<String>,
    pub truth: Vec<String>,
    pub t1_accuracy: f64,
    /// Offset over the submitted ranking; 0 iff it equals the ground-truth
    /// prefix of the same length.
    pub t2_offset: usize,
}

pub fn evaluate_answers(
    answers: &[String],
    ranking: &[String],
    truth: &GroundTruth,
) -> Result<RankingEvaluation, MetricsError> {
    check_distinct(ranking, 5)?;
    let top5 = truth.top(5);
    Ok(RankingEvaluation {
        t1_accuracy: t1_accuracy(answers, &top5)?,
        t2_offset: rank_offset(ranking, truth)?,
        answers: answers.to_vec(),
        ranking: ranking.to_vec(),
        truth: truth.variables().into_iter().map(String::from).collect(),
    })
}

/// Events on variables outside the true top five.
pub fn count_wrong_attempts(
    events: &[InteractionEvent],
    truth_top5: &[impl AsRef<str>],
) -> Result<usize, MetricsError> {
    validate_log(events)?;
    let truth: HashSet<&str> = truth_top5.iter().map(AsRef::as_ref).collect();
    Ok(events.iter().filter(|e| !truth.contains(e.variable.as_str())).count())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorCounts {
    pub goback_after_range: usize,
    pub goback_without_range: usize,
    pub gonext_after_range: usize,
    pub gonext_without_range: usize,
}

/// Go-back: `add(v) .. remove(v)` with no other add in between.
/// Go-next: `add(v) .. add(w)` while `v` is still added.
///
/// Pairs are matched greedily left to right and never overlap: each add starts
/// at most one pattern, and an add closes the pattern of the most recent open
/// add. A pattern is "after range" when its first variable had a range change
/// between the two events.
pub fn classify_behaviors(events: &[InteractionEvent]) -> Result<BehaviorCounts, MetricsError> {
    validate_log(events)?;
    let mut counts = BehaviorCounts::default();
    // (variable, ranged since add)
    let mut open: Option<(&str, bool)> = None;
    for e in events {
        let v = e.variable.as_str();
        match e.kind {
            EventKind::AddVariable => {
                if let Some((_, ranged)) = open.take() {
                    if ranged {
                        counts.gonext_after_range += 1;
                    } else {
                        counts.gonext_without_range += 1;
                    }
                }
                open = Some((v, false));
            }
            EventKind::ChangeRange => {
                if let Some((w, ranged)) = open.as_mut() {
                    if *w == v {
                        *ranged = true;
                    }
                }
            }
            EventKind::RemoveVariable => {
                if let Some((w, ranged)) = open {
                    if w == v {
                        if ranged {
                            counts.goback_after_range += 1;
                        } else {
                            counts.goback_without_range += 1;
                        }
                        open = None;
                    }
                }
            }
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Root,
    FilterVariable,
    FilterRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub kind: NodeKind,
    pub variable: Option<String>,
    pub parent: Option<usize>,
    /// Root is at depth 0.
    pub depth: usize,
}

/// Exploration tree with backward (remove) edges pruned. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
}

impl Default for SearchTree {
    fn default() -> Self {
        Self::new()
    }
}

impl SearchTree {
    pub fn new() -> Self {
        Self {
            nodes: vec![TreeNode { kind: NodeKind::Root, variable: None, parent: None, depth: 0 }],
        }
    }

    /// Adds a child under `parent` and returns its index.
    pub fn push(&mut self, parent: usize, kind: NodeKind, variable: &str) -> usize {
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(TreeNode {
            kind,
            variable: Some(variable.to_string()),
            parent: Some(parent),
            depth,
        });
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&c| self.nodes[c].parent == Some(i))
    }
}

/// Builds the exploration tree.
///
/// `add(v)` hangs under the current cursor; `change_range(v)` hangs under the
/// latest node for `v`; both move the cursor to the new node. `remove(v)`
/// creates nothing and moves the cursor to the parent of `v`'s add node.
pub fn build_search_tree(events: &[InteractionEvent]) -> Result<SearchTree, MetricsError> {
    validate_log(events)?;
    let mut tree = SearchTree::new();
    let mut cursor = 0usize;
    let mut add_node: HashMap<&str, usize> = HashMap::new();
    let mut latest: HashMap<&str, usize> = HashMap::new();
    for e in events {
        let v = e.variable.as_str();
        match e.kind {
            EventKind::AddVariable => {
                cursor = tree.push(cursor, NodeKind::FilterVariable, v);
                add_node.insert(v, cursor);
                latest.insert(v, cursor);
            }
            EventKind::ChangeRange => {
                cursor = tree.push(latest[v], NodeKind::FilterRange, v);
                latest.insert(v, cursor);
            }
            EventKind::RemoveVariable => {
                let a = add_node.remove(v).expect("validated");
                latest.remove(v);
                cursor = tree.nodes[a].parent.expect("add node has a parent");
            }
        }
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeMetrics {
    /// Nodes on the longest root-to-leaf path, root included.
    pub depth: usize,
    pub max_width: usize,
    pub filter_range_width: usize,
    pub filter_variable_width: usize,
}

pub fn tree_metrics(t: &SearchTree) -> TreeMetrics {
    let depth = t.nodes.iter().map(|n| n.depth).max().unwrap_or(0) + 1;
    let mut all = vec![0usize; depth];
    let mut ranges = vec![0usize; depth];
    let mut vars = vec![0usize; depth];
    for n in &t.nodes {
        all[n.depth] += 1;
        match n.kind {
            NodeKind::FilterRange => ranges[n.depth] += 1,
            NodeKind::FilterVariable => vars[n.depth] += 1,
            NodeKind::Root => {}
        }
    }
    let max = |v: &[usize]| v.iter().copied().max().unwrap_or(0);
    TreeMetrics {
        depth,
        max_width: max(&all),
        filter_range_width: max(&ranges),
        filter_variable_width: max(&vars),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionCounts {
    pub variable_changes: usize,
    pub range_changes: usize,
    pub total: usize,
}

/// Everything the log analysis reports for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub interactions: InteractionCounts,
    pub behaviors: BehaviorCounts,
    pub tree: TreeMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wrong_attempts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<RankingEvaluation>,
}

pub fn analyze(
    events: &[InteractionEvent],
    truth: Option<&GroundTruth>,
    evaluation: Option<RankingEvaluation>,
) -> Result<AnalysisReport, MetricsError> {
    validate_log(events)?;
    let range_changes = events.iter().filter(|e| e.kind == EventKind::ChangeRange).count();
    let wrong_attempts = truth
        .map(|t| count_wrong_attempts(events, &t.top(5)))
        .transpose()?;
    Ok(AnalysisReport {
        interactions: InteractionCounts {
            variable_changes: events.len() - range_changes,
            range_changes,
            total: events.len(),
        },
        behaviors: classify_behaviors(events)?,
        tree: tree_metrics(&build_search_tree(events)?),
        wrong_attempts,
        evaluation,
    })
}
