//! Synthetic data from a causal DAG with known edge strengths.
//!
//! Variables are generated in topological order by a linear-Gaussian
//! structural equation model: roots are standard normal; every other node is
//! `sum(strength * parent) + noise_scale * N(0, 1)`, standardized to zero mean
//! and unit variance before its children read it. Output is reproducible bit
//! for bit for a given seed.

use std::collections::{HashMap, VecDeque};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetConfig, DatasetError};

pub const DEFAULT_TOP_K: usize = 5;

/// Outcome of the default healthcare graph.
pub const DEFAULT_OUTCOME: &str = "mortality risk";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("edge {from} -> {to} references undeclared node '{missing}'")]
    Ref {
        from: String,
        to: String,
        missing: String,
    },
    #[error("duplicate node '{0}'")]
    DuplicateNode(String),
    #[error("expected exactly one outcome node, found {0}")]
    OutcomeCount(usize),
    #[error("outcome '{0}' has no parents")]
    OutcomeWithoutParents(String),
    #[error("outcome '{0}' has outgoing edges")]
    OutcomeHasChildren(String),
    #[error("two edges into the outcome share strength {0}")]
    DuplicateOutcomeStrength(f64),
    #[error("invalid strength {0} on edge {1} -> {2}")]
    InvalidStrength(f64, String, String),
    #[error("noise_scale must be positive and finite, got {0}")]
    NoiseScale(f64),
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid causal graph: {}", join_errors(.0))]
    Invalid(Vec<GraphError>),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

fn join_errors(errs: &[GraphError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub source: String,
    pub target: String,
    pub strength: f64,
}

fn default_noise_scale() -> f64 {
    1.0
}

/// Causal graph document: `{nodes:[{name, outcome?}], edges:[{source,target,strength}], noise_scale, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalGraphSpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CausalGraphSpec {
    pub fn outcome(&self) -> Option<&str> {
        self.nodes.iter().find(|n| n.outcome).map(|n| n.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCause {
    pub variable: String,
    pub strength: f64,
}

/// Direct causes of the outcome by descending strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub outcome: String,
    pub ranking: Vec<RankedCause>,
    pub top_k: Vec<String>,
}

impl GroundTruth {
    pub fn variables(&self) -> Vec<&str> {
        self.ranking.iter().map(|c| c.variable.as_str()).collect()
    }

    /// 1-based position of `variable` in the full ranking.
    pub fn rank_of(&self, variable: &str) -> Option<usize> {
        self.ranking.iter().position(|c| c.variable == variable).map(|p| p + 1)
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.ranking.iter().take(k).map(|c| c.variable.as_str()).collect()
    }
}

/// Checks the graph and returns a topological order of node indices
/// (Kahn's algorithm; ready nodes leave in declaration order).
pub fn validate_graph(spec: &CausalGraphSpec) -> Result<Vec<usize>, Vec<GraphError>> {
    let mut errors = Vec::new();
    let mut index = HashMap::new();
    for (i, n) in spec.nodes.iter().enumerate() {
        if index.insert(n.name.as_str(), i).is_some() {
            errors.push(GraphError::DuplicateNode(n.name.clone()));
        }
    }
    if !(spec.noise_scale > 0.0 && spec.noise_scale.is_finite()) {
        errors.push(GraphError::NoiseScale(spec.noise_scale));
    }
    let outcomes: Vec<usize> = (0..spec.nodes.len()).filter(|&i| spec.nodes[i].outcome).collect();
    if outcomes.len() != 1 {
        errors.push(GraphError::OutcomeCount(outcomes.len()));
    }

    let n = spec.nodes.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for e in &spec.edges {
        let (s, t) = match (index.get(e.source.as_str()), index.get(e.target.as_str())) {
            (Some(&s), Some(&t)) => (s, t),
            (s, _) => {
                errors.push(GraphError::Ref {
                    from: e.source.clone(),
                    to: e.target.clone(),
                    missing: if s.is_none() { e.source.clone() } else { e.target.clone() },
                });
                continue;
            }
        };
        if !e.strength.is_finite() {
            errors.push(GraphError::InvalidStrength(e.strength, e.source.clone(), e.target.clone()));
        }
        children[s].push(t);
        indegree[t] += 1;
    }

    if let [o] = outcomes[..] {
        let name = &spec.nodes[o].name;
        if indegree[o] == 0 {
            errors.push(GraphError::OutcomeWithoutParents(name.clone()));
        }
        if !children[o].is_empty() {
            errors.push(GraphError::OutcomeHasChildren(name.clone()));
        }
        let mut strengths: Vec<f64> = spec
            .edges
            .iter()
            .filter(|e| e.target == *name)
            .map(|e| e.strength)
            .collect();
        strengths.sort_by(f64::total_cmp);
        if let Some(w) = strengths.windows(2).find(|w| w[0] == w[1]) {
            errors.push(GraphError::DuplicateOutcomeStrength(w[0]));
        }
    }

    let mut remaining = indegree.clone();
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = ready.pop_front() {
        order.push(u);
        let mut next: Vec<usize> = Vec::new();
        for &c in &children[u] {
            remaining[c] -= 1;
            if remaining[c] == 0 {
                next.push(c);
            }
        }
        next.sort_unstable();
        ready.extend(next);
    }
    if order.len() < n {
        errors.push(GraphError::Cycle(find_cycle(spec, &children, &remaining)));
    }

    if errors.is_empty() {
        Ok(order)
    } else {
        Err(errors)
    }
}

/// Walks predecessors among the nodes Kahn's algorithm could not place; every
/// such node has an unplaced parent, so the walk must revisit a node.
fn find_cycle(spec: &CausalGraphSpec, children: &[Vec<usize>], remaining: &[usize]) -> Vec<String> {
    let n = children.len();
    let mut parent_of = vec![None; n];
    for (u, cs) in children.iter().enumerate() {
        for &c in cs {
            if remaining[u] > 0 && remaining[c] > 0 && parent_of[c].is_none() {
                parent_of[c] = Some(u);
            }
        }
    }
    let start = (0..n).find(|&i| remaining[i] > 0).expect("unplaced node");
    let mut seen = vec![None; n];
    let mut path = Vec::new();
    let mut cur = start;
    while seen[cur].is_none() {
        seen[cur] = Some(path.len());
        path.push(cur);
        cur = parent_of[cur].expect("unplaced node has an unplaced parent");
    }
    let mut cycle: Vec<usize> = path[seen[cur].unwrap()..].to_vec();
    cycle.reverse();
    cycle.push(cycle[0]);
    cycle.into_iter().map(|i| spec.nodes[i].name.clone()).collect()
}

pub fn ground_truth_ranking(spec: &CausalGraphSpec, k: usize) -> GroundTruth {
    let outcome = spec.outcome().unwrap_or_default().to_string();
    let mut ranking: Vec<RankedCause> = spec
        .edges
        .iter()
        .filter(|e| e.target == outcome)
        .map(|e| RankedCause {
            variable: e.source.clone(),
            strength: e.strength,
        })
        .collect();
    ranking.sort_by(|a, b| b.strength.total_cmp(&a.strength).then(a.variable.cmp(&b.variable)));
    let top_k = ranking.iter().take(k).map(|c| c.variable.clone()).collect();
    GroundTruth {
        outcome,
        ranking,
        top_k,
    }
}

/// Samples `n` rows. Columns follow the graph's node declaration order.
pub fn generate(spec: &CausalGraphSpec, n: usize) -> Result<(Dataset, GroundTruth), SynthError> {
    let order = validate_graph(spec).map_err(SynthError::Invalid)?;
    if n == 0 {
        return Err(SynthError::NoSamples);
    }
    let index: HashMap<&str, usize> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| (node.name.as_str(), i))
        .collect();
    let mut parents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); spec.nodes.len()];
    for e in &spec.edges {
        parents[index[e.target.as_str()]].push((index[e.source.as_str()], e.strength));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); spec.nodes.len()];
    for &v in &order {
        let mut col: Vec<f64> = Vec::with_capacity(n);
        if parents[v].is_empty() {
            col.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        } else {
            for i in 0..n {
                let signal: f64 = parents[v].iter().map(|&(p, s)| s * columns[p][i]).sum();
                let noise: f64 = rng.sample(StandardNormal);
                col.push(signal + spec.noise_scale * noise);
            }
            standardize(&mut col);
        }
        columns[v] = col;
    }

    let outcome = spec.outcome().expect("validated").to_string();
    let config = DatasetConfig::new("synthetic", outcome);
    let named = spec.nodes.iter().map(|n| n.name.clone()).zip(columns).collect();
    let dataset = Dataset::from_columns(&config, named)?;
    Ok((dataset, ground_truth_ranking(spec, DEFAULT_TOP_K)))
}

/// Zero mean, unit (population) variance. A constant column becomes all 0.
fn standardize(col: &mut [f64]) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in col.iter_mut() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
}

const STUDY_FACTORS: [&str; 14] = [
    "age",
    "blood pressure",
    "cholesterol",
    "bmi",
    "smoking",
    "blood sugar",
    "heart rate",
    "alcohol intake",
    "physical activity",
    "sleep hours",
    "stress level",
    "diet quality",
    "kidney function",
    "family history",
];

/// Strength (in hundredths) assigned to each factor above, 0.21 to 0.86 in
/// steps of 0.05, deliberately not in list order.
const STUDY_STRENGTHS: [u32; 14] = [76, 81, 46, 61, 86, 56, 31, 21, 41, 26, 66, 36, 71, 51];

pub const STUDY_SEED: u64 = 2024;

/// The healthcare graph: 14 direct causes of `mortality risk` with strengths
/// 0.21..=0.86 (step 0.05), plus 4 seeded inter-factor edges of strength
/// 0.10..=0.30.
pub fn default_study_spec() -> CausalGraphSpec {
    let mut nodes: Vec<NodeSpec> = STUDY_FACTORS
        .iter()
        .map(|n| NodeSpec { name: n.to_string(), outcome: false })
        .collect();
    nodes.push(NodeSpec { name: DEFAULT_OUTCOME.into(), outcome: true });

    let mut edges: Vec<EdgeSpec> = STUDY_FACTORS
        .iter()
        .zip(STUDY_STRENGTHS)
        .map(|(n, s)| EdgeSpec {
            source: n.to_string(),
            target: DEFAULT_OUTCOME.into(),
            strength: f64::from(s) / 100.0,
        })
        .collect();

    // edges only run from lower to higher factor index, so the graph stays acyclic
    let mut rng = ChaCha8Rng::seed_from_u64(STUDY_SEED);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    while pairs.len() < 4 {
        let picked = sample(&mut rng, STUDY_FACTORS.len(), 2);
        let (a, b) = (picked.index(0), picked.index(1));
        let pair = (a.min(b), a.max(b));
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    for (s, t) in pairs {
        let strength = f64::from(rng.random_range(2u32..=6) * 5) / 100.0;
        edges.push(EdgeSpec {
            source: STUDY_FACTORS[s].into(),
            target: STUDY_FACTORS[t].into(),
            strength,
        });
    }

    CausalGraphSpec {
        nodes,
        edges,
        noise_scale: 1.0,
        seed: STUDY_SEED,
    }
}
