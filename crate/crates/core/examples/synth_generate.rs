//! Sample from a hand-written causal graph and print the planted ranking.

use cfguide::synth::{EdgeSpec, NodeSpec};
use cfguide::{generate, CausalGraphSpec};

fn node(name: &str, outcome: bool) -> NodeSpec {
    NodeSpec { name: name.into(), outcome }
}

fn edge(source: &str, target: &str, strength: f64) -> EdgeSpec {
    EdgeSpec { source: source.into(), target: target.into(), strength }
}

fn main() {
    let spec = CausalGraphSpec {
        nodes: vec![node("rain", false), node("traffic", false), node("noise", false), node("late", true)],
        edges: vec![edge("rain", "traffic", 0.7), edge("traffic", "late", 0.8), edge("rain", "late", 0.3)],
        noise_scale: 1.0,
        seed: 11,
    };
    let (d, truth) = generate(&spec, 500).unwrap();
    println!("{} rows, columns {:?}", d.row_count(), d.columns().iter().map(|c| &c.name).collect::<Vec<_>>());
    for c in &truth.ranking {
        println!("{:<8} {:.2}", c.variable, c.strength);
    }
}
