//! End-to-end checks, one line per criterion. Exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use cfguide::archetypes::Archetype;
use cfguide::commands::{cmd_generate, GenerateOptions};
use cfguide::dataset::normalize;
use cfguide::guidance::{
    cf_guidance, distribution_score, subset_dissimilarity, GuidanceSpaceRule,
};
use cfguide::metrics::{build_search_tree, t2_offset, tree_metrics, EventKind, InteractionEvent};
use cfguide::partition::{match_counterfactuals, DistanceMeasure, MatchingSpaceRule};
use cfguide::synth::{default_study_spec, generate, CausalGraphSpec, EdgeSpec, NodeSpec};
use cfguide::{guidance_report, rank_variables, FilterSet, GuidanceMode, Range, ReportMode};
use common::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant, result: Outcome) -> Outcome {
    let took = started.elapsed();
    match result {
        Ok(d) if took <= limit => Ok(format!("{d} ({took:.2?})")),
        Ok(d) => Err(format!("{d}, but took {took:.2?} > {limit:?}")),
        Err(d) => Err(format!("{d} ({took:.2?})")),
    }
}

fn cf_formula() -> Outcome {
    let t = Instant::now();
    let g = cf_guidance(0.5, 0.08).map_err(|e| e.to_string())?;
    let mut worst: f64 = (g - 0.35).abs();
    for i in 0..100 {
        let x = i as f64 / 99.0;
        worst = worst.max((cf_guidance(x, x).map_err(|e| e.to_string())? - x).abs());
    }
    within(Duration::from_secs(1), t, check(worst <= 1e-12, format!("g(0.5,0.08)={g}, max error {worst:e}")))
}

fn distribution_formula() -> Outcome {
    let s = |a, b| distribution_score(a, b).unwrap();
    let mut worst: f64 = (s(30, 10) - 0.5).abs();
    for k in 1..200 {
        worst = worst.max((s(k, k) - 1.0).abs()).max(s(k, 0).abs()).max(s(0, k).abs());
    }
    check(worst <= 1e-12, format!("s(30,10)={}, max error {worst:e}", s(30, 10)))
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let (mut worst, mut mismatched) = (0.0f64, Vec::new());
    for seed in 0..50 {
        let (d, f) = random_case(seed, 500, 10);
        let rows = oracle_normalize(&d);
        let view = normalize(&d);
        let (in_idx, ex_idx) = oracle_in_ex(&d, &f);
        let space = MatchingSpaceRule::default().space(&d, &f, DistanceMeasure::Euclidean).unwrap();
        let (cf, rem) = match_counterfactuals(&view, &in_idx, &ex_idx, &space).unwrap();
        if (cf.clone(), rem.clone()) != oracle_match(&rows, &in_idx, &ex_idx, space.columns()) {
            mismatched.push(seed);
        }
        let gspace = GuidanceSpaceRule::default().space(&d, &f, DistanceMeasure::Euclidean).unwrap();
        for b in [&cf, &rem] {
            if in_idx.is_empty() || b.is_empty() {
                continue;
            }
            let fast = subset_dissimilarity(&view, &in_idx, b, &gspace).unwrap();
            worst = worst.max((fast - oracle_dissimilarity(&rows, &in_idx, b, gspace.columns())).abs());
        }
    }
    within(
        Duration::from_secs(30),
        t,
        check(
            mismatched.is_empty() && worst <= 1e-9,
            format!("50 datasets, index mismatches {mismatched:?}, max dissimilarity error {worst:e}"),
        ),
    )
}

fn archetype_ordering() -> Outcome {
    let t = Instant::now();
    let mut cf = Vec::new();
    let mut corr = Vec::new();
    for a in Archetype::ALL {
        let r = guidance_report(&a.dataset(), &Archetype::filter(), ReportMode::Both).map_err(|e| e.to_string())?;
        cf.push(r.guidance_cf.unwrap());
        corr.push(r.guidance_corr.unwrap());
    }
    let ok = cf[0] < 0.5 * cf[3]
        && cf[1] < 0.5 * cf[3]
        && cf[2] > cf[0]
        && cf[4] > cf[0]
        && corr[1] > 2.0 * corr[0];
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    within(Duration::from_secs(10), t, check(ok, format!("cf [{}], corr [{}]", fmt(&cf), fmt(&corr))))
}

fn synth_recovery() -> Outcome {
    let t = Instant::now();
    let (d, truth) = generate(&default_study_spec(), 10_000).map_err(|e| e.to_string())?;
    let names: Vec<&str> = truth.ranking.iter().map(|c| c.variable.as_str()).collect();
    let x: Vec<Vec<f64>> = names.iter().map(|n| d.column_values(d.column_index(n).unwrap())).collect();
    let beta = ols(&x, &d.column_values(d.outcome_index()));
    let strengths: Vec<f64> = truth.ranking.iter().map(|c| c.strength).collect();
    let rho = spearman(&beta, &strengths);
    within(Duration::from_secs(30), t, check(rho >= 0.9, format!("spearman {rho:.4}")))
}

fn recall(spec: &CausalGraphSpec, mode: GuidanceMode) -> usize {
    let (d, truth) = generate(spec, 5000).unwrap();
    let ranking = rank_variables(&d, &FilterSet::new(), mode).unwrap();
    let top = truth.top(5);
    ranking.variables()[..5].iter().filter(|v| top.contains(v)).count()
}

/// A factor driven hard by the strongest cause with no path to the outcome:
/// filtering on it splits EX into look-alikes (same cause level, same outcome)
/// and the rest.
fn planted_spec(seed: u64) -> CausalGraphSpec {
    let mut spec = default_study_spec();
    let top = spec
        .edges
        .iter()
        .filter(|e| e.target == "mortality risk")
        .max_by(|a, b| a.strength.total_cmp(&b.strength))
        .unwrap()
        .source
        .clone();
    let outcome_at = spec.nodes.iter().position(|n| n.outcome).unwrap();
    spec.nodes.insert(outcome_at, NodeSpec { name: "insurance tier".into(), outcome: false });
    spec.edges.push(EdgeSpec { source: top, target: "insurance tier".into(), strength: 0.9 });
    spec.seed = seed;
    spec
}

fn cf_beats_corr() -> Outcome {
    let mut lines = Vec::new();
    let mut never_worse = true;
    for seed in 0..5 {
        let mut spec = default_study_spec();
        spec.seed = seed;
        let (cf, corr) = (recall(&spec, GuidanceMode::Cf), recall(&spec, GuidanceMode::Corr));
        never_worse &= cf >= corr;
        lines.push(format!("{cf}/{corr}"));
    }
    let mut planted = Vec::new();
    let mut strictly_better = false;
    for seed in 0..5 {
        let spec = planted_spec(seed);
        let (cf, corr) = (recall(&spec, GuidanceMode::Cf), recall(&spec, GuidanceMode::Corr));
        strictly_better |= cf > corr;
        planted.push(format!("{cf}/{corr}"));
    }
    check(
        never_worse && strictly_better,
        format!(
            "top-5 recall cf/corr by seed [{}], planted variant [{}]",
            lines.join(" "),
            planted.join(" ")
        ),
    )
}

fn fig5_events() -> Vec<InteractionEvent> {
    let mut events = Vec::new();
    let mut push = |kind, v: &str| {
        let ts = events.len() as u64;
        let mut e = InteractionEvent::new(ts, "s", kind, v);
        if kind != EventKind::RemoveVariable {
            e = e.with_range(Range::new(0.0, 1.0).unwrap());
        }
        events.push(e);
    };
    for (i, v) in ["v1", "v2", "v3", "v4"].into_iter().enumerate() {
        push(EventKind::AddVariable, v);
        let ranges = if i == 0 { 4 } else { 2 };
        for _ in 0..ranges {
            push(EventKind::ChangeRange, v);
        }
        push(EventKind::RemoveVariable, v);
    }
    for (v, w) in [("v5", "w5"), ("v6", "w6")] {
        push(EventKind::AddVariable, v);
        push(EventKind::AddVariable, w);
        push(EventKind::ChangeRange, w);
        push(EventKind::ChangeRange, v);
        push(EventKind::ChangeRange, v);
        push(EventKind::RemoveVariable, w);
        push(EventKind::RemoveVariable, v);
    }
    events
}

fn study_metrics() -> Outcome {
    let (_, truth) = generate(&default_study_spec(), 1).map_err(|e| e.to_string())?;
    let top = truth.top(5);
    let reversed: Vec<&str> = top.iter().rev().copied().collect();
    let rev = t2_offset(&reversed, &truth).map_err(|e| e.to_string())?;
    let same = t2_offset(&top, &truth).map_err(|e| e.to_string())?;
    let m = tree_metrics(&build_search_tree(&fig5_events()).map_err(|e| e.to_string())?);
    let ok = rev == 12
        && same == 0
        && (m.max_width, m.filter_range_width, m.filter_variable_width, m.depth) == (8, 8, 6, 6);
    check(
        ok,
        format!(
            "t2 reversed {rev}, identity {same}; tree width {}, range width {}, variable width {}, depth {}",
            m.max_width, m.filter_range_width, m.filter_variable_width, m.depth
        ),
    )
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        cmd_generate(&GenerateOptions { spec: None, n: 2000, out: dir.path().to_path_buf(), seed: Some(7) })
            .map_err(|e| e.to_string())?;
    }
    let mut same_files = true;
    for f in ["data.csv", "config.json", "truth.json"] {
        same_files &= std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap();
    }

    let (d, _) = generate(&default_study_spec(), 3000).map_err(|e| e.to_string())?;
    let mut f = FilterSet::new();
    f.add("smoking", Range::new(0.5, 4.0).unwrap()).unwrap();
    f.add("age", Range::new(-1.0, 1.0).unwrap()).unwrap();
    let a = guidance_report(&d, &f, ReportMode::Both).map_err(|e| e.to_string())?;
    let b = guidance_report(&d, &f, ReportMode::Both).map_err(|e| e.to_string())?;
    let bits = |r: &cfguide::GuidanceReport| {
        [r.d_in_cf, r.d_in_rem, r.guidance_cf, r.guidance_corr].map(|v| v.map(f64::to_bits))
    };
    let same_report = a == b && bits(&a) == bits(&b);
    check(same_files && same_report, format!("generate files equal: {same_files}, report bits equal: {same_report}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("cf guidance formula", cf_formula),
        ("distribution score formula", distribution_formula),
        ("matching and dissimilarity match brute force", oracle_equivalence),
        ("archetype ordering", archetype_ordering),
        ("synthetic strengths recoverable by regression", synth_recovery),
        ("cf ranking recall at least corr", cf_beats_corr),
        ("answer offset and search tree metrics", study_metrics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
