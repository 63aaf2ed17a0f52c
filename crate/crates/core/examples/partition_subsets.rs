//! Split a synthetic dataset into IN, CF, REM and EX for one filter.

use cfguide::partition::{partition, DistanceMeasure, MatchingSpaceRule};
use cfguide::{default_study_spec, generate, normalize, FilterSet, Range};

fn main() {
    let (d, _) = generate(&default_study_spec(), 2000).unwrap();
    let mut f = FilterSet::new();
    f.add("smoking", Range::new(1.0, 10.0).unwrap()).unwrap();

    let view = normalize(&d);
    let p = partition(&view, &f, MatchingSpaceRule::default(), DistanceMeasure::Euclidean).unwrap();
    let y = d.outcome_index();
    let mean = |rows: &[usize]| rows.iter().map(|&i| d.value(i, y)).sum::<f64>() / rows.len().max(1) as f64;

    for (name, rows) in [("IN", &p.in_idx), ("CF", &p.cf_idx), ("REM", &p.rem_idx), ("EX", &p.ex_idx)] {
        println!("{name:<4} {:>5} rows, mean {} {:+.3}", rows.len(), d.outcome_name(), mean(rows));
    }
}
