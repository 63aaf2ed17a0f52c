//! Guidance for one filter, then a ranking of what to filter next.

use cfguide::{
    default_study_spec, generate, guidance_report, rank_variables, FilterSet, GuidanceMode, Range,
    ReportMode,
};

fn main() {
    let (d, truth) = generate(&default_study_spec(), 3000).unwrap();

    let mut f = FilterSet::new();
    f.add("physical activity", Range::new(0.5, 10.0).unwrap()).unwrap();
    let report = guidance_report(&d, &f, ReportMode::Both).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());

    for mode in [GuidanceMode::Cf, GuidanceMode::Corr] {
        let ranking = rank_variables(&d, &FilterSet::new(), mode).unwrap();
        println!("\n{mode:?}");
        for e in ranking.entries.iter().take(5) {
            println!("  {:<24} {:.3}{}", e.variable, e.score, if e.valid { "" } else { "  (invalid)" });
        }
    }
    println!("\ntrue top five: {:?}", truth.top(5));
}
