//! The five IN/CF/REM outcome patterns and the scores each one gets.

use cfguide::archetypes::Archetype;
use cfguide::{guidance_report, ReportMode};

fn main() {
    println!("{:<14} {:>8} {:>8}", "pattern", "cf", "corr");
    for a in Archetype::ALL {
        let r = guidance_report(&a.dataset(), &Archetype::filter(), ReportMode::Both).unwrap();
        println!(
            "{:<14} {:>8.3} {:>8.3}",
            format!("{a:?}"),
            r.guidance_cf.unwrap(),
            r.guidance_corr.unwrap()
        );
    }
}
