//! Load a small CSV, normalize it and print per-column statistics.

use cfguide::dataset::column_stats;
use cfguide::{load_csv, normalize, DatasetConfig};

const CSV: &str = "\
age,bmi,smoking,risk
34,22.1,0,0.12
51,27.4,3,0.41
47,31.0,5,0.58
29,20.3,0,0.09
62,29.8,2,0.47
";

fn main() {
    let config = DatasetConfig::new("toy", "risk");
    let d = load_csv(CSV.as_bytes(), &config).unwrap();
    let view = normalize(&d);

    for spec in d.columns() {
        let s = column_stats(&d, &spec.name).unwrap();
        println!(
            "{:<8} min {:>6.2}  q1 {:>6.2}  median {:>6.2}  q3 {:>6.2}  max {:>6.2}",
            spec.name, s.min, s.q1, s.median, s.q3, s.max
        );
    }
    println!("row 2 normalized: {:?}", view.row(2));
}
