//! The five IN/CF/REM outcome patterns as small fixed datasets.
//!
//! Every fixture uses the same 90 students: `coffee` (cups per week, the
//! filter variable), `study hours` (the matching variable) and `grades` (the
//! outcome). The filter `coffee in [4.5, 5.5]` selects 20 students. Twenty
//! non-drinkers share their study habits and become CF; the other 50 study
//! far more and become REM. Only the grade shift applied to each subset
//! changes between cases.

use crate::dataset::{Dataset, DatasetConfig, Range};
use crate::partition::FilterSet;

pub const FILTER_VARIABLE: &str = "coffee";
pub const MATCHING_VARIABLE: &str = "study hours";
pub const OUTCOME: &str = "grades";

const IN_ROWS: usize = 20;
const CF_ROWS: usize = 20;
const REM_ROWS: usize = 50;
const BASE_GRADE: f64 = 70.0;
const SHIFT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Archetype {
    /// IN, CF and REM share one outcome distribution.
    AllSimilar,
    /// IN matches CF; REM differs.
    RemDifferent,
    /// IN matches REM; CF differs.
    CfDifferent,
    /// CF matches REM; IN differs from both.
    InDifferent,
    /// All three differ.
    AllDifferent,
}

impl Archetype {
    pub const ALL: [Archetype; 5] = [
        Archetype::AllSimilar,
        Archetype::RemDifferent,
        Archetype::CfDifferent,
        Archetype::InDifferent,
        Archetype::AllDifferent,
    ];

    /// 1-based case number.
    pub fn case(self) -> usize {
        Archetype::ALL.iter().position(|&a| a == self).unwrap() + 1
    }

    /// Grade shift applied to (IN, CF, REM).
    pub fn shifts(self) -> (f64, f64, f64) {
        match self {
            Archetype::AllSimilar => (0.0, 0.0, 0.0),
            Archetype::RemDifferent => (0.0, 0.0, SHIFT),
            Archetype::CfDifferent => (0.0, SHIFT, 0.0),
            Archetype::InDifferent => (SHIFT, 0.0, 0.0),
            Archetype::AllDifferent => (0.0, SHIFT, -SHIFT),
        }
    }

    pub fn filter() -> FilterSet {
        let mut f = FilterSet::new();
        f.add(FILTER_VARIABLE, Range::new(4.5, 5.5).unwrap())
            .expect("single clause");
        f
    }

    /// Row indices of the planted IN, CF and REM subsets.
    pub fn planted_subsets() -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let cf_start = IN_ROWS;
        let rem_start = IN_ROWS + CF_ROWS;
        (
            (0..cf_start).collect(),
            (cf_start..rem_start).collect(),
            (rem_start..rem_start + REM_ROWS).collect(),
        )
    }

    pub fn dataset(self) -> Dataset {
        let (in_shift, cf_shift, rem_shift) = self.shifts();
        let mut coffee = Vec::with_capacity(90);
        let mut study = Vec::with_capacity(90);
        let mut grades = Vec::with_capacity(90);

        for k in 0..IN_ROWS {
            coffee.push(4.5 + 0.05 * k as f64);
            study.push(0.01 * k as f64);
            grades.push(BASE_GRADE + in_shift + grade_noise(k));
        }
        for k in 0..CF_ROWS {
            coffee.push(if k < 10 { 4.0 + 0.04 * k as f64 } else { 5.6 + 0.04 * (k - 10) as f64 });
            study.push(0.005 + 0.01 * k as f64);
            grades.push(BASE_GRADE + cf_shift + grade_noise(k));
        }
        for k in 0..REM_ROWS {
            coffee.push(if k % 2 == 0 { 0.06 * k as f64 } else { 7.0 + 0.06 * k as f64 });
            study.push(0.6 + 0.008 * k as f64);
            grades.push(BASE_GRADE + rem_shift + grade_noise(k));
        }

        Dataset::from_columns(
            &DatasetConfig::new(format!("archetype case {}", self.case()), OUTCOME),
            vec![
                (FILTER_VARIABLE.into(), coffee),
                (MATCHING_VARIABLE.into(), study),
                (OUTCOME.into(), grades),
            ],
        )
        .expect("fixture is well formed")
    }
}

/// Small jitter in [-1, 1] plus one high and one low outlier every 20 rows,
/// the same pattern in every subset.
fn grade_noise(k: usize) -> f64 {
    match k % 20 {
        3 => 10.0,
        13 => -10.0,
        _ => ((k * 7) % 11) as f64 * 0.2 - 1.0,
    }
}
