//! Naive reference implementations shared by the integration tests.
#![allow(dead_code)]

use cfguide::{Dataset, DatasetConfig, FilterSet, Range};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random dataset of up to `max_rows` x `max_cols` (outcome last) and a filter
/// on column `x0`. Values are rounded to one decimal so ties happen.
pub fn random_case(seed: u64, max_rows: usize, max_cols: usize) -> (Dataset, FilterSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(12..=max_rows);
    let m = rng.random_range(3..=max_cols);
    let mut cols: Vec<(String, Vec<f64>)> = (0..m - 1)
        .map(|j| {
            let scale = rng.random_range(0.5..50.0);
            let v = (0..n).map(|_| (rng.random::<f64>() * scale * 10.0).round() / 10.0).collect();
            (format!("x{j}"), v)
        })
        .collect();
    cols.push(("y".into(), (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()));

    let x0 = &cols[0].1;
    let mut sorted = x0.clone();
    sorted.sort_by(f64::total_cmp);
    // a band somewhere in the middle so IN and EX are both non-empty
    let lo = sorted[n / 4];
    let hi = sorted[rng.random_range(n / 4..n * 3 / 4)];
    let mut f = FilterSet::new();
    f.add("x0", Range::new(lo, hi).unwrap()).unwrap();
    let d = Dataset::from_columns(&DatasetConfig::new("random", "y"), cols).unwrap();
    (d, f)
}

/// Row-major min-max rescaling, constant columns to 0.
pub fn oracle_normalize(d: &Dataset) -> Vec<Vec<f64>> {
    let m = d.column_count();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for i in 0..d.row_count() {
        for j in 0..m {
            lo[j] = lo[j].min(d.value(i, j));
            hi[j] = hi[j].max(d.value(i, j));
        }
    }
    (0..d.row_count())
        .map(|i| {
            (0..m)
                .map(|j| if hi[j] > lo[j] { (d.value(i, j) - lo[j]) / (hi[j] - lo[j]) } else { 0.0 })
                .collect()
        })
        .collect()
}

pub fn oracle_dist(a: &[f64], b: &[f64], cols: &[usize]) -> f64 {
    cols.iter().map(|&j| (a[j] - b[j]).powi(2)).sum::<f64>().sqrt()
}

pub fn oracle_dissimilarity(rows: &[Vec<f64>], a: &[usize], b: &[usize], cols: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in a {
        for &k in b {
            total += 1.0 - (-oracle_dist(&rows[i], &rows[k], cols)).exp();
        }
    }
    total / (a.len() * b.len()) as f64
}

pub fn oracle_in_ex(d: &Dataset, f: &FilterSet) -> (Vec<usize>, Vec<usize>) {
    (0..d.row_count()).partition(|&i| {
        f.clauses().iter().all(|c| {
            let v = d.value(i, d.column_index(&c.variable).unwrap());
            v >= c.range.lo() && v <= c.range.hi()
        })
    })
}

/// Full sort of EX by (min distance to IN, row index).
pub fn oracle_match(
    rows: &[Vec<f64>],
    in_idx: &[usize],
    ex_idx: &[usize],
    cols: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let total = in_idx.len() + ex_idx.len();
    let k = if in_idx.len() as f64 > total as f64 / 3.0 {
        ex_idx.len() / 2
    } else {
        in_idx.len().min(ex_idx.len())
    };
    let mut scored: Vec<(f64, usize)> = ex_idx
        .iter()
        .map(|&e| {
            let dmin = in_idx
                .iter()
                .map(|&i| oracle_dist(&rows[e], &rows[i], cols))
                .fold(f64::INFINITY, f64::min);
            (dmin, e)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cf: Vec<usize> = scored[..k].iter().map(|p| p.1).collect();
    let mut rem: Vec<usize> = scored[k..].iter().map(|p| p.1).collect();
    cf.sort();
    rem.sort();
    (cf, rem)
}

/// Least-squares coefficients of `y ~ 1 + x`, intercept dropped.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let p = x.len();
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[j - 1][i] });
    let b = DVector::from_column_slice(y);
    let beta = a.svd(true, true).solve(&b, 1e-12).expect("solvable");
    beta.iter().skip(1).copied().collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Average ranks, ties share the mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}
