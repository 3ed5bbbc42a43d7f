use serde::Serialize;

use crate::error::{Error, Result};

/// Sample Pearson correlation. Errors on a constant series.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::usage(format!(
            "pearson_r needs two equal-length series of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Inclusive range of relation counts; `hi = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bucket {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl Bucket {
    pub fn new(lo: usize, hi: Option<usize>) -> Self {
        Bucket { lo, hi }
    }

    pub fn defaults() -> Vec<Bucket> {
        vec![
            Bucket::new(1, Some(5)),
            Bucket::new(6, Some(20)),
            Bucket::new(21, Some(50)),
            Bucket::new(51, None),
        ]
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= self.lo && self.hi.is_none_or(|hi| k <= hi)
    }

    pub fn label(&self) -> String {
        match self.hi {
            Some(hi) => format!("{}-{hi}", self.lo),
            None => format!("{}+", self.lo),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumRow {
    pub label: String,
    pub count: usize,
    /// Absent for empty buckets.
    pub mean_f1: Option<f64>,
}

/// Mean per-document F1 per bucket of gold relation counts. Documents
/// outside every bucket are gathered in a trailing `other` row, emitted
/// only when it is non-empty.
pub fn stratified_report(f1: &[f64], k: &[usize], buckets: &[Bucket]) -> Result<Vec<StratumRow>> {
    if f1.len() != k.len() {
        return Err(Error::usage("per-document F1 and k lists differ in length"));
    }
    let mut sums = vec![(0usize, 0.0f64); buckets.len() + 1];
    for (&f, &k) in f1.iter().zip(k) {
        let slot = buckets.iter().position(|b| b.contains(k)).unwrap_or(buckets.len());
        sums[slot].0 += 1;
        sums[slot].1 += f;
    }
    let mut rows: Vec<StratumRow> = buckets
        .iter()
        .map(Bucket::label)
        .chain(std::iter::once("other".to_string()))
        .zip(&sums)
        .map(|(label, &(count, sum))| StratumRow {
            label,
            count,
            mean_f1: (count > 0).then(|| sum / count as f64),
        })
        .collect();
    if rows.last().is_some_and(|r| r.count == 0) {
        rows.pop();
    }
    Ok(rows)
}
