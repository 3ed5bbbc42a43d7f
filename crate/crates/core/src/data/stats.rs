use std::fmt::Write as _;

use serde::Serialize;

use super::Document;
use crate::error::{Error, Result};

/// Per-dataset relation-count summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsRow {
    pub min_k: usize,
    pub mean_k: f64,
    pub max_k: usize,
    /// Percentage of documents with at most five relations.
    pub pct_k_le_5: f64,
    /// Mean document length in characters.
    pub avg_chars: f64,
}

pub fn complexity_stats(docs: &[Document]) -> Result<StatsRow> {
    if docs.is_empty() {
        return Err(Error::usage("statistics need at least one document"));
    }
    let n = docs.len() as f64;
    let ks: Vec<usize> = docs.iter().map(Document::relation_count).collect();
    let chars: usize = docs.iter().map(|d| d.text.chars().count()).sum();
    Ok(StatsRow {
        min_k: *ks.iter().min().unwrap(),
        mean_k: ks.iter().sum::<usize>() as f64 / n,
        max_k: *ks.iter().max().unwrap(),
        pct_k_le_5: 100.0 * ks.iter().filter(|&&k| k <= 5).count() as f64 / n,
        avg_chars: chars as f64 / n,
    })
}

/// Keeps documents with at least `min_k` relations.
pub fn filter_min_relations(docs: Vec<Document>, min_k: usize) -> Vec<Document> {
    docs.into_iter().filter(|d| d.relation_count() >= min_k).collect()
}

pub fn stats_csv(rows: &[(String, StatsRow)]) -> String {
    let mut out = String::from("dataset,min,mean,max,pct_k_le_5,avg_chars\n");
    for (name, r) in rows {
        writeln!(
            out,
            "{name},{},{:.2},{},{:.2},{:.2}",
            r.min_k, r.mean_k, r.max_k, r.pct_k_le_5, r.avg_chars
        )
        .unwrap();
    }
    out
}

pub fn stats_table(rows: &[(String, StatsRow)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:<width$}  {:>5}  {:>8}  {:>5}  {:>8}  {:>9}\n",
        "dataset", "min", "mean", "max", "k<=5 %", "avg chars"
    );
    for (name, r) in rows {
        writeln!(
            out,
            "{name:<width$}  {:>5}  {:>8.2}  {:>5}  {:>8.2}  {:>9.2}",
            r.min_k, r.mean_k, r.max_k, r.pct_k_le_5, r.avg_chars
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{NodeRef, RelationTriple};
    use proptest::prelude::*;

    fn doc(k: usize, chars: usize) -> Document {
        Document {
            id: format!("k{k}"),
            text: "x".repeat(chars),
            words: (0..=k).map(|i| format!("w{i}")).collect(),
            entities: vec![],
            triples: (1..=k)
                .map(|i| RelationTriple {
                    head: NodeRef::Word(0),
                    tail: NodeRef::Word(i),
                    label: "r".into(),
                })
                .collect(),
            word_tags: None,
        }
    }

    #[test]
    fn arithmetic_example() {
        let r = complexity_stats(&[doc(1, 10), doc(2, 20), doc(9, 30)]).unwrap();
        assert_eq!((r.min_k, r.max_k), (1, 9));
        assert!((r.mean_k - 4.0).abs() < 1e-12);
        assert!((r.pct_k_le_5 - 200.0 / 3.0).abs() < 1e-9);
        assert!((r.avg_chars - 20.0).abs() < 1e-12);
        let csv = stats_csv(&[("toy".into(), r)]);
        assert_eq!(csv.lines().nth(1), Some("toy,1,4.00,9,66.67,20.00"));
    }

    #[test]
    fn boundary_and_errors() {
        assert_eq!(complexity_stats(&[doc(5, 1)]).unwrap().pct_k_le_5, 100.0);
        assert!(matches!(complexity_stats(&[]), Err(Error::Usage(_))));
        assert_eq!(complexity_stats(&[doc(0, 3)]).unwrap().max_k, 0);
    }

    #[test]
    fn root_attachments_do_not_count() {
        let mut d = doc(2, 5);
        d.triples.push(RelationTriple {
            head: NodeRef::Root,
            tail: NodeRef::Word(0),
            label: "root".into(),
        });
        assert_eq!(complexity_stats(&[d]).unwrap().max_k, 2);
    }

    #[test]
    fn filter_keeps_large_documents() {
        let kept = filter_min_relations(vec![doc(1, 1), doc(5, 1), doc(7, 1)], 5);
        assert_eq!(kept.len(), 2);
    }

    proptest! {
        #[test]
        fn permutation_invariant(ks in prop::collection::vec((0usize..12, 1usize..50), 1..10), seed in any::<u64>()) {
            let docs: Vec<Document> = ks.iter().map(|&(k, c)| doc(k, c)).collect();
            let mut shuffled = docs.clone();
            let n = shuffled.len();
            for i in 0..n {
                let j = (seed.wrapping_mul(i as u64 + 1) >> 7) as usize % n;
                shuffled.swap(i, j);
            }
            let a = complexity_stats(&docs).unwrap();
            let b = complexity_stats(&shuffled).unwrap();
            prop_assert_eq!((a.min_k, a.max_k), (b.min_k, b.max_k));
            prop_assert!((a.mean_k - b.mean_k).abs() < 1e-9);
            prop_assert!((a.pct_k_le_5 - b.pct_k_le_5).abs() < 1e-9);
            prop_assert!(a.min_k as f64 <= a.mean_k && a.mean_k <= a.max_k as f64);
        }
    }
}
