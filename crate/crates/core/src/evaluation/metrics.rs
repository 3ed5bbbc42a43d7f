use std::fmt::Write as _;

use serde::Serialize;

use super::correlation::{pearson_r, stratified_report, Bucket, StratumRow};
use super::TripleSet;
use crate::error::{Error, Result};

/// Precision, recall and F1 with the raw counts behind them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub n_pred: usize,
    pub n_gold: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, n_pred: usize, n_gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, n_pred);
        let recall = ratio(tp, n_gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            tp,
            n_pred,
            n_gold,
        }
    }
}

/// F1 of one document. No gold and no predictions counts as perfect; no
/// gold with predictions scores zero.
pub fn document_f1(pred: &TripleSet, gold: &TripleSet) -> f64 {
    if gold.is_empty() {
        return if pred.is_empty() { 1.0 } else { 0.0 };
    }
    Prf::from_counts(pred.overlap(gold), pred.len(), gold.len()).f1
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DocScore {
    pub id: String,
    pub k: usize,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub micro: Prf,
    pub per_doc: Vec<DocScore>,
    pub strata: Vec<StratumRow>,
    /// Correlation between gold relation count and per-document F1;
    /// absent when either series is constant.
    pub pearson_r: Option<f64>,
}

/// Exact-match scoring over aligned `(id, triples)` lists.
pub fn exact_micro_f1(pred: &[(String, TripleSet)], gold: &[(String, TripleSet)]) -> Result<EvalReport> {
    exact_micro_f1_with(pred, gold, &Bucket::defaults())
}

pub fn exact_micro_f1_with(
    pred: &[(String, TripleSet)],
    gold: &[(String, TripleSet)],
    buckets: &[Bucket],
) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::usage(format!(
            "{} predicted documents for {} gold documents",
            pred.len(),
            gold.len()
        )));
    }
    let (mut tp, mut n_pred, mut n_gold) = (0, 0, 0);
    let mut per_doc = Vec::with_capacity(gold.len());
    for ((pid, p), (gid, g)) in pred.iter().zip(gold) {
        if pid != gid {
            return Err(Error::usage(format!("document ids differ: {pid:?} vs {gid:?}")));
        }
        tp += p.overlap(g);
        n_pred += p.len();
        n_gold += g.len();
        per_doc.push(DocScore {
            id: gid.clone(),
            k: g.len(),
            f1: document_f1(p, g),
        });
    }
    let ks: Vec<usize> = per_doc.iter().map(|d| d.k).collect();
    let f1s: Vec<f64> = per_doc.iter().map(|d| d.f1).collect();
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    Ok(EvalReport {
        micro: Prf::from_counts(tp, n_pred, n_gold),
        strata: stratified_report(&f1s, &ks, buckets)?,
        pearson_r: pearson_r(&kf, &f1s).ok(),
        per_doc,
    })
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let m = &self.micro;
        let mut out = String::new();
        writeln!(out, "micro P   {:.3}", m.precision).unwrap();
        writeln!(out, "micro R   {:.3}", m.recall).unwrap();
        writeln!(out, "micro F1  {:.3}", m.f1).unwrap();
        writeln!(out, "triples   tp={} pred={} gold={}", m.tp, m.n_pred, m.n_gold).unwrap();
        match self.pearson_r {
            Some(r) => writeln!(out, "pearson r {r:.3}").unwrap(),
            None => writeln!(out, "pearson r undefined").unwrap(),
        }
        writeln!(out, "\n{:<8}  {:>6}  {:>7}", "k", "docs", "mean F1").unwrap();
        for s in &self.strata {
            let mean = s.mean_f1.map(|v| format!("{v:.3}")).unwrap_or_default();
            writeln!(out, "{:<8}  {:>6}  {:>7}", s.label, s.count, mean).unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let m = &self.micro;
        let mut out = String::from("metric,value\n");
        for (name, v) in [("micro_P", m.precision), ("micro_R", m.recall), ("micro_F1", m.f1)] {
            writeln!(out, "{name},{v:.6}").unwrap();
        }
        let r = self.pearson_r.map(|r| format!("{r:.6}")).unwrap_or_default();
        writeln!(out, "pearson_r,{r}").unwrap();
        for s in &self.strata {
            let mean = s.mean_f1.map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(out, "bucket_{}_count,{}", s.label, s.count).unwrap();
            writeln!(out, "bucket_{}_mean_f1,{mean}", s.label).unwrap();
        }
        out
    }

    /// `k,f1` pairs per document.
    pub fn per_doc_csv(&self) -> String {
        let mut out = String::from("id,k,f1\n");
        for d in &self.per_doc {
            writeln!(out, "{},{},{:.6}", d.id, d.k, d.f1).unwrap();
        }
        out
    }
}

/// Micro-averaged tag F1 over non-`O` tags.
pub fn tagging_micro_f1<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<Prf> {
    if pred.len() != gold.len() {
        return Err(Error::usage("tag sequence lists differ in length"));
    }
    let (mut tp, mut n_pred, mut n_gold) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        if p.len() != g.len() {
            return Err(Error::usage(format!(
                "tag sequences of length {} and {}",
                p.len(),
                g.len()
            )));
        }
        for (p, g) in p.iter().zip(g) {
            let (p, g) = (p.as_ref(), g.as_ref());
            let outside = crate::data::OUTSIDE_TAG;
            n_pred += usize::from(p != outside);
            n_gold += usize::from(g != outside);
            tp += usize::from(p == g && g != outside);
        }
    }
    Ok(Prf::from_counts(tp, n_pred, n_gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::Triple;

    fn set(items: &[(&str, &str, &str)]) -> TripleSet {
        items.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect()
    }

    fn one(p: TripleSet, g: TripleSet) -> EvalReport {
        exact_micro_f1(&[("d".into(), p)], &[("d".into(), g)]).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let g = set(&[("a", "r", "b")]);
        let r = one(g.clone(), g);
        assert_eq!((r.micro.precision, r.micro.recall, r.micro.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_of_three() {
        let g = set(&[("a", "r", "b"), ("b", "r", "c"), ("c", "r", "d")]);
        let p = set(&[("a", "r", "b"), ("b", "r", "c"), ("x", "r", "y")]);
        let r = one(p, g);
        for v in [r.micro.precision, r.micro.recall, r.micro.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn entity_types_do_not_matter() {
        let g: TripleSet = [Triple::new("a", "r", "b").with_types(Some("drug".into()), None)]
            .into_iter()
            .collect();
        let p: TripleSet = [Triple::new("a", "r", "b").with_types(Some("disease".into()), None)]
            .into_iter()
            .collect();
        assert_eq!(one(p, g).micro.f1, 1.0);
    }

    #[test]
    fn misaligned_ids() {
        let err = exact_micro_f1(&[("a".into(), set(&[]))], &[("b".into(), set(&[]))]);
        assert!(matches!(err, Err(Error::Usage(_))));
        assert!(exact_micro_f1(&[], &[("b".into(), set(&[]))]).is_err());
    }

    #[test]
    fn empty_document_scores() {
        assert_eq!(document_f1(&set(&[]), &set(&[])), 1.0);
        assert_eq!(document_f1(&set(&[("a", "r", "b")]), &set(&[])), 0.0);
        let r = one(set(&[]), set(&[]));
        assert_eq!(r.micro.f1, 0.0);
        assert_eq!(r.per_doc[0].f1, 1.0);
    }

    #[test]
    fn tagging_cases() {
        let g = vec![vec!["B-per", "I-per", "O", "B-loc"]];
        assert_eq!(tagging_micro_f1(&g, &g).unwrap().f1, 1.0);
        let all_o = vec![vec!["O"; 4]];
        let r = tagging_micro_f1(&all_o, &g).unwrap();
        assert_eq!((r.recall, r.f1), (0.0, 0.0));
        let half = vec![vec!["B-per", "O", "O", "O"]];
        let half_gold = vec![vec!["B-per", "I-per", "O", "O"]];
        let r = tagging_micro_f1(&half, &half_gold).unwrap();
        assert_eq!((r.precision, r.recall), (1.0, 0.5));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(tagging_micro_f1(&[vec!["O"]], &[vec!["O", "O"]]).is_err());
    }

    #[test]
    fn report_renders() {
        let g = set(&[("a", "r", "b")]);
        let r = one(g.clone(), g);
        assert!(r.to_table().contains("micro F1  1.000"));
        assert!(r.to_csv().starts_with("metric,value\nmicro_P,1.000000"));
        assert_eq!(r.per_doc_csv(), "id,k,f1\nd,1,1.000000\n");
    }
}
