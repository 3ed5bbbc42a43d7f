//! Exact-match triple scoring, tag F1 and complexity analysis.

mod correlation;
mod metrics;
mod triples;

pub use correlation::{pearson_r, stratified_report, Bucket, StratumRow};
pub use metrics::{
    document_f1, exact_micro_f1, exact_micro_f1_with, tagging_micro_f1, DocScore, EvalReport, Prf,
};
pub use triples::{normalize_text, Triple, TripleSet};
