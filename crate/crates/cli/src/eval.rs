use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;

use graphrel::decoder::PredictionRecord;
use graphrel::evaluation::{exact_micro_f1, TripleSet};
use graphrel::llm::{parse_completion_with, ParseStatus};
use graphrel::{Error, Result};
use rayon::prelude::*;
use serde_json::Value;

use crate::decode::pool;
use crate::io::{check_distinct, ensure_parent, print_out, read_documents, read_jsonl, write_meta};

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(clap::Args)]
pub struct EvalArgs {
    /// Prediction JSONL from `decode`, or `{"id", "completion"}` lines.
    #[arg(long)]
    pred: PathBuf,
    /// Gold documents (.json, .jsonl or .conllu).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
    /// Write the per-document (k, F1) pairs to this CSV file.
    #[arg(long)]
    per_doc: Option<PathBuf>,
    /// Reject completions that are not exactly one JSON array.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Triples of one prediction line. Completion lines also report a parse status.
fn triples_of(line: &Value, strict: bool) -> Result<(String, TripleSet, Option<ParseStatus>)> {
    let id = line
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Format("prediction line without a string \"id\"".into()))?
        .to_string();
    if let Some(c) = line.get("completion") {
        let text = c.as_str().ok_or_else(|| Error::Format(format!("{id}: completion is not a string")))?;
        let parsed = parse_completion_with(text, strict);
        return Ok((id, parsed.triples, Some(parsed.status)));
    }
    let rec: PredictionRecord = serde_json::from_value(line.clone())?;
    Ok((rec.id, rec.triples, None))
}

fn read_gold(path: &std::path::Path) -> Result<Vec<(String, TripleSet)>> {
    let is_jsonl = path.extension().is_some_and(|e| e == "jsonl");
    if is_jsonl {
        let lines: Vec<Value> = read_jsonl(path)?;
        return lines.iter().map(|l| triples_of(l, false).map(|(id, t, _)| (id, t))).collect();
    }
    Ok(read_documents(path, None)?.iter().map(|d| (d.id.clone(), d.gold_triples())).collect())
}

pub fn run(args: EvalArgs) -> Result<()> {
    if let Some(p) = &args.per_doc {
        check_distinct(p, &[&args.pred, &args.gold])?;
    }
    let gold = read_gold(&args.gold)?;
    let lines: Vec<Value> = read_jsonl(&args.pred)?;
    let parsed = pool(args.jobs)?.install(|| {
        lines.par_iter().map(|l| triples_of(l, args.strict)).collect::<Result<Vec<_>>>()
    })?;

    let mut statuses: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_id: HashMap<String, TripleSet> = HashMap::new();
    for (id, triples, status) in parsed {
        if let Some(s) = status {
            *statuses.entry(s.name()).or_default() += 1;
        }
        if by_id.insert(id.clone(), triples).is_some() {
            return Err(Error::Format(format!("document {id:?} predicted twice")));
        }
    }
    let mut pred = Vec::with_capacity(gold.len());
    let mut missing = 0;
    for (id, _) in &gold {
        pred.push((id.clone(), by_id.remove(id).unwrap_or_else(|| {
            missing += 1;
            TripleSet::new()
        })));
    }
    if let Some(extra) = by_id.keys().next() {
        return Err(Error::Usage(format!("predicted document {extra:?} is not in the gold file")));
    }
    if missing > 0 {
        eprintln!("warning: {missing} gold documents have no prediction and count as empty");
    }
    if !statuses.is_empty() {
        let s: Vec<String> = statuses.iter().map(|(k, v)| format!("{k}={v}")).collect();
        eprintln!("completions: {}", s.join(" "));
    }

    let report = exact_micro_f1(&pred, &gold)?;
    match args.format {
        ReportFormat::Table => print_out(&report.to_table())?,
        ReportFormat::Csv => print_out(&report.to_csv())?,
        ReportFormat::Json => print_out(&(serde_json::to_string_pretty(&report)? + "\n"))?,
    }
    if let Some(p) = &args.per_doc {
        ensure_parent(p)?;
        fs::write(p, report.per_doc_csv())?;
        write_meta(p, &serde_json::json!({"command": "eval", "pred": args.pred, "gold": args.gold, "strict": args.strict}))?;
    }
    Ok(())
}
