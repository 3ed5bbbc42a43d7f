//! Mean and sample standard deviation of metrics across runs.
//!
//! Each input is one run: a training `metrics.csv` (the best dev row is
//! used), an `eval --format csv` report (`metric,value` lines), or any CSV
//! with exactly one data row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use graphrel::{Error, Result};

use crate::TableFormat;

#[derive(clap::Args)]
pub struct SeedsArgs {
    /// One file per run.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

type Metrics = Vec<(String, f64)>;

fn num(path: &Path, field: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        return Ok(None);
    }
    field
        .trim()
        .parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("{}: {field:?} is not a number", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Numeric columns of the row to aggregate, in file order.
pub fn read_run(path: &Path) -> Result<Metrics> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>().map_err(|e| csv_err(path, e))?;

    if header == ["metric", "value"] {
        let mut out = Vec::new();
        for r in &rows {
            if let Some(v) = num(path, &r[1])? {
                out.push((r[0].to_string(), v));
            }
        }
        return Ok(out);
    }

    let row = if header.iter().any(|h| h == "split") && header.iter().any(|h| h == "micro_F1") {
        let split = header.iter().position(|h| h == "split").unwrap();
        let f1 = header.iter().position(|h| h == "micro_F1").unwrap();
        let mut best: Option<(f64, &csv::StringRecord)> = None;
        for r in rows.iter().filter(|r| &r[split] == "dev") {
            let v = num(path, &r[f1])?.unwrap_or(f64::NEG_INFINITY);
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, r));
            }
        }
        best.map(|(_, r)| r).ok_or_else(|| Error::Format(format!("{}: no dev rows", path.display())))?
    } else {
        match rows.as_slice() {
            [r] => r,
            _ => {
                return Err(Error::Usage(format!(
                    "{}: expected exactly one data row, found {}",
                    path.display(),
                    rows.len()
                )))
            }
        }
    };
    let mut out = Vec::new();
    for (h, v) in header.iter().zip(row.iter()) {
        if h == "split" {
            continue;
        }
        if let Some(v) = num(path, v)? {
            out.push((h.clone(), v));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Sample (n - 1) deviation; absent for a single run.
    pub std: Option<f64>,
}

pub fn aggregate(runs: &[Metrics]) -> Result<Vec<Aggregate>> {
    let Some(first) = runs.first() else {
        return Err(Error::Usage("no runs to aggregate".into()));
    };
    let names: Vec<&String> = first.iter().map(|(k, _)| k).collect();
    for (i, r) in runs.iter().enumerate().skip(1) {
        let other: Vec<&String> = r.iter().map(|(k, _)| k).collect();
        if other != names {
            return Err(Error::Usage(format!("run {} has metrics {other:?}, expected {names:?}", i + 1)));
        }
    }
    let n = runs.len();
    Ok((0..names.len())
        .map(|j| {
            let xs: Vec<f64> = runs.iter().map(|r| r[j].1).collect();
            // Shifted by the first run so identical runs give exactly zero spread.
            let mean = xs[0] + xs.iter().map(|x| x - xs[0]).sum::<f64>() / n as f64;
            let std = (n > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
            Aggregate { metric: names[j].clone(), n, mean, std }
        })
        .collect())
}

pub fn to_csv(rows: &[Aggregate]) -> String {
    let mut out = String::from("metric,n,mean,std\n");
    for r in rows {
        let std = r.std.map(|s| format!("{s:.4}")).unwrap_or_default();
        writeln!(out, "{},{},{:.4},{std}", r.metric, r.n, r.mean).unwrap();
    }
    out
}

pub fn to_table(rows: &[Aggregate]) -> String {
    let width = rows.iter().map(|r| r.metric.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    for r in rows {
        let std = r.std.map(|s| format!(" ± {s:.4}")).unwrap_or_default();
        writeln!(out, "{:<width$}  {:.4}{std}  (n={})", r.metric, r.mean, r.n).unwrap();
    }
    out
}

pub fn run(args: SeedsArgs) -> Result<()> {
    let runs = args.logs.iter().map(|p| read_run(p)).collect::<Result<Vec<_>>>()?;
    let rows = aggregate(&runs)?;
    match args.format {
        TableFormat::Csv => crate::io::print_out(&to_csv(&rows))?,
        TableFormat::Table => crate::io::print_out(&to_table(&rows))?,
    }
    Ok(())
}
