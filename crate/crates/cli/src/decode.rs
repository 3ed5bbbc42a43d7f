use std::path::PathBuf;

use graphrel::data::encode_graph;
use graphrel::decoder::{DecodeMode, PredictionRecord};
use graphrel::model::ParserModel;
use graphrel::numerics::checkpoint::Checkpoint;
use graphrel::{Error, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::io::{check_distinct, read_documents, write_jsonl, write_meta};

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum ModeArg {
    Greedy,
    Mst,
}

#[derive(clap::Args)]
pub struct DecodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Worker threads; documents are decoded independently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the decoding mode stored in the checkpoint.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} threads: {e}")))
}

pub fn run(args: DecodeArgs) -> Result<()> {
    check_distinct(&args.output, &[&args.input, &args.checkpoint])?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mut model = ParserModel::from_checkpoint(&ck)?;
    if let Some(m) = args.mode {
        model.config.decode = Some(match m {
            ModeArg::Greedy => DecodeMode::Greedy,
            ModeArg::Mst => DecodeMode::Mst,
        });
    }
    let spec = model.config.dataset.clone();
    let docs = read_documents(&args.input, Some(spec.format))?;
    let relations = spec.relation_vocab();
    let records = pool(args.jobs)?.install(|| {
        docs.par_iter()
            .map(|doc| {
                let graph = encode_graph(doc, &spec)?;
                let p = model.predict(doc, &graph, None)?;
                Ok(PredictionRecord::new(&doc.id, &p.parse, &relations, p.triples))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_jsonl(&args.output, &records)?;
    write_meta(
        &args.output,
        &json!({
            "command": "decode",
            "checkpoint": args.checkpoint,
            "input": args.input,
            "mode": model.decode_mode(),
            "model": model.config_value()?,
            "checkpoint_meta": ck.meta,
        }),
    )?;
    let invalid = records.iter().filter(|r| !r.valid_tree).count();
    eprintln!("decoded {} documents ({invalid} not well-formed trees)", records.len());
    Ok(())
}
