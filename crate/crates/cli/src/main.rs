mod config;
mod decode;
mod eval;
mod io;
mod prompts;
mod seeds;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphrel::data::toy::{generate_toy, ToyConfig};
use graphrel::data::{complexity_stats, filter_min_relations, stats_csv, stats_table, write_json_triples};
use graphrel::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "graphrel", version, about = "Graph-based relation extraction and dependency parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relation-count statistics per dataset.
    Stats(StatsArgs),
    /// Train a parser for every configured seed.
    Train(train::TrainArgs),
    /// Run a checkpoint over documents and write prediction JSONL.
    Decode(decode::DecodeArgs),
    /// Score predictions or model completions against gold documents.
    Eval(eval::EvalArgs),
    /// Prompt rendering, completion parsing and fine-tune corpora.
    #[command(subcommand)]
    Prompts(prompts::PromptsCommand),
    /// Mean and standard deviation of metrics across runs.
    Seeds(seeds::SeedsArgs),
    /// Write the synthetic toy corpus as JSON-triples files.
    GenerateToy(ToyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TableFormat {
    Table,
    Csv,
}

#[derive(clap::Args)]
struct StatsArgs {
    /// `NAME=PATH[,PATH...]`; all paths are pooled into one row.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<String>,
    /// Keep only documents with at least this many relations.
    #[arg(long, default_value_t = 0)]
    min_k: usize,
    #[arg(long, value_enum, default_value = "table")]
    format: TableFormat,
}

#[derive(clap::Args)]
struct ToyArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 100)]
    n_dev: usize,
}

fn stats(args: StatsArgs) -> Result<()> {
    let mut rows = Vec::new();
    for d in &args.datasets {
        let (name, paths) = d
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--dataset {d:?} must look like NAME=PATH[,PATH]")))?;
        let mut docs = Vec::new();
        for p in paths.split(',').filter(|p| !p.is_empty()) {
            docs.extend(io::read_documents(p.as_ref(), None)?);
        }
        let docs = filter_min_relations(docs, args.min_k);
        rows.push((name.to_string(), complexity_stats(&docs)?));
    }
    if args.min_k > 0 {
        eprintln!("filter: documents with k >= {}", args.min_k);
    }
    match args.format {
        TableFormat::Csv => io::print_out(&stats_csv(&rows))?,
        TableFormat::Table => io::print_out(&stats_table(&rows))?,
    }
    Ok(())
}

fn generate_toy_files(args: ToyArgs) -> Result<()> {
    let cfg = ToyConfig { n_train: args.n_train, n_dev: args.n_dev, seed: args.seed, ..ToyConfig::default() };
    let corpus = generate_toy(&cfg);
    std::fs::create_dir_all(&args.out)?;
    write_json_triples(&args.out.join("train.json"), &corpus.train)?;
    write_json_triples(&args.out.join("dev.json"), &corpus.dev)?;
    eprintln!("wrote {} train and {} dev documents to {}", corpus.train.len(), corpus.dev.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats(a) => stats(a),
        Command::Train(a) => train::run(a),
        Command::Decode(a) => decode::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Prompts(c) => prompts::run(c),
        Command::Seeds(a) => seeds::run(a),
        Command::GenerateToy(a) => generate_toy_files(a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Runtime => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("graphrel: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
