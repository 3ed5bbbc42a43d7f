use std::fs;
use std::path::{Path, PathBuf};

use graphrel::data::{DatasetSpec, Document};
use graphrel::evaluation::TripleSet;
use graphrel::llm::{
    emit_finetune_corpus, finetune_records, parse_completion_with, render_prompt, Descriptions, Layout, PromptSpec,
    Schema,
};
use graphrel::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::lookup_preset;
use crate::io::{check_distinct, ensure_parent, print_out, read_documents, read_jsonl, write_jsonl, write_meta};

#[derive(clap::Subcommand)]
pub enum PromptsCommand {
    /// Render prompts as `{"id", "prompt"}` JSONL.
    Render(RenderArgs),
    /// Parse `{"id", "completion"}` JSONL into triples with a parse status.
    Parse(ParseArgs),
    /// Write a fine-tune corpus of `{"id", "prompt", "completion"}` lines.
    Corpus(CorpusArgs),
}

fn parse_layout(s: &str) -> std::result::Result<Layout, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(clap::Args)]
pub struct PromptArgs {
    /// Documents to render.
    #[arg(long)]
    input: PathBuf,
    /// no-desc, desc, uuid or adversarial.
    #[arg(long, value_parser = parse_layout)]
    layout: Layout,
    #[arg(long, default_value_t = 0)]
    n_icl: usize,
    /// Documents to draw in-context examples from, usually the training split.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Class labels from a dataset preset instead of the input documents.
    #[arg(long)]
    preset: Option<String>,
    /// TOML or JSON file with `entities` and `relations` description tables.
    #[arg(long)]
    descriptions: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct RenderArgs {
    #[command(flatten)]
    prompt: PromptArgs,
    /// Append the gold completion to each prompt.
    #[arg(long)]
    with_completion: bool,
    /// Output JSONL; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct CorpusArgs {
    #[command(flatten)]
    prompt: PromptArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(clap::Args)]
pub struct ParseArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output JSONL; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Accept only a completion that is exactly one JSON array.
    #[arg(long)]
    strict: bool,
}

fn read_descriptions(path: &Path) -> Result<Descriptions> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl PromptArgs {
    fn build(&self) -> Result<(PromptSpec, Vec<Document>)> {
        let docs = read_documents(&self.input, None)?;
        let pool = match &self.pool {
            Some(p) => read_documents(p, None)?,
            None => Vec::new(),
        };
        let spec = match &self.preset {
            Some(name) => lookup_preset(name)?.spec(docs.iter().chain(&pool)),
            None => {
                let format = crate::io::format_of(&self.input);
                DatasetSpec::infer("custom", format, docs.iter().chain(&pool))
            }
        };
        let mut schema = Schema::from_spec(&spec);
        if let Some(p) = &self.descriptions {
            schema = schema.with_descriptions(&read_descriptions(p)?)?;
        }
        let ps = PromptSpec { layout: self.layout, n_icl: self.n_icl, schema, icl_pool: pool, seed: self.seed };
        ps.validate()?;
        Ok((ps, docs))
    }

    fn meta(&self, command: &str) -> Value {
        json!({
            "command": command,
            "input": self.input,
            "layout": self.layout,
            "n_icl": self.n_icl,
            "pool": self.pool,
            "seed": self.seed,
            "preset": self.preset,
            "descriptions": self.descriptions,
        })
    }
}

fn emit<T: Serialize>(output: Option<&Path>, items: &[T]) -> Result<()> {
    match output {
        Some(p) => write_jsonl(p, items),
        None => {
            for item in items {
                print_out(&(serde_json::to_string(item)? + "\n"))?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RenderedPrompt<'a> {
    id: &'a str,
    prompt: String,
}

#[derive(Serialize)]
struct ParsedLine {
    id: String,
    status: &'static str,
    triples: TripleSet,
    warnings: Vec<String>,
}

fn render(args: RenderArgs) -> Result<()> {
    let (ps, docs) = args.prompt.build()?;
    let out = docs
        .iter()
        .map(|d| Ok(RenderedPrompt { id: &d.id, prompt: render_prompt(d, &ps, args.with_completion)? }))
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = &args.output {
        check_distinct(p, &[&args.prompt.input])?;
    }
    emit(args.output.as_deref(), &out)?;
    if let Some(p) = &args.output {
        let mut meta = args.prompt.meta("prompts render");
        meta["with_completion"] = json!(args.with_completion);
        write_meta(p, &meta)?;
    }
    Ok(())
}

fn corpus(args: CorpusArgs) -> Result<()> {
    let (ps, docs) = args.prompt.build()?;
    check_distinct(&args.output, &[&args.prompt.input])?;
    ensure_parent(&args.output)?;
    // Validates every document before the file is created.
    finetune_records(&docs, &ps)?;
    let n = emit_finetune_corpus(&docs, &ps, &args.output)?;
    write_meta(&args.output, &args.prompt.meta("prompts corpus"))?;
    eprintln!("wrote {n} records to {}", args.output.display());
    Ok(())
}

fn parse(args: ParseArgs) -> Result<()> {
    let lines: Vec<Value> = read_jsonl(&args.input)?;
    let mut out = Vec::with_capacity(lines.len());
    for l in &lines {
        let id = l.get("id").and_then(Value::as_str);
        let text = l.get("completion").and_then(Value::as_str);
        let (Some(id), Some(text)) = (id, text) else {
            return Err(Error::Format("each line needs string \"id\" and \"completion\" fields".into()));
        };
        let p = parse_completion_with(text, args.strict);
        out.push(ParsedLine { id: id.to_string(), status: p.status.name(), triples: p.triples, warnings: p.warnings });
    }
    if let Some(p) = &args.output {
        check_distinct(p, &[&args.input])?;
    }
    emit(args.output.as_deref(), &out)?;
    if let Some(p) = &args.output {
        write_meta(p, &json!({"command": "prompts parse", "input": args.input, "strict": args.strict}))?;
    }
    Ok(())
}

pub fn run(cmd: PromptsCommand) -> Result<()> {
    match cmd {
        PromptsCommand::Render(a) => render(a),
        PromptsCommand::Parse(a) => parse(a),
        PromptsCommand::Corpus(a) => corpus(a),
    }
}
