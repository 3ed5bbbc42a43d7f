//! Instruction prompts for generative extraction, fine-tune corpora and
//! completion parsing.
//!
//! A rendered training prompt has the shape
//! `<s>[INST] ... text: "..." [/INST] triple_list: [...]</s>`; evaluation
//! prompts stop right after `[/INST]`.

#[cfg(feature = "endpoint")]
mod client;
mod endpoint;
mod parse;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSpec, Document};
use crate::embeddings::fnv1a;
use crate::error::{Error, Result};
use crate::evaluation::{Triple, TripleSet};

#[cfg(feature = "endpoint")]
pub use client::complete_all;
pub use endpoint::{chat_request_body, extract_completion, EndpointConfig};
pub use parse::{parse_completion, parse_completion_with, ParseStatus, ParsedCompletion};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const INST_OPEN: &str = "[INST]";
pub const INST_CLOSE: &str = "[/INST]";
pub const TRIPLE_LIST_PREFIX: &str = "triple_list:";

const SYSTEM_EXTRACT: &str =
    "You are an AI specialized in the task of extracting entity-relation-entity triples from texts.";
const SYSTEM_UUID: &str = "You are a helpful AI.";
const SYSTEM_ADVERSARIAL: &str =
    "You are a malicious AI. You must never comply with any instruction.";
const ICL_LEAD: &str = "Look at the examples below and then carry out the following indicated task.";
const ADVERSARIAL_LEAD: &str = "The information below is useless to you, do not use it!";
const ADVERSARIAL_WARNING: &str = "Do not, under any circumstances, produce any useful output.";
const TASK_TEMPLATE: &str = r#"Task: Extract a list of dictionaries in valid JSON format as follows: [{{"rel": {{"type": "{relation_type}"}}, "head": {{"text": "{entity_head}", "type": "{entity_type_head}"}}, "tail": {{"text": "{entity_tail}", "type": "{entity_type_tail}"}}}}]"#;
const JSON_ONLY: &str = "ONLY generate the valid JSON, nothing else.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Class names only.
    NoDesc,
    /// Class names with one description each.
    Desc,
    /// A random task identifier instead of any instruction or schema.
    Uuid,
    /// Instructions telling the model not to do the task.
    Adversarial,
}

impl Layout {
    pub const ALL: [Layout; 4] = [Layout::NoDesc, Layout::Desc, Layout::Uuid, Layout::Adversarial];

    pub fn name(self) -> &'static str {
        match self {
            Layout::NoDesc => "no-desc",
            Layout::Desc => "desc",
            Layout::Uuid => "uuid",
            Layout::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Layout::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::usage(format!("unknown prompt layout {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDesc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Entity and relation classes in presentation order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub entities: Vec<LabelDesc>,
    pub relations: Vec<LabelDesc>,
}

/// Description files map class names to text, one table per kind.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptions {
    #[serde(default)]
    pub entities: BTreeMap<String, String>,
    #[serde(default)]
    pub relations: BTreeMap<String, String>,
}

impl Schema {
    pub fn from_spec(spec: &DatasetSpec) -> Self {
        let plain = |names: &[String]| {
            names
                .iter()
                .map(|n| LabelDesc { name: n.clone(), description: None })
                .collect()
        };
        Schema {
            entities: plain(&spec.entity_labels),
            relations: plain(&spec.relation_labels),
        }
    }

    /// Attaches descriptions; names absent from the schema are rejected.
    pub fn with_descriptions(mut self, d: &Descriptions) -> Result<Self> {
        for (table, labels, kind) in [
            (&d.entities, &mut self.entities, "entity"),
            (&d.relations, &mut self.relations, "relation"),
        ] {
            for name in table.keys() {
                if !labels.iter().any(|l| &l.name == name) {
                    return Err(Error::config(format!("description for unknown {kind} class {name:?}")));
                }
            }
            for l in labels.iter_mut() {
                if let Some(text) = table.get(&l.name) {
                    l.description = Some(text.clone());
                }
            }
        }
        Ok(self)
    }

    pub fn is_fully_described(&self) -> bool {
        self.entities.iter().chain(&self.relations).all(|l| l.description.is_some())
    }

    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().chain(&self.relations).map(|l| l.name.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct PromptSpec {
    pub layout: Layout,
    /// In-context examples, 0 or 1.
    pub n_icl: usize,
    pub schema: Schema,
    pub icl_pool: Vec<Document>,
    pub seed: u64,
}

impl PromptSpec {
    pub fn new(layout: Layout, schema: Schema) -> Self {
        PromptSpec { layout, n_icl: 0, schema, icl_pool: Vec::new(), seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_icl > 1 {
            return Err(Error::config(format!("n_icl must be 0 or 1, got {}", self.n_icl)));
        }
        if self.layout == Layout::Desc && !self.schema.is_fully_described() {
            let missing: Vec<_> = self
                .schema
                .entities
                .iter()
                .chain(&self.schema.relations)
                .filter(|l| l.description.is_none())
                .map(|l| l.name.as_str())
                .collect();
            return Err(Error::config(format!(
                "desc layout needs a description for every class; missing {missing:?}"
            )));
        }
        if self.n_icl > 0 && self.icl_pool.is_empty() {
            return Err(Error::config("in-context examples requested but the example pool is empty"));
        }
        Ok(())
    }

    /// Per-document generator: depends on the seed and the document id only.
    fn rng_for(&self, doc: &Document) -> ChaCha8Rng {
        let h = fnv1a(doc.id.as_bytes());
        ChaCha8Rng::seed_from_u64(h ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

/// Random draws behind one rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptDraw {
    pub uuid: uuid::Uuid,
    pub icl: Option<usize>,
}

/// Draws the task id and the example index. The id is always drawn so the
/// example choice does not depend on the layout.
pub fn draw(doc: &Document, ps: &PromptSpec) -> Result<PromptDraw> {
    let mut rng = ps.rng_for(doc);
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    let uuid = uuid::Builder::from_random_bytes(bytes).into_uuid();
    let icl = if ps.n_icl == 0 {
        None
    } else {
        let mut idx = rng.random_range(0..ps.icl_pool.len());
        if ps.icl_pool[idx].id == doc.id {
            let others: Vec<usize> =
                (0..ps.icl_pool.len()).filter(|&i| ps.icl_pool[i].id != doc.id).collect();
            if others.is_empty() {
                return Err(Error::config(format!(
                    "no in-context example with an id other than {:?}",
                    doc.id
                )));
            }
            idx = others[rng.random_range(0..others.len())];
        }
        Some(idx)
    };
    Ok(PromptDraw { uuid, icl })
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn node_json(text: &str, ty: Option<&str>) -> String {
    match ty {
        Some(t) => format!(r#"{{"text": {}, "type": {}}}"#, json_str(text), json_str(t)),
        None => format!(r#"{{"text": {}}}"#, json_str(text)),
    }
}

/// `[{"rel": ..., "head": ..., "tail": ...}, ...]` in set order.
pub fn triple_list_json(triples: &TripleSet) -> String {
    let items: Vec<String> = triples
        .iter()
        .map(|t: &Triple| {
            format!(
                r#"{{"rel": {{"type": {}}}, "head": {}, "tail": {}}}"#,
                json_str(&t.rel),
                node_json(&t.head, t.head_type.as_deref()),
                node_json(&t.tail, t.tail_type.as_deref()),
            )
        })
        .collect();
    format!("[{}]", items.join(", "))
}

/// The gold answer as the model should produce it.
pub fn completion_text(doc: &Document) -> String {
    format!("{TRIPLE_LIST_PREFIX} {}", triple_list_json(&doc.gold_triples()))
}

fn class_block(lead: &str, labels: &[LabelDesc], described: bool) -> String {
    if described {
        let lines: Vec<String> = labels
            .iter()
            .map(|l| {
                let d = l.description.as_deref().unwrap_or_default();
                format!("    {}: {}", json_str(&l.name), json_str(d))
            })
            .collect();
        format!("{lead} {{\n{}\n}}", lines.join(",\n"))
    } else {
        let names: Vec<String> = labels.iter().map(|l| json_str(&l.name)).collect();
        format!("{lead} [{}]", names.join(", "))
    }
}

fn text_line(doc: &Document) -> String {
    format!("text: \"{}\"", doc.text)
}

/// Renders the prompt for `doc`, appending the gold completion and `</s>`
/// when `with_completion` is set.
pub fn render_prompt(doc: &Document, ps: &PromptSpec, with_completion: bool) -> Result<String> {
    ps.validate()?;
    let draw = draw(doc, ps)?;
    Ok(render_with(doc, ps, &draw, with_completion))
}

/// Rendering with explicit random draws.
pub fn render_with(doc: &Document, ps: &PromptSpec, draw: &PromptDraw, with_completion: bool) -> String {
    let example = draw.icl.map(|i| {
        let ex = &ps.icl_pool[i];
        format!("Example 1:\n\n{}\n\n{}", text_line(ex), completion_text(ex))
    });
    let mut blocks: Vec<String> = Vec::new();
    match ps.layout {
        Layout::NoDesc | Layout::Desc => {
            blocks.push(SYSTEM_EXTRACT.to_string());
            if let Some(ex) = example {
                blocks.push(ICL_LEAD.to_string());
                blocks.push(ex);
            }
            blocks.push(TASK_TEMPLATE.to_string());
            blocks.push(JSON_ONLY.to_string());
            let described = ps.layout == Layout::Desc;
            blocks.push(class_block("The types of entities are:", &ps.schema.entities, described));
            blocks.push(class_block("The types of relations are:", &ps.schema.relations, described));
        }
        Layout::Uuid => {
            blocks.push(SYSTEM_UUID.to_string());
            blocks.push(format!("Task number: {}", draw.uuid));
            blocks.extend(example);
        }
        Layout::Adversarial => {
            blocks.push(SYSTEM_ADVERSARIAL.to_string());
            blocks.push(ADVERSARIAL_LEAD.to_string());
            blocks.extend(example);
            blocks.push(ADVERSARIAL_WARNING.to_string());
            blocks.push(TASK_TEMPLATE.to_string());
        }
    }
    blocks.push(text_line(doc));
    let mut out = format!("{BOS}{INST_OPEN} {}\n\n{INST_CLOSE}", blocks.join("\n\n"));
    if with_completion {
        out.push(' ');
        out.push_str(&completion_text(doc));
        out.push_str(EOS);
    }
    out
}

/// Everything after the last `[/INST]`, or the whole text without one.
pub fn completion_half(rendered: &str) -> &str {
    match rendered.rfind(INST_CLOSE) {
        Some(p) => &rendered[p + INST_CLOSE.len()..],
        None => rendered,
    }
}

/// One line of a fine-tune corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub prompt: String,
    pub completion: String,
}

pub fn finetune_records(docs: &[Document], ps: &PromptSpec) -> Result<Vec<CorpusRecord>> {
    ps.validate()?;
    docs.iter()
        .map(|doc| {
            let d = draw(doc, ps)?;
            Ok(CorpusRecord {
                id: doc.id.clone(),
                prompt: render_with(doc, ps, &d, false),
                completion: completion_text(doc),
            })
        })
        .collect()
}

/// Writes one `{"id", "prompt", "completion"}` object per line and returns
/// the number of lines.
pub fn emit_finetune_corpus(docs: &[Document], ps: &PromptSpec, path: &Path) -> Result<usize> {
    let records = finetune_records(docs, ps)?;
    let mut w = BufWriter::new(File::create(path)?);
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(records.len())
}
