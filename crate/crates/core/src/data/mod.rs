//! Documents, dataset descriptions, corpus readers and graph encoding.

mod conllu;
mod encode;
mod json_triples;
pub mod presets;
mod stats;
pub mod toy;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Triple, TripleSet};

pub use conllu::{parse_conllu, read_conllu};
pub use encode::{encode_graph, EncodedGraph};
pub use json_triples::{parse_json_triples, read_json_triples, to_json_triples, write_json_triples};
pub use stats::{complexity_stats, filter_min_relations, stats_csv, stats_table, StatsRow};

/// Label reserved for "no relation" (and root attachments in RE graphs).
pub const NONE_LABEL: &str = "none";
/// Tag for words outside any entity.
pub const OUTSIDE_TAG: &str = "O";

/// Endpoint of a relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRef {
    /// The virtual root (dependency corpora only).
    Root,
    /// Word index (dependency corpora).
    Word(usize),
    /// Entity index (relation-extraction corpora).
    Entity(usize),
}

/// Half-open word range `[start, end)` labelled with an entity class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: NodeRef,
    pub tail: NodeRef,
    pub label: String,
}

/// One sample of any corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub words: Vec<String>,
    pub entities: Vec<EntitySpan>,
    pub triples: Vec<RelationTriple>,
    /// Gold per-word tags, when the corpus provides them directly.
    pub word_tags: Option<Vec<String>>,
}

impl Document {
    /// Number of gold relations; root attachments do not count.
    pub fn relation_count(&self) -> usize {
        self.triples.iter().filter(|t| t.head != NodeRef::Root).count()
    }

    pub fn entity_text(&self, entity: usize) -> String {
        let e = &self.entities[entity];
        self.words[e.start..e.end].join(" ")
    }

    pub fn node_text(&self, node: NodeRef) -> Option<String> {
        match node {
            NodeRef::Root => None,
            NodeRef::Word(i) => self.words.get(i).cloned(),
            NodeRef::Entity(e) => (e < self.entities.len()).then(|| self.entity_text(e)),
        }
    }

    pub fn node_type(&self, node: NodeRef) -> Option<String> {
        match node {
            NodeRef::Root => None,
            NodeRef::Word(i) => self.word_tags.as_ref().and_then(|t| t.get(i).cloned()),
            NodeRef::Entity(e) => self.entities.get(e).map(|e| e.label.clone()),
        }
    }

    /// Gold triples as surface text, excluding root attachments.
    pub fn gold_triples(&self) -> TripleSet {
        self.triples
            .iter()
            .filter_map(|t| {
                let head = self.node_text(t.head)?;
                let tail = self.node_text(t.tail)?;
                Some(
                    Triple::new(head, t.label.clone(), tail)
                        .with_types(self.node_type(t.head), self.node_type(t.tail)),
                )
            })
            .collect()
    }

    /// Structural checks; label checks too when a dataset spec is supplied.
    pub fn validate(&self, spec: Option<&DatasetSpec>) -> Result<()> {
        let n = self.words.len();
        let fail = |msg: String| Err(Error::Integrity(format!("document {}: {msg}", self.id)));
        if let Some(tags) = &self.word_tags {
            if tags.len() != n {
                return fail(format!("{} tags for {n} words", tags.len()));
            }
        }
        for (i, e) in self.entities.iter().enumerate() {
            if e.start >= e.end || e.end > n {
                return fail(format!("entity {i} has invalid span [{}, {})", e.start, e.end));
            }
            if let Some(spec) = spec {
                if !spec.entity_labels.iter().any(|l| l == &e.label) {
                    return fail(format!("unknown entity class {:?}", e.label));
                }
            }
        }
        for t in &self.triples {
            for node in [t.head, t.tail] {
                let ok = match node {
                    NodeRef::Root => node == t.head,
                    NodeRef::Word(i) => i < n,
                    NodeRef::Entity(e) => e < self.entities.len(),
                };
                if !ok {
                    return fail(format!("relation {:?} references invalid node {node:?}", t.label));
                }
            }
            if t.head == t.tail {
                return fail(format!("self-loop relation {:?}", t.label));
            }
            if let Some(spec) = spec {
                if !spec.relation_labels.iter().any(|l| l == &t.label) {
                    return fail(format!("unknown relation class {:?}", t.label));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Conllu,
    JsonTriples,
}

/// Which word of a multi-word entity carries its relations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    First,
    #[default]
    Last,
}

/// Schema of one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub format: DataFormat,
    pub entity_labels: Vec<String>,
    pub relation_labels: Vec<String>,
    #[serde(default)]
    pub tree_structured: bool,
    #[serde(default)]
    pub oracle_tags: bool,
    #[serde(default)]
    pub anchor: Anchor,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.entity_labels.is_empty() || self.relation_labels.is_empty() {
            return Err(Error::config(format!(
                "dataset {}: entity and relation label sets must be non-empty",
                self.name
            )));
        }
        if self.relation_labels.iter().any(|l| l == NONE_LABEL) {
            return Err(Error::config(format!(
                "dataset {}: relation label {NONE_LABEL:?} is reserved",
                self.name
            )));
        }
        for set in [&self.entity_labels, &self.relation_labels] {
            let mut sorted = set.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(Error::config(format!("dataset {}: duplicate labels", self.name)));
            }
        }
        Ok(())
    }

    /// Word-level tag inventory: `O` followed by `B-x`/`I-x` per entity
    /// class for relation-extraction corpora, or the plain word tags for
    /// dependency corpora.
    pub fn tag_vocab(&self) -> Labels {
        let mut names = vec![OUTSIDE_TAG.to_string()];
        match self.format {
            DataFormat::JsonTriples => {
                for l in &self.entity_labels {
                    names.push(format!("B-{l}"));
                    names.push(format!("I-{l}"));
                }
            }
            DataFormat::Conllu => {
                names.extend(self.entity_labels.iter().filter(|l| *l != OUTSIDE_TAG).cloned())
            }
        }
        Labels::new(names)
    }

    /// Relation inventory with `none` at index 0.
    pub fn relation_vocab(&self) -> Labels {
        let mut names = vec![NONE_LABEL.to_string()];
        names.extend(self.relation_labels.iter().cloned());
        Labels::new(names)
    }

    /// Builds a spec whose label sets are those observed in `docs`, in
    /// first-seen order.
    pub fn infer<'a>(
        name: &str,
        format: DataFormat,
        docs: impl IntoIterator<Item = &'a Document>,
    ) -> Self {
        let mut entity_labels: Vec<String> = Vec::new();
        let mut relation_labels: Vec<String> = Vec::new();
        let push = |set: &mut Vec<String>, l: &String| {
            if !set.contains(l) {
                set.push(l.clone());
            }
        };
        for d in docs {
            match format {
                DataFormat::Conllu => {
                    for t in d.word_tags.iter().flatten() {
                        push(&mut entity_labels, t);
                    }
                }
                DataFormat::JsonTriples => {
                    for e in &d.entities {
                        push(&mut entity_labels, &e.label);
                    }
                }
            }
            for t in &d.triples {
                push(&mut relation_labels, &t.label);
            }
        }
        DatasetSpec {
            name: name.to_string(),
            format,
            entity_labels,
            relation_labels,
            tree_structured: format == DataFormat::Conllu,
            oracle_tags: format == DataFormat::Conllu,
            anchor: Anchor::Last,
        }
    }
}

/// Bidirectional label ↔ index map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labels {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Labels {
    pub fn new(names: Vec<String>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Labels { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}
