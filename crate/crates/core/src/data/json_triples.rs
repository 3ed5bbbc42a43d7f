//! Canonical relation-extraction format: a JSON array of
//! `{"id"?, "text"?, "tokens", "entities": [{"start","end","type"}],
//!   "relations": [{"head","tail","type"}]}` where relation endpoints are
//! entity indices and entity spans are half-open token ranges.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetSpec, Document, EntitySpan, NodeRef, RelationTriple};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct RawDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    tokens: Vec<String>,
    entities: Vec<RawEntity>,
    relations: Vec<RawRelation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tags: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawEntity {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRelation {
    head: usize,
    tail: usize,
    #[serde(rename = "type")]
    label: String,
}

pub fn read_json_triples(path: &Path, spec: Option<&DatasetSpec>) -> Result<Vec<Document>> {
    parse_json_triples(&fs::read_to_string(path)?, spec)
}

/// Parses and validates a JSON-triples corpus. Missing ids default to
/// `d<index>`; missing text defaults to the space-joined tokens.
pub fn parse_json_triples(input: &str, spec: Option<&DatasetSpec>) -> Result<Vec<Document>> {
    let raw: Vec<RawDocument> = serde_json::from_str(input)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r.id.unwrap_or_else(|| format!("d{}", i + 1));
            let nent = r.entities.len();
            for rel in &r.relations {
                if rel.head >= nent || rel.tail >= nent {
                    return Err(Error::Integrity(format!(
                        "document {id}: relation {:?} references entity {} but only {nent} exist",
                        rel.label,
                        rel.head.max(rel.tail)
                    )));
                }
            }
            let doc = Document {
                text: r.text.unwrap_or_else(|| r.tokens.join(" ")),
                words: r.tokens,
                entities: r
                    .entities
                    .into_iter()
                    .map(|e| EntitySpan {
                        start: e.start,
                        end: e.end,
                        label: e.label,
                    })
                    .collect(),
                triples: r
                    .relations
                    .into_iter()
                    .map(|rel| RelationTriple {
                        head: NodeRef::Entity(rel.head),
                        tail: NodeRef::Entity(rel.tail),
                        label: rel.label,
                    })
                    .collect(),
                word_tags: r.tags,
                id,
            };
            doc.validate(spec)?;
            Ok(doc)
        })
        .collect()
}

/// Serializes documents whose relations connect entities.
pub fn to_json_triples(docs: &[Document]) -> Result<String> {
    let raw = docs
        .iter()
        .map(|d| {
            let relations = d
                .triples
                .iter()
                .map(|t| match (t.head, t.tail) {
                    (NodeRef::Entity(head), NodeRef::Entity(tail)) => Ok(RawRelation {
                        head,
                        tail,
                        label: t.label.clone(),
                    }),
                    _ => Err(Error::usage(format!(
                        "document {}: only entity-to-entity relations can be written as JSON triples",
                        d.id
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RawDocument {
                id: Some(d.id.clone()),
                text: Some(d.text.clone()),
                tokens: d.words.clone(),
                entities: d
                    .entities
                    .iter()
                    .map(|e| RawEntity {
                        start: e.start,
                        end: e.end,
                        label: e.label.clone(),
                    })
                    .collect(),
                relations,
                tags: d.word_tags.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(serde_json::to_string_pretty(&raw)?)
}

pub fn write_json_triples(path: &Path, docs: &[Document]) -> Result<()> {
    fs::write(path, to_json_triples(docs)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataFormat;
    use proptest::prelude::*;

    const ADE_LIKE: &str = r#"[{"id": "ade-1",
        "tokens": ["One", "patient", "coronary", "vasospasm", "from", "epinephrine"],
        "entities": [{"start": 5, "end": 6, "type": "drug"}, {"start": 2, "end": 4, "type": "disease"}],
        "relations": [{"head": 1, "tail": 0, "type": "adverseEffect"}]}]"#;

    fn ade_spec() -> DatasetSpec {
        DatasetSpec {
            name: "ade".into(),
            format: DataFormat::JsonTriples,
            entity_labels: vec!["drug".into(), "disease".into()],
            relation_labels: vec!["adverseEffect".into()],
            tree_structured: false,
            oracle_tags: false,
            anchor: Default::default(),
        }
    }

    #[test]
    fn reads_ade_shaped_document() {
        let docs = parse_json_triples(ADE_LIKE, Some(&ade_spec())).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].triples.len(), 1);
        assert_eq!(docs[0].relation_count(), 1);
        let gold = docs[0].gold_triples();
        assert!(gold.contains_text("coronary vasospasm", "adverseEffect", "epinephrine"));
    }

    #[test]
    fn zero_relations_are_accepted() {
        let docs = parse_json_triples(
            r#"[{"tokens": ["a", "b"], "entities": [], "relations": []}]"#,
            None,
        )
        .unwrap();
        assert_eq!(docs[0].relation_count(), 0);
        assert_eq!(docs[0].id, "d1");
        assert_eq!(docs[0].text, "a b");
    }

    #[test]
    fn out_of_range_entity_reference_fails() {
        let input = r#"[{"id": "x", "tokens": ["a", "b", "c"],
            "entities": [{"start": 0, "end": 1, "type": "drug"}, {"start": 1, "end": 2, "type": "drug"}],
            "relations": [{"head": 7, "tail": 0, "type": "adverseEffect"}]}]"#;
        let err = parse_json_triples(input, None).unwrap_err();
        assert!(matches!(&err, Error::Integrity(m) if m.contains("document x")), "{err}");
    }

    #[test]
    fn bad_spans_and_unknown_labels_fail() {
        let empty_span = r#"[{"tokens": ["a"], "entities": [{"start": 1, "end": 1, "type": "drug"}], "relations": []}]"#;
        assert!(matches!(parse_json_triples(empty_span, None), Err(Error::Integrity(_))));
        let unknown = r#"[{"tokens": ["a"], "entities": [{"start": 0, "end": 1, "type": "food"}], "relations": []}]"#;
        assert!(parse_json_triples(unknown, None).is_ok());
        assert!(matches!(
            parse_json_triples(unknown, Some(&ade_spec())),
            Err(Error::Integrity(_))
        ));
    }

    fn arb_document() -> impl Strategy<Value = Document> {
        (1usize..8, 0usize..4, "[a-z]{1,6}").prop_flat_map(|(n, nent, id)| {
            let words = proptest::collection::vec("[A-Za-z]{1,5}", n);
            let spans = proptest::collection::vec((0..n, 1usize..3, 0usize..2), nent);
            (Just(id), words, spans)
        })
        .prop_flat_map(|(id, words, spans)| {
            let n = words.len();
            let entities: Vec<EntitySpan> = spans
                .into_iter()
                .map(|(s, len, l)| EntitySpan {
                    start: s,
                    end: (s + len).min(n),
                    label: ["drug", "disease"][l].to_string(),
                })
                .collect();
            let ne = entities.len();
            let rels = if ne >= 2 {
                proptest::collection::vec((0..ne, 0..ne), 0..4).boxed()
            } else {
                Just(vec![]).boxed()
            };
            (Just(id), Just(words), Just(entities), rels)
        })
        .prop_map(|(id, words, entities, rels)| Document {
            id,
            text: words.join(" "),
            triples: rels
                .into_iter()
                .filter(|(h, t)| h != t)
                .map(|(h, t)| RelationTriple {
                    head: NodeRef::Entity(h),
                    tail: NodeRef::Entity(t),
                    label: "adverseEffect".into(),
                })
                .collect(),
            words,
            entities,
            word_tags: None,
        })
    }

    proptest! {
        #[test]
        fn reading_own_output_is_identity(docs in proptest::collection::vec(arb_document(), 0..5)) {
            let text = to_json_triples(&docs).unwrap();
            let back = parse_json_triples(&text, Some(&ade_spec())).unwrap();
            prop_assert_eq!(back, docs);
        }
    }
}
