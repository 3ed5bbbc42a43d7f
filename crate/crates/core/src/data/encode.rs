use serde::{Deserialize, Serialize};

use super::{Anchor, DataFormat, DatasetSpec, Document, EntitySpan, NodeRef, OUTSIDE_TAG};
use crate::error::{Error, Result};

/// Parser-ready view of a document. Node 0 is the virtual root; node
/// `i + 1` is word `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedGraph {
    pub doc_id: String,
    pub words: Vec<String>,
    /// Gold head per node; entry 0 is unused and set to 0.
    pub gold_heads: Vec<usize>,
    /// Gold relation index per node (0 = `none`).
    pub gold_relations: Vec<usize>,
    /// Gold tag index per node (root gets `O`).
    pub gold_tags: Vec<usize>,
    /// Entity index covering each word, if any.
    pub entity_of_word: Vec<Option<usize>>,
    pub entities: Vec<EntitySpan>,
    /// Number of gold relations in the source document.
    pub relation_count: usize,
    /// Relations that could not be encoded because their tail anchor
    /// already had a head.
    pub dropped_relations: usize,
}

impl EncodedGraph {
    pub fn node_count(&self) -> usize {
        self.words.len() + 1
    }
}

fn anchor_word(e: &EntitySpan, anchor: Anchor) -> usize {
    match anchor {
        Anchor::First => e.start,
        Anchor::Last => e.end - 1,
    }
}

/// Encodes a validated document. Relation-extraction documents get BIO tags
/// from their entity spans and each relation is attached between the
/// anchor words of its head and tail entities; words outside any relation
/// hang off the root with relation `none`. Dependency documents map one
/// word to one node.
pub fn encode_graph(doc: &Document, spec: &DatasetSpec) -> Result<EncodedGraph> {
    doc.validate(None)?;
    let n = doc.words.len();
    if n == 0 {
        return Err(Error::Encoding(format!("document {} has no words", doc.id)));
    }
    let tags = spec.tag_vocab();
    let rels = spec.relation_vocab();
    let mut heads = vec![0usize; n + 1];
    let mut relations = vec![0usize; n + 1];
    let mut gold_tags = vec![0usize; n + 1];
    let mut entity_of_word = vec![None; n];
    let mut dropped = 0;

    let rel_index = |label: &str| {
        rels.get(label).ok_or_else(|| {
            Error::Integrity(format!("document {}: unknown relation class {label:?}", doc.id))
        })
    };

    match spec.format {
        DataFormat::Conllu => {
            let word_tags = doc.word_tags.as_ref().ok_or_else(|| {
                Error::Encoding(format!("document {} lacks word tags", doc.id))
            })?;
            for (i, t) in word_tags.iter().enumerate() {
                gold_tags[i + 1] = if t == OUTSIDE_TAG {
                    0
                } else {
                    tags.get(t).ok_or_else(|| {
                        Error::Integrity(format!("document {}: unknown tag {t:?}", doc.id))
                    })?
                };
            }
            let mut seen = vec![false; n];
            for t in &doc.triples {
                let NodeRef::Word(tail) = t.tail else {
                    return Err(Error::Encoding(format!(
                        "document {}: dependency relation with non-word tail",
                        doc.id
                    )));
                };
                let head = match t.head {
                    NodeRef::Root => 0,
                    NodeRef::Word(h) => h + 1,
                    NodeRef::Entity(_) => {
                        return Err(Error::Encoding(format!(
                            "document {}: dependency relation with entity head",
                            doc.id
                        )))
                    }
                };
                if seen[tail] {
                    return Err(Error::Encoding(format!(
                        "document {}: word {tail} has more than one head",
                        doc.id
                    )));
                }
                seen[tail] = true;
                heads[tail + 1] = head;
                relations[tail + 1] = rel_index(&t.label)?;
            }
        }
        DataFormat::JsonTriples => {
            for (ei, e) in doc.entities.iter().enumerate() {
                for w in e.start..e.end {
                    if let Some(other) = entity_of_word[w] {
                        return Err(Error::Encoding(format!(
                            "document {}: entities {other} and {ei} overlap at word {w}",
                            doc.id
                        )));
                    }
                    entity_of_word[w] = Some(ei);
                }
                let b = tags.get(&format!("B-{}", e.label));
                let i = tags.get(&format!("I-{}", e.label));
                let (Some(b), Some(i)) = (b, i) else {
                    return Err(Error::Integrity(format!(
                        "document {}: unknown entity class {:?}",
                        doc.id, e.label
                    )));
                };
                gold_tags[e.start + 1] = b;
                for w in e.start + 1..e.end {
                    gold_tags[w + 1] = i;
                }
            }
            let mut attached = vec![false; n + 1];
            for t in &doc.triples {
                let (NodeRef::Entity(h), NodeRef::Entity(tl)) = (t.head, t.tail) else {
                    return Err(Error::Encoding(format!(
                        "document {}: relation endpoints must be entities",
                        doc.id
                    )));
                };
                let head_node = anchor_word(&doc.entities[h], spec.anchor) + 1;
                let tail_node = anchor_word(&doc.entities[tl], spec.anchor) + 1;
                let rel = rel_index(&t.label)?;
                if attached[tail_node] {
                    dropped += 1;
                    continue;
                }
                attached[tail_node] = true;
                heads[tail_node] = head_node;
                relations[tail_node] = rel;
            }
        }
    }

    Ok(EncodedGraph {
        doc_id: doc.id.clone(),
        words: doc.words.clone(),
        gold_heads: heads,
        gold_relations: relations,
        gold_tags,
        entity_of_word,
        entities: doc.entities.clone(),
        relation_count: doc.relation_count(),
        dropped_relations: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_conllu, RelationTriple};

    fn spec(entities: &[&str], relations: &[&str]) -> DatasetSpec {
        DatasetSpec {
            name: "t".into(),
            format: DataFormat::JsonTriples,
            entity_labels: entities.iter().map(|s| s.to_string()).collect(),
            relation_labels: relations.iter().map(|s| s.to_string()).collect(),
            tree_structured: false,
            oracle_tags: false,
            anchor: Anchor::Last,
        }
    }

    fn doc(words: &[&str], entities: Vec<EntitySpan>, triples: Vec<RelationTriple>) -> Document {
        Document {
            id: "d".into(),
            text: words.join(" "),
            words: words.iter().map(|s| s.to_string()).collect(),
            entities,
            triples,
            word_tags: None,
        }
    }

    fn span(start: usize, end: usize, label: &str) -> EntitySpan {
        EntitySpan {
            start,
            end,
            label: label.into(),
        }
    }

    #[test]
    fn no_relation_document() {
        let s = spec(&["per"], &["liveIn"]);
        let d = doc(&["John", "Smith", "died"], vec![span(0, 2, "per")], vec![]);
        let g = encode_graph(&d, &s).unwrap();
        let tags = s.tag_vocab();
        let names: Vec<&str> = g.gold_tags[1..].iter().map(|&t| tags.name(t)).collect();
        assert_eq!(names, vec!["B-per", "I-per", "O"]);
        assert_eq!(g.gold_heads, vec![0, 0, 0, 0]);
        assert_eq!(g.gold_relations, vec![0, 0, 0, 0]);
        assert_eq!(g.node_count(), 4);
    }

    #[test]
    fn relation_anchored_at_last_words() {
        let s = spec(&["per", "loc"], &["liveIn"]);
        let d = doc(
            &["Ann", "Lee", "lives", "in", "New", "York"],
            vec![span(0, 2, "per"), span(4, 6, "loc")],
            vec![RelationTriple {
                head: NodeRef::Entity(0),
                tail: NodeRef::Entity(1),
                label: "liveIn".into(),
            }],
        );
        let g = encode_graph(&d, &s).unwrap();
        // "York" (node 6) is headed by "Lee" (node 2).
        assert_eq!(g.gold_heads[6], 2);
        assert_eq!(g.gold_relations[6], 1);
        assert_eq!(g.gold_heads.iter().filter(|&&h| h != 0).count(), 1);

        let mut first = s.clone();
        first.anchor = Anchor::First;
        let g = encode_graph(&d, &first).unwrap();
        assert_eq!(g.gold_heads[5], 1);
    }

    #[test]
    fn overlapping_entities_fail() {
        let s = spec(&["per"], &["liveIn"]);
        let d = doc(&["a", "b", "c"], vec![span(0, 2, "per"), span(1, 3, "per")], vec![]);
        assert!(matches!(encode_graph(&d, &s), Err(Error::Encoding(_))));
    }

    #[test]
    fn second_head_for_same_tail_is_dropped() {
        let s = spec(&["x"], &["r"]);
        let rel = |h, t| RelationTriple {
            head: NodeRef::Entity(h),
            tail: NodeRef::Entity(t),
            label: "r".into(),
        };
        let d = doc(
            &["a", "b", "c"],
            vec![span(0, 1, "x"), span(1, 2, "x"), span(2, 3, "x")],
            vec![rel(0, 2), rel(1, 2)],
        );
        let g = encode_graph(&d, &s).unwrap();
        assert_eq!(g.dropped_relations, 1);
        assert_eq!(g.gold_heads[3], 1);
    }

    #[test]
    fn dependency_heads_are_column_seven() {
        let text = "1\tThe\tthe\tDET\tDT\t_\t2\tdet\t_\t_\n\
                    2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_\n\
                    3\tbarks\tbark\tVERB\tVBZ\t_\t0\troot\t_\t_\n";
        let docs = parse_conllu(text).unwrap();
        let s = DatasetSpec::infer("ud", DataFormat::Conllu, &docs);
        let g = encode_graph(&docs[0], &s).unwrap();
        assert_eq!(&g.gold_heads[1..], &[2, 3, 0]);
        let rels = s.relation_vocab();
        assert_eq!(rels.name(g.gold_relations[3]), "root");
        let tags = s.tag_vocab();
        assert_eq!(tags.name(g.gold_tags[2]), "NN");
    }
}
