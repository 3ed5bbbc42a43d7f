use serde::{Deserialize, Serialize};

use super::ParseResult;
use crate::data::{DataFormat, DatasetSpec, EncodedGraph, Labels, NONE_LABEL, OUTSIDE_TAG};
use crate::evaluation::{Triple, TripleSet};

fn split_tag(tag: &str) -> Option<(char, &str)> {
    if tag == OUTSIDE_TAG {
        return None;
    }
    match tag.split_once('-') {
        Some(("B", c)) => Some(('B', c)),
        Some(("I", c)) => Some(('I', c)),
        _ => Some(('B', tag)),
    }
}

/// Word range `[start, end)` of the BIO chunk containing `word`, with its
/// class. A chunk opens at a `B-x`, or at an `I-x` that does not continue a
/// chunk of the same class, and extends over following `I-x` tags. A word
/// tagged `O` forms a one-word chunk with no class.
pub fn bio_chunk<S: AsRef<str>>(tags: &[S], word: usize) -> (usize, usize, Option<String>) {
    let Some((_, class)) = split_tag(tags[word].as_ref()) else {
        return (word, word + 1, None);
    };
    let continues = |i: usize| -> bool {
        // Whether word i (tagged I-class) extends the chunk of word i - 1.
        i > 0
            && matches!(split_tag(tags[i].as_ref()), Some(('I', c)) if c == class)
            && matches!(split_tag(tags[i - 1].as_ref()), Some((_, c)) if c == class)
    };
    let mut start = word;
    while continues(start) {
        start -= 1;
    }
    let mut end = word + 1;
    while end < tags.len() && continues(end) {
        end += 1;
    }
    (start, end, Some(class.to_string()))
}

/// Triples implied by a parse. Root attachments and `none` edges are
/// dropped. Relation-extraction nodes are rendered as the text of the BIO
/// chunk around the anchor word, using the per-node `tags` (root first);
/// dependency nodes are rendered as single words.
pub fn extract_triples(
    pr: &ParseResult,
    graph: &EncodedGraph,
    spec: &DatasetSpec,
    tags: &[usize],
) -> TripleSet {
    let tag_vocab = spec.tag_vocab();
    let rel_vocab = spec.relation_vocab();
    let word_tags: Vec<&str> = (1..graph.node_count())
        .map(|i| tags.get(i).map_or(OUTSIDE_TAG, |&t| tag_vocab.name(t)))
        .collect();
    let render = |node: usize| -> (String, Option<String>) {
        let w = node - 1;
        match spec.format {
            DataFormat::Conllu => (graph.words[w].clone(), Some(word_tags[w].to_string())),
            DataFormat::JsonTriples => {
                let (s, e, class) = bio_chunk(&word_tags, w);
                (graph.words[s..e].join(" "), class)
            }
        }
    };
    let mut out = TripleSet::new();
    for i in 1..graph.node_count().min(pr.heads.len()) {
        let (h, r) = (pr.heads[i], pr.relations[i]);
        if h == 0 || r == 0 || r >= rel_vocab.len() {
            continue;
        }
        let (head, head_type) = render(h);
        let (tail, tail_type) = render(i);
        out.insert(Triple::new(head, rel_vocab.name(r), tail).with_types(head_type, tail_type));
    }
    out
}

/// One line of the prediction dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub heads: Vec<usize>,
    pub relations: Vec<String>,
    pub triples: TripleSet,
    pub valid_tree: bool,
}

impl PredictionRecord {
    pub fn new(id: &str, pr: &ParseResult, relations: &Labels, triples: TripleSet) -> Self {
        PredictionRecord {
            id: id.to_string(),
            heads: pr.heads.clone(),
            relations: pr
                .relations
                .iter()
                .map(|&r| {
                    if r < relations.len() {
                        relations.name(r).to_string()
                    } else {
                        NONE_LABEL.to_string()
                    }
                })
                .collect(),
            triples,
            valid_tree: pr.valid_tree,
        }
    }
}
