//! Synthetic relation corpus with a fixed attachment grammar.
//!
//! Every entity after the first is attached to the nearest preceding
//! entity, and the relation label is a function of the two entity classes.
//! Filler words never occur inside entities, so a sequence model can
//! recover the full gold graph.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Anchor, DataFormat, DatasetSpec, Document, EntitySpan, NodeRef, RelationTriple};

pub const TOY_ENTITY_LABELS: [&str; 3] = ["per", "org", "loc"];
pub const TOY_RELATION_LABELS: [&str; 4] = ["knows", "owns", "near", "joins"];

const PER: [&str; 8] = ["alice", "bruno", "chen", "dara", "emil", "farah", "gus", "hana"];
const ORG: [&str; 8] = ["acme", "globex", "initech", "umbrella", "hooli", "vandelay", "stark", "wayne"];
const LOC: [&str; 8] = ["paris", "lima", "oslo", "cairo", "delhi", "quito", "perth", "turin"];
const PER2: [[&str; 2]; 3] = [["mary", "jones"], ["john", "smith"], ["ada", "byron"]];
const ORG2: [[&str; 2]; 3] = [["blue", "corp"], ["red", "bank"], ["green", "labs"]];
const LOC2: [[&str; 2]; 3] = [["new", "york"], ["san", "diego"], ["hong", "kong"]];
const FILLER: [&str; 20] = [
    "the", "a", "of", "and", "then", "with", "from", "said", "went", "saw", "after", "before",
    "quietly", "today", "near", "by", "was", "is", "again", "there",
];

#[derive(Clone, Debug)]
pub struct ToyConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub min_entities: usize,
    pub max_entities: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_train: 500,
            n_dev: 100,
            min_words: 6,
            max_words: 12,
            min_entities: 2,
            max_entities: 4,
            seed: 0,
        }
    }
}

pub struct ToyCorpus {
    pub spec: DatasetSpec,
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
}

pub fn toy_spec() -> DatasetSpec {
    DatasetSpec {
        name: "toy".into(),
        format: DataFormat::JsonTriples,
        entity_labels: TOY_ENTITY_LABELS.iter().map(|s| s.to_string()).collect(),
        relation_labels: TOY_RELATION_LABELS.iter().map(|s| s.to_string()).collect(),
        tree_structured: false,
        oracle_tags: false,
        anchor: Anchor::Last,
    }
}

/// Relation label for a head of class `head` and a tail of class `tail`.
pub fn toy_relation(head: usize, tail: usize) -> &'static str {
    TOY_RELATION_LABELS[(head * 3 + tail) % 4]
}

pub fn generate_toy(cfg: &ToyConfig) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train = (0..cfg.n_train)
        .map(|i| toy_document(&mut rng, cfg, format!("train-{i}")))
        .collect();
    let dev = (0..cfg.n_dev)
        .map(|i| toy_document(&mut rng, cfg, format!("dev-{i}")))
        .collect();
    ToyCorpus {
        spec: toy_spec(),
        train,
        dev,
    }
}

fn entity_words(rng: &mut ChaCha8Rng, class: usize, two_words: bool) -> Vec<&'static str> {
    if two_words {
        let pool = [&PER2, &ORG2, &LOC2][class];
        pool.choose(rng).unwrap().to_vec()
    } else {
        let pool = [&PER, &ORG, &LOC][class];
        vec![*pool.choose(rng).unwrap()]
    }
}

fn toy_document(rng: &mut ChaCha8Rng, cfg: &ToyConfig, id: String) -> Document {
    let n_words = rng.random_range(cfg.min_words..=cfg.max_words);
    let n_entities = rng.random_range(cfg.min_entities..=cfg.max_entities);
    let mut ents: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut used = 0;
    for _ in 0..n_entities {
        let class = rng.random_range(0..3);
        let two = rng.random_bool(0.3) && used + 2 <= n_words;
        if used + 1 > n_words {
            break;
        }
        let w = entity_words(rng, class, two);
        used += w.len();
        ents.push((class, w));
    }
    // Spread the filler words over the gaps between entities.
    let mut gaps = vec![0usize; ents.len() + 1];
    for _ in 0..n_words - used {
        let g = rng.random_range(0..gaps.len());
        gaps[g] += 1;
    }
    let mut words = Vec::with_capacity(n_words);
    let mut entities = Vec::new();
    for (g, gap) in gaps.iter().enumerate() {
        for _ in 0..*gap {
            words.push(FILLER.choose(rng).unwrap().to_string());
        }
        if let Some((class, w)) = ents.get(g) {
            let start = words.len();
            words.extend(w.iter().map(|s| s.to_string()));
            entities.push(EntitySpan {
                start,
                end: words.len(),
                label: TOY_ENTITY_LABELS[*class].to_string(),
            });
        }
    }
    let triples = (1..ents.len())
        .map(|e| RelationTriple {
            head: NodeRef::Entity(e - 1),
            tail: NodeRef::Entity(e),
            label: toy_relation(ents[e - 1].0, ents[e].0).to_string(),
        })
        .collect();
    Document {
        id,
        text: words.join(" "),
        words,
        entities,
        triples,
        word_tags: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode_graph;

    #[test]
    fn shape_of_generated_corpus() {
        let c = generate_toy(&ToyConfig::default());
        assert_eq!((c.train.len(), c.dev.len()), (500, 100));
        for d in c.train.iter().chain(&c.dev) {
            assert!((6..=12).contains(&d.words.len()));
            assert!((2..=4).contains(&d.entities.len()));
            assert_eq!(d.triples.len(), d.entities.len() - 1);
            d.validate(Some(&c.spec)).unwrap();
            let g = encode_graph(d, &c.spec).unwrap();
            assert_eq!(g.dropped_relations, 0);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_toy(&ToyConfig::default());
        let b = generate_toy(&ToyConfig::default());
        assert_eq!(a.train, b.train);
        let c = generate_toy(&ToyConfig {
            seed: 1,
            ..ToyConfig::default()
        });
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn filler_is_disjoint_from_entities() {
        for f in FILLER {
            let all = PER.iter().chain(&ORG).chain(&LOC);
            assert!(!all.clone().any(|w| *w == f));
            for pool in [&PER2, &ORG2, &LOC2] {
                assert!(!pool.iter().flatten().any(|w| *w == f));
            }
        }
    }

    #[test]
    fn labels_cover_all_relations() {
        let mut seen: Vec<&str> = (0..3)
            .flat_map(|h| (0..3).map(move |t| toy_relation(h, t)))
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }
}
