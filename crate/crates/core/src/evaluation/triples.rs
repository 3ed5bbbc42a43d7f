use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A (head, relation, tail) assertion over surface text. Entity types are
/// carried along but never compared.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub rel: String,
    pub tail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_type: Option<String>,
}

type Key = (String, String, String);

impl Triple {
    pub fn new(head: impl Into<String>, rel: impl Into<String>, tail: impl Into<String>) -> Self {
        Triple {
            head: head.into(),
            rel: rel.into(),
            tail: tail.into(),
            head_type: None,
            tail_type: None,
        }
    }

    pub fn with_types(mut self, head_type: Option<String>, tail_type: Option<String>) -> Self {
        self.head_type = head_type;
        self.tail_type = tail_type;
        self
    }

    fn key(&self) -> Key {
        (normalize_text(&self.head), self.rel.clone(), normalize_text(&self.tail))
    }
}

/// Set of triples keyed by normalized text; the first inserted copy of a
/// key keeps its types.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleSet {
    items: BTreeMap<Key, Triple>,
}

impl TripleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when an equal triple was already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        let key = t.key();
        if self.items.contains_key(&key) {
            return false;
        }
        self.items.insert(key, t);
        true
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.items.contains_key(&t.key())
    }

    pub fn contains_text(&self, head: &str, rel: &str, tail: &str) -> bool {
        self.contains(&Triple::new(head, rel, tail))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.items.values()
    }

    /// Number of triples present in both sets.
    pub fn overlap(&self, other: &TripleSet) -> usize {
        self.items.keys().filter(|k| other.items.contains_key(*k)).count()
    }
}

impl FromIterator<Triple> for TripleSet {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut set = TripleSet::new();
        for t in iter {
            set.insert(t);
        }
        set
    }
}

impl Extend<Triple> for TripleSet {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        for t in iter {
            self.insert(t);
        }
    }
}

impl Serialize for TripleSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for TripleSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vec::<Triple>::deserialize(d)?.into_iter().collect())
    }
}
