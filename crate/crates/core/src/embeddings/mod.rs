//! Frozen word features plus a learned root vector.

mod store;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Document;
use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

pub use store::{load_precomputed, EmbeddingStore, STORE_MAGIC, STORE_VERSION};

pub const UNK: &str = "<unk>";

/// Mean of the subword rows belonging to each word. `word_of_piece[p]`
/// names the word that piece `p` belongs to; every word needs one piece.
pub fn average_subwords(pieces: &Tensor, word_of_piece: &[usize], n_words: usize) -> Result<Tensor> {
    if pieces.shape().len() != 2 || pieces.rows() != word_of_piece.len() {
        return Err(Error::Dimension {
            op: "average_subwords",
            lhs: pieces.shape().to_vec(),
            rhs: vec![word_of_piece.len()],
        });
    }
    let d = pieces.cols();
    let mut sums = vec![0.0; n_words * d];
    let mut counts = vec![0usize; n_words];
    for (p, &w) in word_of_piece.iter().enumerate() {
        if w >= n_words {
            return Err(Error::Integrity(format!("piece {p} maps to word {w} of {n_words}")));
        }
        counts[w] += 1;
        for (s, v) in sums[w * d..(w + 1) * d].iter_mut().zip(pieces.lane(p)) {
            *s += v;
        }
    }
    for (w, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::Integrity(format!("word {w} has no subword pieces")));
        }
        for s in &mut sums[w * d..(w + 1) * d] {
            *s /= c as f64;
        }
    }
    Tensor::new(vec![n_words, d], sums)
}

/// Deterministic pseudo-random vector per word string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashEmbedder {
    pub seed: u64,
    pub d_f: usize,
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashEmbedder {
    pub fn new(seed: u64, d_f: usize) -> Result<Self> {
        if d_f == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        Ok(HashEmbedder { seed, d_f })
    }

    pub fn vector(&self, word: &str) -> Vec<f64> {
        let key = fnv1a(word.as_bytes()) ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        (0..self.d_f).map(|_| rng.sample(StandardNormal)).collect()
    }

    pub fn rows(&self, words: &[String]) -> Tensor {
        let data = words.iter().flat_map(|w| self.vector(w)).collect();
        Tensor::from_parts(vec![words.len(), self.d_f], data)
    }
}

/// Trainable table over a fixed vocabulary; row 0 is the shared unknown
/// vector.
#[derive(Clone, Debug)]
pub struct LookupEmbedder {
    pub vocab: Vec<String>,
    index: HashMap<String, usize>,
    pub table: ParamId,
    pub d_f: usize,
}

impl LookupEmbedder {
    /// Vocabulary in first-seen order over `docs`, after the unknown entry.
    pub fn vocab_from<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Vec<String> {
        let mut vocab = vec![UNK.to_string()];
        let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
        for d in docs {
            for w in &d.words {
                if seen.insert(w) {
                    vocab.push(w.clone());
                }
            }
        }
        vocab
    }

    pub fn new(
        vocab: Vec<String>,
        d_f: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if vocab.first().map(String::as_str) != Some(UNK) {
            return Err(Error::config("lookup vocabulary must start with the unknown entry"));
        }
        let data = (0..vocab.len() * d_f).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let table = store.add("embed.lookup", Tensor::new(vec![vocab.len(), d_f], data)?)?;
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(LookupEmbedder {
            vocab,
            index,
            table,
            d_f,
        })
    }

    pub fn ids(&self, words: &[String]) -> Vec<usize> {
        words.iter().map(|w| self.index.get(w).copied().unwrap_or(0)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Precomputed,
    HashRandom,
    TrainableLookup,
}

#[derive(Clone, Debug)]
pub enum EmbeddingProvider {
    Precomputed(EmbeddingStore),
    Hash(HashEmbedder),
    Lookup(LookupEmbedder),
}

impl EmbeddingProvider {
    pub fn kind(&self) -> ProviderKind {
        match self {
            EmbeddingProvider::Precomputed(_) => ProviderKind::Precomputed,
            EmbeddingProvider::Hash(_) => ProviderKind::HashRandom,
            EmbeddingProvider::Lookup(_) => ProviderKind::TrainableLookup,
        }
    }

    pub fn d_f(&self) -> usize {
        match self {
            EmbeddingProvider::Precomputed(s) => s.d_f(),
            EmbeddingProvider::Hash(h) => h.d_f,
            EmbeddingProvider::Lookup(l) => l.d_f,
        }
    }

    /// Errors when the provider dimension differs from the configured one.
    pub fn check_dim(&self, d_f: usize) -> Result<()> {
        if self.d_f() != d_f {
            return Err(Error::config(format!(
                "embedding provider has dimension {}, configuration expects {d_f}",
                self.d_f()
            )));
        }
        Ok(())
    }

    /// Frozen word rows (`|words| × d_f`). For the lookup provider these
    /// are the current table values.
    pub fn word_rows(&self, doc: &Document, store: &ParamStore) -> Result<Tensor> {
        match self {
            EmbeddingProvider::Precomputed(s) => s.rows(&doc.id, doc.words.len()),
            EmbeddingProvider::Hash(h) => Ok(h.rows(&doc.words)),
            EmbeddingProvider::Lookup(l) => {
                let table = store.value(l.table);
                let data = l.ids(&doc.words).into_iter().flat_map(|i| table.lane(i).to_vec()).collect();
                Tensor::new(vec![doc.words.len(), l.d_f], data)
            }
        }
    }
}

/// Serializable description of a provider.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProviderSpec {
    Precomputed { path: std::path::PathBuf, d_f: usize },
    HashRandom { seed: u64, d_f: usize },
    /// `vocab` is filled from the training split when empty.
    TrainableLookup {
        d_f: usize,
        #[serde(default)]
        vocab: Vec<String>,
    },
}

impl ProviderSpec {
    pub fn d_f(&self) -> usize {
        match self {
            ProviderSpec::Precomputed { d_f, .. }
            | ProviderSpec::HashRandom { d_f, .. }
            | ProviderSpec::TrainableLookup { d_f, .. } => *d_f,
        }
    }

    /// Instantiates the provider, registering parameters in `store` for
    /// the lookup kind.
    pub fn build(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<EmbeddingProvider> {
        let provider = match self {
            ProviderSpec::Precomputed { path, .. } => EmbeddingProvider::Precomputed(load_precomputed(path)?),
            ProviderSpec::HashRandom { seed, d_f } => EmbeddingProvider::Hash(HashEmbedder::new(*seed, *d_f)?),
            ProviderSpec::TrainableLookup { d_f, vocab } => {
                EmbeddingProvider::Lookup(LookupEmbedder::new(vocab.clone(), *d_f, store, rng)?)
            }
        };
        provider.check_dim(self.d_f())?;
        Ok(provider)
    }
}

/// Provider plus the learned root row.
#[derive(Clone, Debug)]
pub struct Embedder {
    pub provider: EmbeddingProvider,
    pub root: ParamId,
}

impl Embedder {
    pub fn new(provider: EmbeddingProvider, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Self> {
        let d = provider.d_f();
        let root = store.xavier("embed.root", &[1, d], 1, d, rng)?;
        Ok(Embedder { provider, root })
    }

    pub fn d_f(&self) -> usize {
        self.provider.d_f()
    }

    /// Features for root plus words, `(|words| + 1) × d_f`. Frozen rows
    /// enter the graph as constants; `cached` may supply them.
    pub fn embed(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        doc: &Document,
        cached: Option<&Tensor>,
    ) -> Result<Var> {
        let root = g.param(store, self.root);
        let words = match &self.provider {
            EmbeddingProvider::Lookup(l) => {
                let table = g.param(store, l.table);
                g.select_rows(table, &l.ids(&doc.words))?
            }
            _ => {
                let rows = match cached {
                    Some(t) => t.clone(),
                    None => self.provider.word_rows(doc, store)?,
                };
                g.constant(rows)
            }
        };
        g.concat_rows(&[root, words])
    }
}
