//! The full parser: embeddings, tagger, scorer and decoding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{DatasetSpec, Document, EncodedGraph};
use crate::decoder::{self, extract_triples, DecodeMode, ParseResult, DEFAULT_SCALE};
use crate::embeddings::{Embedder, ProviderSpec};
use crate::error::{Error, Result};
use crate::evaluation::TripleSet;
use crate::numerics::checkpoint::Checkpoint;
use crate::numerics::{Graph, ParamStore, Tensor, Var};
use crate::scorer::{ScoreVars, Scorer, ScorerConfig};
use crate::tagger::{Tagger, TaggerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dataset: DatasetSpec,
    pub embeddings: ProviderSpec,
    /// Tagger BiLSTM hidden size per direction.
    pub d_h: usize,
    pub d_tag: usize,
    pub l_psi: usize,
    pub l_phi: usize,
    /// Scorer BiLSTM hidden size per direction.
    pub d_lstm: usize,
    pub d_edge: usize,
    pub d_rel: usize,
    pub top_k: usize,
    /// Decoding override; by default tree-structured datasets use MST.
    #[serde(default)]
    pub decode: Option<DecodeMode>,
    /// Seed for parameter initialization.
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn tagger(&self) -> TaggerConfig {
        TaggerConfig {
            d_f: self.embeddings.d_f(),
            d_h: self.d_h,
            n_tags: self.dataset.tag_vocab().len(),
            d_tag: self.d_tag,
        }
    }

    pub fn scorer(&self) -> ScorerConfig {
        ScorerConfig {
            l_psi: self.l_psi,
            l_phi: self.l_phi,
            d_in: self.d_tag + self.embeddings.d_f(),
            d_lstm: self.d_lstm,
            d_edge: self.d_edge,
            d_rel: self.d_rel,
            top_k: self.top_k,
            n_rel: self.dataset.relation_vocab().len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.tagger().validate()?;
        self.scorer().validate()
    }
}

/// Graph handles produced by one forward pass.
pub struct Forward {
    /// Tag scores; absent when gold tags are used.
    pub tag_logits: Option<Var>,
    /// Tags fed to the scorer, root first.
    pub tags: Vec<usize>,
    pub scores: ScoreVars,
}

/// Decoded output for one document.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub parse: ParseResult,
    pub tags: Vec<usize>,
    pub triples: TripleSet,
}

#[derive(Clone, Debug)]
pub struct ParserModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub embedder: Embedder,
    pub tagger: Tagger,
    pub scorer: Scorer,
}

impl ParserModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut store = ParamStore::new();
        let provider = config.embeddings.build(&mut store, &mut rng)?;
        let embedder = Embedder::new(provider, &mut store, &mut rng)?;
        let tagger = Tagger::new(config.tagger(), &mut store, &mut rng)?;
        let scorer = Scorer::new(config.scorer(), &mut store, &mut rng)?;
        Ok(ParserModel {
            config,
            store,
            embedder,
            tagger,
            scorer,
        })
    }

    pub fn oracle_tags(&self) -> bool {
        self.config.dataset.oracle_tags
    }

    /// Frozen word features for `doc`, for callers that cache them.
    pub fn word_features(&self, doc: &Document) -> Result<Tensor> {
        self.embedder.provider.word_rows(doc, &self.store)
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        doc: &Document,
        graph: &EncodedGraph,
        cached: Option<&Tensor>,
    ) -> Result<Forward> {
        let x = self.embedder.embed(g, &self.store, doc, cached)?;
        let (tag_logits, tags) = if self.oracle_tags() {
            (None, graph.gold_tags.clone())
        } else {
            let out = self.tagger.forward(g, &self.store, x)?;
            let tags = g.value(out.logits).argmax_last();
            (Some(out.logits), tags)
        };
        let e_tag = self.tagger.tag_embed(g, &self.store, &tags)?;
        let features = g.concat_cols(&[e_tag, x])?;
        let scores = self.scorer.forward(g, &self.store, features)?;
        Ok(Forward {
            tag_logits,
            tags,
            scores,
        })
    }

    pub fn decode_mode(&self) -> DecodeMode {
        self.config.decode.unwrap_or(if self.config.dataset.tree_structured {
            DecodeMode::Mst
        } else {
            DecodeMode::Greedy
        })
    }

    pub fn predict(&self, doc: &Document, graph: &EncodedGraph, cached: Option<&Tensor>) -> Result<Prediction> {
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, doc, graph, cached)?;
        self.decode(&g, &fwd, graph)
    }

    /// Decodes the scores of a finished forward pass.
    pub fn decode(&self, g: &Graph, fwd: &Forward, graph: &EncodedGraph) -> Result<Prediction> {
        let sp = fwd.scores.values(g);
        let parse = match self.decode_mode() {
            DecodeMode::Greedy => decoder::greedy_decode(&sp)?,
            DecodeMode::Mst => decoder::mst_decode_with(&sp, self.config.dataset.tree_structured, DEFAULT_SCALE)?,
        };
        let triples = extract_triples(&parse, graph, &self.config.dataset, &fwd.tags);
        Ok(Prediction {
            parse,
            tags: fwd.tags.clone(),
            triples,
        })
    }

    pub fn config_value(&self) -> Result<Value> {
        Ok(serde_json::to_value(&self.config)?)
    }

    pub fn checkpoint(&self, meta: Value) -> Result<Checkpoint> {
        Ok(Checkpoint::new(self.config_value()?, &self.store, meta))
    }

    /// Rebuilds a model from a checkpoint written by [`Self::checkpoint`].
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::config(format!("checkpoint configuration: {e}")))?;
        let mut model = ParserModel::new(config)?;
        ck.restore_into(&model.config_value()?, &mut model.store)?;
        Ok(model)
    }
}
