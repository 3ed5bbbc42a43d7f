//! Biaffine edge and relation scoring with optional graph-attention
//! refinement of the edge projections.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::ScorePack;
use crate::error::{Error, Result};
use crate::numerics::layers::{Mlp, StackedBiLstm};
use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

const LEAKY_SLOPE: f64 = 0.2;
const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerConfig {
    /// BiLSTM layers before the projections.
    pub l_psi: usize,
    /// Graph-attention layers over the edge projections.
    pub l_phi: usize,
    /// Input width (tag features plus word features).
    pub d_in: usize,
    /// BiLSTM hidden size per direction.
    pub d_lstm: usize,
    pub d_edge: usize,
    pub d_rel: usize,
    pub top_k: usize,
    /// Relation labels including `none`.
    pub n_rel: usize,
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_psi > 3 || self.l_phi > 3 {
            return Err(Error::config(format!(
                "l_psi and l_phi must be in 0..=3, got {} and {}",
                self.l_psi, self.l_phi
            )));
        }
        if [self.d_in, self.d_lstm, self.d_edge, self.d_rel, self.top_k, self.n_rel].contains(&0) {
            return Err(Error::config(format!("scorer dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Weight and bias of one biaffine scorer.
#[derive(Clone, Debug)]
pub struct Biaffine {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Biaffine {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, m: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Biaffine {
            weight: store.xavier(format!("{name}.weight"), &[d, m, d], d, d, rng)?,
            bias: store.zeros(format!("{name}.bias"), &[d, m])?,
        })
    }

    /// Scores `[n_dep, n_head, m]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, head: Var, dep: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.biaffine(head, dep, w, b)
    }
}

/// Single-head attention over a sparse neighborhood, followed by a
/// residual connection and layer normalization.
#[derive(Clone, Debug)]
pub struct GatLayer {
    pub query: ParamId,
    pub key: ParamId,
    pub att: ParamId,
}

impl GatLayer {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(GatLayer {
            query: store.xavier(format!("{name}.query"), &[d, d], d, d, rng)?,
            key: store.xavier(format!("{name}.key"), &[d, d], d, d, rng)?,
            att: store.xavier(format!("{name}.att"), &[d], d, 1, rng)?,
        })
    }

    /// Attention weights `|V| × |V|` (zero outside each neighborhood) and
    /// the refined features.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        e: Var,
        neighbors: &[Vec<usize>],
    ) -> Result<(Var, Var)> {
        let n = g.shape(e)[0];
        if neighbors.len() != n || neighbors.iter().any(Vec::is_empty) {
            return Err(Error::Numeric("graph attention needs a non-empty neighborhood per node".into()));
        }
        let wq = g.param(store, self.query);
        let wk = g.param(store, self.key);
        let a = g.param(store, self.att);
        let p = g.matmul(e, wq)?;
        let q = g.matmul(e, wk)?;
        let logits = g.pair_attention(p, q, a, LEAKY_SLOPE)?;
        let mut mask = vec![true; n * n];
        for (i, ns) in neighbors.iter().enumerate() {
            for &j in ns {
                mask[i * n + j] = false;
            }
        }
        let logits = g.masked_fill(logits, &mask, f64::NEG_INFINITY)?;
        let alpha = g.softmax(logits);
        let message = g.matmul(alpha, q)?;
        let message = g.elu(message);
        let out = g.add(e, message)?;
        Ok((alpha, g.layer_norm(out, NORM_EPS)))
    }
}

/// Per-row candidate heads with the `k` highest scores, ties to the lower
/// column. The diagonal is never kept; the root row keeps only itself.
pub fn topk_sparsify(scores: &Tensor, k: usize) -> Vec<Vec<usize>> {
    let n = scores.rows();
    let mut out = Vec::with_capacity(n);
    out.push(vec![0]);
    for i in 1..n {
        let row = scores.lane(i);
        let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        cand.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        cand.truncate(k.max(1));
        cand.sort_unstable();
        out.push(cand);
    }
    out
}

/// Graph handles of the score tensors.
#[derive(Clone, Debug)]
pub struct ScoreVars {
    pub s_edge: Var,
    pub s_rel: Var,
    pub aux_edge: Vec<Var>,
}

impl ScoreVars {
    pub fn values(&self, g: &Graph) -> ScorePack {
        ScorePack {
            s_edge: g.value(self.s_edge).clone(),
            s_rel: g.value(self.s_rel).clone(),
            aux_edge: self.aux_edge.iter().map(|&v| g.value(v).clone()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scorer {
    pub config: ScorerConfig,
    pub psi: StackedBiLstm,
    pub edge_head: Mlp,
    pub edge_dep: Mlp,
    pub rel_head: Mlp,
    pub rel_dep: Mlp,
    pub edge: Biaffine,
    pub rel: Biaffine,
    pub aux: Vec<Biaffine>,
    pub gat_head: Vec<GatLayer>,
    pub gat_dep: Vec<GatLayer>,
}

impl Scorer {
    pub fn new(config: ScorerConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let c = config;
        let psi = StackedBiLstm::new(store, "scorer.psi", c.l_psi, c.d_in, c.d_lstm, rng)?;
        let d = psi.d_out(c.d_in);
        let mut aux = Vec::new();
        let mut gat_head = Vec::new();
        let mut gat_dep = Vec::new();
        for l in 0..c.l_phi {
            aux.push(Biaffine::new(store, &format!("scorer.aux.{l}"), c.d_edge, 1, rng)?);
            gat_head.push(GatLayer::new(store, &format!("scorer.gat_head.{l}"), c.d_edge, rng)?);
            gat_dep.push(GatLayer::new(store, &format!("scorer.gat_dep.{l}"), c.d_edge, rng)?);
        }
        Ok(Scorer {
            config,
            edge_head: Mlp::new(store, "scorer.edge_head", d, c.d_edge, c.d_edge, rng)?,
            edge_dep: Mlp::new(store, "scorer.edge_dep", d, c.d_edge, c.d_edge, rng)?,
            rel_head: Mlp::new(store, "scorer.rel_head", d, c.d_rel, c.d_rel, rng)?,
            rel_dep: Mlp::new(store, "scorer.rel_dep", d, c.d_rel, c.d_rel, rng)?,
            edge: Biaffine::new(store, "scorer.edge", c.d_edge, 1, rng)?,
            rel: Biaffine::new(store, "scorer.rel", c.d_rel, c.n_rel, rng)?,
            psi,
            aux,
            gat_head,
            gat_dep,
        })
    }

    fn edge_scores(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        biaffine: &Biaffine,
        head: Var,
        dep: Var,
    ) -> Result<Var> {
        let n = g.shape(head)[0];
        let s = biaffine.forward(g, store, head, dep)?;
        let s = g.reshape(s, &[n, n])?;
        let diag: Vec<bool> = (0..n * n).map(|p| p / n == p % n).collect();
        g.masked_fill(s, &diag, f64::NEG_INFINITY)
    }

    /// Scores from `|V| × d_in` node features (root row first).
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, features: Var) -> Result<ScoreVars> {
        let shape = g.shape(features).to_vec();
        if shape.len() != 2 || shape[1] != self.config.d_in {
            return Err(Error::Dimension {
                op: "scorer_forward",
                lhs: shape,
                rhs: vec![self.config.d_in],
            });
        }
        if shape[0] < 2 {
            return Err(Error::usage("scoring needs at least one non-root word"));
        }
        let h = self.psi.run(g, store, features)?;
        let mut eh = self.edge_head.forward(g, store, h)?;
        let mut ed = self.edge_dep.forward(g, store, h)?;
        let rh = self.rel_head.forward(g, store, h)?;
        let rd = self.rel_dep.forward(g, store, h)?;
        let mut aux_edge = Vec::with_capacity(self.aux.len());
        for l in 0..self.aux.len() {
            let s = self.edge_scores(g, store, &self.aux[l], eh, ed)?;
            let neighbors = topk_sparsify(g.value(s), self.config.top_k);
            aux_edge.push(s);
            eh = self.gat_head[l].forward(g, store, eh, &neighbors)?.1;
            ed = self.gat_dep[l].forward(g, store, ed, &neighbors)?.1;
        }
        let s_edge = self.edge_scores(g, store, &self.edge, eh, ed)?;
        let s_rel = self.rel.forward(g, store, rh, rd)?;
        Ok(ScoreVars {
            s_edge,
            s_rel,
            aux_edge,
        })
    }
}
