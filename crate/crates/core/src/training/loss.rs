use serde::Serialize;

use crate::data::EncodedGraph;
use crate::decoder::ScorePack;
use crate::error::Result;
use crate::numerics::{Graph, Tensor, Var};
use crate::scorer::ScoreVars;

/// Loss components as graph nodes.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub tag: Var,
    pub edge: Var,
    pub rel: Var,
    /// Sum of the per-layer auxiliary edge losses.
    pub aux: Var,
    pub total: Var,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossValues {
    pub tag: f64,
    pub edge: f64,
    pub rel: f64,
    pub aux: f64,
    pub total: f64,
}

impl LossVars {
    pub fn values(&self, g: &Graph) -> LossValues {
        LossValues {
            tag: g.value(self.tag).item(),
            edge: g.value(self.edge).item(),
            rel: g.value(self.rel).item(),
            aux: g.value(self.aux).item(),
            total: g.value(self.total).item(),
        }
    }
}

impl LossValues {
    pub fn add_scaled(&mut self, other: &LossValues, c: f64) {
        self.tag += c * other.tag;
        self.edge += c * other.edge;
        self.rel += c * other.rel;
        self.aux += c * other.aux;
        self.total += c * other.total;
    }
}

/// Negative log-likelihood of the gold head of every non-root node.
fn head_nll(g: &mut Graph, scores: Var, graph: &EncodedGraph, words: &[usize]) -> Result<Var> {
    let rows = g.select_rows(scores, words)?;
    let lp = g.log_softmax(rows);
    let gold: Vec<usize> = words.iter().map(|&i| graph.gold_heads[i]).collect();
    let picked = g.pick(lp, &gold)?;
    let s = g.sum(picked);
    Ok(g.scale(s, -1.0))
}

/// Joint loss `λ1·L_tag + λ2·(L_edge + L_rel + Σ aux)`. Without tag scores
/// the tag term is zero.
pub fn compute_loss(
    g: &mut Graph,
    scores: &ScoreVars,
    tag_logits: Option<Var>,
    graph: &EncodedGraph,
    lambda1: f64,
    lambda2: f64,
) -> Result<LossVars> {
    let n = graph.node_count();
    let words: Vec<usize> = (1..n).collect();

    let tag = match tag_logits {
        Some(logits) => {
            let rows = g.select_rows(logits, &words)?;
            let lp = g.log_softmax(rows);
            let gold: Vec<usize> = words.iter().map(|&i| graph.gold_tags[i]).collect();
            let picked = g.pick(lp, &gold)?;
            let m = g.mean(picked);
            g.scale(m, -1.0)
        }
        None => g.constant(Tensor::vector(vec![0.0])),
    };

    let edge = head_nll(g, scores.s_edge, graph, &words)?;

    let pairs: Vec<(usize, usize)> = words.iter().map(|&i| (i, graph.gold_heads[i])).collect();
    let rel_rows = g.gather_pairs(scores.s_rel, &pairs)?;
    let lp = g.log_softmax(rel_rows);
    let gold: Vec<usize> = words.iter().map(|&i| graph.gold_relations[i]).collect();
    let picked = g.pick(lp, &gold)?;
    let s = g.sum(picked);
    let rel = g.scale(s, -1.0);

    let mut aux = g.constant(Tensor::vector(vec![0.0]));
    for &a in &scores.aux_edge {
        let term = head_nll(g, a, graph, &words)?;
        aux = g.add(aux, term)?;
    }

    let parse = g.add(edge, rel)?;
    let parse = g.add(parse, aux)?;
    let parse = g.scale(parse, lambda2);
    let weighted_tag = g.scale(tag, lambda1);
    let total = g.add(weighted_tag, parse)?;
    Ok(LossVars {
        tag,
        edge,
        rel,
        aux,
        total,
    })
}

/// Loss of fixed score values.
pub fn loss_of_scores(
    sp: &ScorePack,
    tag_logits: Option<&Tensor>,
    graph: &EncodedGraph,
    lambda1: f64,
    lambda2: f64,
) -> Result<LossValues> {
    let mut g = Graph::new();
    let vars = ScoreVars {
        s_edge: g.constant(sp.s_edge.clone()),
        s_rel: g.constant(sp.s_rel.clone()),
        aux_edge: sp.aux_edge.iter().map(|t| g.constant(t.clone())).collect(),
    };
    let tags = tag_logits.map(|t| g.constant(t.clone()));
    Ok(compute_loss(&mut g, &vars, tags, graph, lambda1, lambda2)?.values(&g))
}
