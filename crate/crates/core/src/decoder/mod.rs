//! Head and relation decoding from score tensors.

mod extract;
mod mst;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSpec, EncodedGraph};
use crate::error::{Error, Result};
use crate::numerics::{argmax, Tensor};

pub use extract::{bio_chunk, extract_triples, PredictionRecord};
pub use mst::{brute_force_arborescence, max_arborescence, tree_energy};

/// Default sharpening applied to scores before building the energy matrix.
pub const DEFAULT_SCALE: f64 = 10.0;

/// Plain-valued scorer output. `s_edge[i][j]` scores node `j` heading node
/// `i`; `s_rel` has shape `[n, n, R]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorePack {
    pub s_edge: Tensor,
    pub s_rel: Tensor,
    pub aux_edge: Vec<Tensor>,
}

impl ScorePack {
    pub fn node_count(&self) -> usize {
        self.s_edge.rows()
    }

    pub fn relation_count(&self) -> usize {
        self.s_rel.last_dim()
    }

    /// Scores that put all mass on the gold structure of `graph`.
    pub fn from_gold(graph: &EncodedGraph, n_relations: usize) -> Self {
        let n = graph.node_count();
        let mut s_edge = Tensor::zeros(&[n, n]);
        let mut s_rel = Tensor::zeros(&[n, n, n_relations]);
        for i in 0..n {
            s_edge.set(i, i, f64::NEG_INFINITY);
            if i > 0 {
                let h = graph.gold_heads[i];
                s_edge.set(i, h, 1.0);
                s_rel.data_mut()[(i * n + h) * n_relations + graph.gold_relations[i]] = 1.0;
            }
        }
        ScorePack {
            s_edge,
            s_rel,
            aux_edge: Vec::new(),
        }
    }

    fn check(&self) -> Result<usize> {
        let n = self.node_count();
        if self.s_edge.shape() != [n, n] || self.s_rel.shape().len() != 3 || self.s_rel.shape()[..2] != [n, n] {
            return Err(Error::Dimension {
                op: "score_pack",
                lhs: self.s_edge.shape().to_vec(),
                rhs: self.s_rel.shape().to_vec(),
            });
        }
        if n < 2 {
            return Err(Error::usage("decoding needs at least one non-root node"));
        }
        Ok(n)
    }

    fn best_relation(&self, i: usize, j: usize) -> usize {
        let n = self.node_count();
        let r = self.relation_count();
        argmax(&self.s_rel.data()[(i * n + j) * r..(i * n + j + 1) * r])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Greedy,
    Mst,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseResult {
    /// Head per node; entry 0 is unused.
    pub heads: Vec<usize>,
    pub relations: Vec<usize>,
    pub mode: DecodeMode,
    pub valid_tree: bool,
}

/// Per-row argmax of the edge scores, then the best relation for the chosen
/// head. The result may contain cycles.
pub fn greedy_decode(sp: &ScorePack) -> Result<ParseResult> {
    let n = sp.check()?;
    let mut heads = vec![0; n];
    let mut relations = vec![0; n];
    for i in 1..n {
        heads[i] = argmax(sp.s_edge.lane(i));
        relations[i] = sp.best_relation(i, heads[i]);
    }
    Ok(ParseResult {
        valid_tree: is_valid_tree(&heads, false),
        heads,
        relations,
        mode: DecodeMode::Greedy,
    })
}

fn log_softmax_scaled(lane: &[f64], scale: f64) -> Vec<f64> {
    let max = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![f64::NEG_INFINITY; lane.len()];
    }
    let shifted: Vec<f64> = lane.iter().map(|&v| scale * (v - max)).collect();
    let lse = shifted.iter().map(|v| v.exp()).sum::<f64>().ln();
    shifted.iter().map(|v| v - lse).collect()
}

/// `energy[i][j]` combines the normalized edge score of `j` heading `i` with
/// the best normalized relation score of that pair.
pub fn build_energy(sp: &ScorePack, scale: f64) -> Result<Vec<Vec<f64>>> {
    let n = sp.check()?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::usage(format!("energy scale must be positive, got {scale}")));
    }
    let r = sp.relation_count();
    let mut energy = Vec::with_capacity(n);
    for i in 0..n {
        let edge = log_softmax_scaled(sp.s_edge.lane(i), scale);
        let row = (0..n)
            .map(|j| {
                if i == j {
                    return f64::NEG_INFINITY;
                }
                let start = (i * n + j) * r;
                let rel = log_softmax_scaled(&sp.s_rel.data()[start..start + r], scale);
                edge[j] + rel.into_iter().fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        energy.push(row);
    }
    Ok(energy)
}

/// Maximum spanning arborescence over the energy matrix. Tree-structured
/// datasets additionally get a single root child.
pub fn mst_decode(sp: &ScorePack, spec: &DatasetSpec) -> Result<ParseResult> {
    mst_decode_with(sp, spec.tree_structured, DEFAULT_SCALE)
}

pub fn mst_decode_with(sp: &ScorePack, single_root: bool, scale: f64) -> Result<ParseResult> {
    let energy = build_energy(sp, scale)?;
    let (heads, _) = max_arborescence(&energy, single_root)?;
    let relations = (0..heads.len())
        .map(|i| if i == 0 { 0 } else { sp.best_relation(i, heads[i]) })
        .collect();
    Ok(ParseResult {
        valid_tree: true,
        heads,
        relations,
        mode: DecodeMode::Mst,
    })
}

/// Decodes with MST for tree-structured datasets and greedily otherwise.
pub fn decode(sp: &ScorePack, spec: &DatasetSpec) -> Result<ParseResult> {
    if spec.tree_structured {
        mst_decode(sp, spec)
    } else {
        greedy_decode(sp)
    }
}

/// True when every non-root node reaches node 0 without a cycle; with
/// `single_root`, node 0 must also have exactly one child.
pub fn is_valid_tree(heads: &[usize], single_root: bool) -> bool {
    let n = heads.len();
    if n <= 1 {
        return true;
    }
    if heads[1..].iter().enumerate().any(|(i, &h)| h >= n || h == i + 1) {
        return false;
    }
    // 0 = unvisited, 1 = on current path, 2 = reaches root.
    let mut state = vec![0u8; n];
    state[0] = 2;
    for start in 1..n {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v];
        }
        if state[v] == 1 {
            return false;
        }
        for p in path {
            state[p] = 2;
        }
    }
    !single_root || heads[1..].iter().filter(|&&h| h == 0).count() == 1
}

#[cfg(test)]
mod tests;
