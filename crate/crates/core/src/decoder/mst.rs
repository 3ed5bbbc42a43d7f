use crate::error::{Error, Result};

use super::is_valid_tree;

const NEG: f64 = f64::NEG_INFINITY;

/// Sum of `energy[i][heads[i]]` over non-root nodes, in node order.
pub fn tree_energy(energy: &[Vec<f64>], heads: &[usize]) -> f64 {
    (1..heads.len()).map(|i| energy[i][heads[i]]).sum()
}

/// Best arborescence rooted at node 0 by Chu-Liu/Edmonds. With
/// `single_root`, one run per candidate root child keeps the best.
/// Infinite-negative entries are treated as missing edges.
pub fn max_arborescence(energy: &[Vec<f64>], single_root: bool) -> Result<(Vec<usize>, f64)> {
    let n = energy.len();
    if n < 2 || energy.iter().any(|r| r.len() != n) {
        return Err(Error::usage("energy matrix must be square with at least 2 nodes"));
    }
    if !single_root {
        let heads = chu_liu_edmonds(energy)
            .ok_or_else(|| Error::Decode("some node has no finite-energy head".into()))?;
        let total = tree_energy(energy, &heads);
        return Ok((heads, total));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for child in 1..n {
        if energy[child][0] == NEG {
            continue;
        }
        let mut masked = energy.to_vec();
        for (v, row) in masked.iter_mut().enumerate().skip(1) {
            if v != child {
                row[0] = NEG;
            }
        }
        if let Some(heads) = chu_liu_edmonds(&masked) {
            let total = tree_energy(energy, &heads);
            if best.as_ref().is_none_or(|(_, b)| total > *b) {
                best = Some((heads, total));
            }
        }
    }
    best.ok_or_else(|| Error::Decode("no single-rooted arborescence has finite energy".into()))
}

fn best_head(row: &[f64], v: usize) -> Option<usize> {
    let mut best = None;
    for (u, &s) in row.iter().enumerate() {
        if u != v && s > NEG && best.is_none_or(|b: usize| s > row[b]) {
            best = Some(u);
        }
    }
    best
}

fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let n = heads.len();
    let mut color = vec![0usize; n];
    color[0] = usize::MAX;
    for start in 1..n {
        let mut v = start;
        while color[v] == 0 {
            color[v] = start;
            v = heads[v];
        }
        if color[v] == start {
            let mut cycle = vec![v];
            let mut u = heads[v];
            while u != v {
                cycle.push(u);
                u = heads[u];
            }
            return Some(cycle);
        }
    }
    None
}

fn chu_liu_edmonds(score: &[Vec<f64>]) -> Option<Vec<usize>> {
    let n = score.len();
    let mut heads = vec![0; n];
    for v in 1..n {
        heads[v] = best_head(&score[v], v)?;
    }
    let Some(cycle) = find_cycle(&heads) else {
        return Some(heads);
    };

    let mut in_cycle = vec![false; n];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    // Node 0 is never on a cycle, so it keeps index 0 after contraction.
    let outside: Vec<usize> = (0..n).filter(|&v| !in_cycle[v]).collect();
    let c = outside.len();
    let m = c + 1;
    let mut sub = vec![vec![NEG; m]; m];
    let mut enter_from = vec![0usize; m];
    let mut leave_via = vec![0usize; m];
    for (a, &v) in outside.iter().enumerate() {
        for (b, &u) in outside.iter().enumerate() {
            if a != b {
                sub[a][b] = score[v][u];
            }
        }
        // Edge from the cycle to an outside dependent.
        let mut best = NEG;
        for &u in &cycle {
            if score[v][u] > best {
                best = score[v][u];
                leave_via[a] = u;
            }
        }
        sub[a][c] = best;
        // Edge from an outside head into the cycle.
        let mut best = NEG;
        for &w in &cycle {
            let s = score[w][v] - score[w][heads[w]];
            if s > best {
                best = s;
                enter_from[a] = w;
            }
        }
        sub[c][a] = best;
    }
    let sub_heads = chu_liu_edmonds(&sub)?;

    let mut result = heads.clone();
    for (a, &v) in outside.iter().enumerate().skip(1) {
        result[v] = if sub_heads[a] == c {
            leave_via[a]
        } else {
            outside[sub_heads[a]]
        };
    }
    let entry = sub_heads[c];
    result[enter_from[entry]] = outside[entry];
    Some(result)
}

/// Exhaustive search over head assignments in lexicographic order; the
/// first maximum wins. Limited to 8 nodes.
pub fn brute_force_arborescence(energy: &[Vec<f64>], single_root: bool) -> Result<(Vec<usize>, f64)> {
    let n = energy.len();
    if n > 8 {
        return Err(Error::Size(format!("brute force limited to 8 nodes, got {n}")));
    }
    if n < 2 || energy.iter().any(|r| r.len() != n) {
        return Err(Error::usage("energy matrix must be square with at least 2 nodes"));
    }
    let mut heads = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let finite = (1..n).all(|i| heads[i] != i && energy[i][heads[i]] > NEG);
        if finite && is_valid_tree(&heads, single_root) {
            let total = tree_energy(energy, &heads);
            if best.as_ref().is_none_or(|(_, b)| total > *b) {
                best = Some((heads.clone(), total));
            }
        }
        // Odometer increment over positions 1..n, last position fastest.
        let mut pos = n - 1;
        loop {
            heads[pos] += 1;
            if heads[pos] < n {
                break;
            }
            heads[pos] = 0;
            if pos == 1 {
                return best.ok_or_else(|| Error::Decode("no arborescence with finite energy".into()));
            }
            pos -= 1;
        }
    }
}
