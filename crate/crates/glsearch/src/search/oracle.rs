//! Brute-force reference for the connected induced MCS size.
//!
//! Written independently of the bidomain machinery: enumerates connected
//! node subsets of the first graph directly and tests for a label- and
//! edge-preserving injection into the second by plain backtracking.

use crate::graph::Graph;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle cap exceeded: needs |V1| <= 8 and |V2| <= 10, got {0} and {1}")]
    TooLarge(usize, usize),
}

fn subset_connected(g: &Graph, mask: u32) -> bool {
    let first = mask.trailing_zeros();
    let mut reached = 1u32 << first;
    let mut frontier = reached;
    while frontier != 0 {
        let mut next = 0u32;
        let mut f = frontier;
        while f != 0 {
            let u = f.trailing_zeros();
            f &= f - 1;
            for &v in g.neighbors(u) {
                let bit = 1u32 << v;
                if mask & bit != 0 && reached & bit == 0 {
                    next |= bit;
                }
            }
        }
        reached |= next;
        frontier = next;
    }
    reached == mask
}

fn embeds(g1: &Graph, nodes: &[u32], g2: &Graph, assigned: &mut Vec<u32>, used: &mut [bool]) -> bool {
    if assigned.len() == nodes.len() {
        return true;
    }
    let u = nodes[assigned.len()];
    for v in 0..g2.node_count() as u32 {
        if used[v as usize] || g1.label(u) != g2.label(v) {
            continue;
        }
        let ok = nodes
            .iter()
            .zip(assigned.iter())
            .all(|(&u2, &v2)| g1.has_edge(u, u2) == g2.has_edge(v, v2));
        if ok {
            used[v as usize] = true;
            assigned.push(v);
            if embeds(g1, nodes, g2, assigned, used) {
                return true;
            }
            assigned.pop();
            used[v as usize] = false;
        }
    }
    false
}

/// Exact connected induced MCS size by exhaustive enumeration.
pub fn mcs_oracle(g1: &Graph, g2: &Graph) -> Result<usize, OracleError> {
    if g1.node_count() > 8 || g2.node_count() > 10 {
        return Err(OracleError::TooLarge(g1.node_count(), g2.node_count()));
    }
    let n1 = g1.node_count();
    let max_size = n1.min(g2.node_count());
    let mut best = 0usize;
    for mask in 1u32..1 << n1 {
        let size = mask.count_ones() as usize;
        if size <= best || size > max_size {
            continue;
        }
        if !subset_connected(g1, mask) {
            continue;
        }
        let nodes: Vec<u32> = (0..n1 as u32).filter(|&u| mask >> u & 1 == 1).collect();
        let mut assigned = Vec::with_capacity(size);
        let mut used = vec![false; g2.node_count()];
        if embeds(g1, &nodes, g2, &mut assigned, &mut used) {
            best = size;
        }
    }
    Ok(best)
}
