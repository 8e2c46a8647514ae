//! Seeded synthetic graph generators and connected-subgraph sampling.
//!
//! All generators are deterministic for a fixed seed: they draw from a
//! ChaCha stream seeded explicitly, never from thread-local state.

use super::{Graph, GraphError};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a clique on `edges_per_node` nodes; every later node attaches
/// to `edges_per_node` distinct existing nodes sampled proportionally to
/// degree, so the result is always connected with
/// `C(m,2) + m*(n-m)` edges.
pub fn generate_ba(n: usize, edges_per_node: usize, seed: u64) -> Result<Graph, GraphError> {
    let m = edges_per_node;
    if m < 1 || n <= m {
        return Err(GraphError::Argument(format!(
            "BA requires n > edges_per_node >= 1, got n={n}, m={m}"
        )));
    }
    let mut rng = rng_for(seed);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    // Flat endpoint list; sampling an index uniformly is degree-proportional.
    let mut endpoints: Vec<u32> = Vec::new();
    for u in 0..m as u32 {
        for v in (u + 1)..m as u32 {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    if m == 1 {
        // Degenerate seed clique has no edges; attach by uniform choice.
        endpoints.push(0);
    }
    for u in m as u32..n as u32 {
        let mut chosen: Vec<u32> = Vec::with_capacity(m);
        while chosen.len() < m {
            let v = endpoints[rng.gen_range(0..endpoints.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for &v in &chosen {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    Ok(Graph::from_edges(n, &edges).with_name(format!("ba_n{n}_m{m}_s{seed}")))
}

/// Erdős–Rényi G(n, p): each of the C(n,2) edges appears independently.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    if n < 1 {
        return Err(GraphError::Argument("ER requires n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::Argument(format!("ER probability must be in [0,1], got {p}")));
    }
    let mut rng = rng_for(seed);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::from_edges(n, &edges).with_name(format!("er_n{n}_p{p}_s{seed}")))
}

/// Watts–Strogatz small world.
///
/// `ring_density` counts ring neighbors in total (`ring_density/2` on each
/// side), so the p=0 lattice has degree `ring_density` and the edge count
/// `n*ring_density/2` is invariant under rewiring. Each clockwise lattice
/// edge is rewired with probability `rewire_p` to a uniform non-duplicate
/// endpoint.
pub fn generate_ws(n: usize, ring_density: usize, rewire_p: f64, seed: u64) -> Result<Graph, GraphError> {
    let rd = ring_density;
    if rd < 2 || rd % 2 != 0 || rd >= n {
        return Err(GraphError::Argument(format!(
            "WS requires even ring_density with 2 <= ring_density < n, got n={n}, rd={rd}"
        )));
    }
    if !(0.0..=1.0).contains(&rewire_p) {
        return Err(GraphError::Argument(format!("WS rewire probability must be in [0,1], got {rewire_p}")));
    }
    let mut rng = rng_for(seed);
    let per_side = rd / 2;
    let words = n.div_ceil(64);
    let mut bits = vec![vec![0u64; words]; n];
    let set = |bits: &mut Vec<Vec<u64>>, u: usize, v: usize, on: bool| {
        if on {
            bits[u][v / 64] |= 1 << (v % 64);
            bits[v][u / 64] |= 1 << (u % 64);
        } else {
            bits[u][v / 64] &= !(1 << (v % 64));
            bits[v][u / 64] &= !(1 << (u % 64));
        }
    };
    let has = |bits: &Vec<Vec<u64>>, u: usize, v: usize| bits[u][v / 64] >> (v % 64) & 1 == 1;
    for d in 1..=per_side {
        for u in 0..n {
            set(&mut bits, u, (u + d) % n, true);
        }
    }
    for d in 1..=per_side {
        for u in 0..n {
            let v = (u + d) % n;
            if rng.gen::<f64>() < rewire_p {
                let w = rng.gen_range(0..n);
                // Keep the edge count fixed: skip rewires that would create a
                // self-loop or duplicate edge.
                if w != u && !has(&bits, u, w) && has(&bits, u, v) {
                    set(&mut bits, u, v, false);
                    set(&mut bits, u, w, true);
                }
            }
        }
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if has(&bits, u, v) {
                edges.push((u as u32, v as u32));
            }
        }
    }
    Ok(Graph::from_edges(n, &edges).with_name(format!("ws_n{n}_rd{rd}_p{rewire_p}_s{seed}")))
}

/// Extracts the induced subgraph on the first `target_n` nodes visited by a
/// breadth-first search from `start`. Nodes are renumbered in visit order.
pub fn sample_connected_subgraph_from(g: &Graph, target_n: usize, start: u32) -> Result<Graph, GraphError> {
    if target_n < 1 || target_n > g.node_count() {
        return Err(GraphError::Argument(format!(
            "target_n must be in 1..={}, got {target_n}",
            g.node_count()
        )));
    }
    let mut seen = vec![false; g.node_count()];
    let mut order = Vec::with_capacity(target_n);
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start as usize] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        if order.len() == target_n {
            return Ok(g.induced(&order).with_name(format!("{}_sub{target_n}", g.name)));
        }
        for &v in g.neighbors(u) {
            if !seen[v as usize] {
                seen[v as usize] = true;
                queue.push_back(v);
            }
        }
    }
    Err(GraphError::Sampling(format!(
        "component of node {start} has {} nodes, need {target_n}",
        order.len()
    )))
}

/// Seeded variant: picks the BFS start uniformly among nodes whose component
/// is large enough.
pub fn sample_connected_subgraph(g: &Graph, target_n: usize, seed: u64) -> Result<Graph, GraphError> {
    if target_n < 1 || target_n > g.node_count() {
        return Err(GraphError::Argument(format!(
            "target_n must be in 1..={}, got {target_n}",
            g.node_count()
        )));
    }
    let mut comp_size = vec![0usize; g.node_count()];
    let mut visited = vec![false; g.node_count()];
    for u in 0..g.node_count() as u32 {
        if !visited[u as usize] {
            let comp = g.component(u);
            for &v in &comp {
                visited[v as usize] = true;
                comp_size[v as usize] = comp.len();
            }
        }
    }
    let eligible: Vec<u32> = (0..g.node_count() as u32)
        .filter(|&u| comp_size[u as usize] >= target_n)
        .collect();
    if eligible.is_empty() {
        return Err(GraphError::Sampling(format!("no component with >= {target_n} nodes")));
    }
    let mut rng = rng_for(seed);
    let start = eligible[rng.gen_range(0..eligible.len())];
    sample_connected_subgraph_from(g, target_n, start)
}
