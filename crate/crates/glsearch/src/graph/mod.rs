//! Graph representation, file I/O, synthetic generators and node features.

mod features;
mod generate;

pub use features::{local_degree_profile, node_features, NodeFeatures};
pub use generate::{generate_ba, generate_er, generate_ws, sample_connected_subgraph, sample_connected_subgraph_from};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Undirected simple labeled graph with contiguous node ids.
///
/// Immutable after construction; adjacency is kept both as sorted neighbor
/// lists (for iteration) and as bitsets (for O(1) edge tests during
/// bidomain refinement).
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<u32>>,
    bits: Vec<Vec<u64>>,
    labels: Vec<u32>,
    pub name: String,
}

impl Graph {
    /// Builds a graph from an edge list, dropping self-loops and duplicates.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Graph {
        Self::from_edges_labeled(n, edges, vec![0; n])
    }

    pub fn from_edges_labeled(n: usize, edges: &[(u32, u32)], labels: Vec<u32>) -> Graph {
        assert_eq!(labels.len(), n, "label vector length must equal n");
        let words = n.div_ceil(64);
        let mut bits = vec![vec![0u64; words]; n];
        for &(u, v) in edges {
            let (u, v) = (u as usize, v as usize);
            assert!(u < n && v < n, "edge endpoint out of range");
            if u == v {
                continue;
            }
            bits[u][v / 64] |= 1 << (v % 64);
            bits[v][u / 64] |= 1 << (u % 64);
        }
        let adj = bits
            .iter()
            .map(|row| {
                (0..n as u32)
                    .filter(|&v| row[v as usize / 64] >> (v % 64) & 1 == 1)
                    .collect()
            })
            .collect();
        Graph { n, adj, bits, labels, name: String::new() }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Graph {
        self.name = name.into();
        self
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.adj[u as usize]
    }

    pub fn degree(&self, u: u32) -> usize {
        self.adj[u as usize].len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.bits[u as usize][v as usize / 64] >> (v % 64) & 1 == 1
    }

    pub fn label(&self, u: u32) -> u32 {
        self.labels[u as usize]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.iter().any(|&l| l != 0)
    }

    /// Largest label id plus one, or 0 for unlabeled graphs.
    pub fn label_table_size(&self) -> usize {
        match self.labels.iter().max() {
            Some(&m) if m > 0 => m as usize + 1,
            _ => 0,
        }
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n as u32 {
            for &v in &self.adj[u as usize] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Checks the structural invariants: symmetry, no self-loops, no
    /// duplicate neighbors, labels sized to n.
    pub fn validate(&self) -> Result<(), String> {
        if self.labels.len() != self.n {
            return Err("label vector length mismatch".into());
        }
        for u in 0..self.n as u32 {
            let row = &self.adj[u as usize];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("adjacency of {u} not strictly sorted"));
            }
            for &v in row {
                if v == u {
                    return Err(format!("self-loop at {u}"));
                }
                if !self.has_edge(v, u) {
                    return Err(format!("asymmetric edge {u}-{v}"));
                }
            }
        }
        Ok(())
    }

    /// Connected component containing `start`, as a sorted node list.
    pub fn component(&self, start: u32) -> Vec<u32> {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start as usize] = true;
        let mut out = vec![start];
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    out.push(v);
                    queue.push_back(v);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.component(0).len() == self.n
    }

    /// Induced subgraph on `nodes`; node i of the result is `nodes[i]`.
    pub fn induced(&self, nodes: &[u32]) -> Graph {
        let mut edges = Vec::new();
        for (i, &u) in nodes.iter().enumerate() {
            for (j, &v) in nodes.iter().enumerate().skip(i + 1) {
                if self.has_edge(u, v) {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        let labels = nodes.iter().map(|&u| self.label(u)).collect();
        Graph::from_edges_labeled(nodes.len(), &edges, labels)
    }
}

/// Parses the plain edge-list format: one `u v` pair per line, with optional
/// `#label u L` lines assigning node labels. Comment lines starting with `%`
/// and blank lines are skipped. Self-loops and duplicate edges are dropped.
pub fn load_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut labels: Vec<(u32, u32)> = Vec::new();
    let mut max_id: Option<u32> = None;
    let bump = |id: u32, max_id: &mut Option<u32>| {
        *max_id = Some(max_id.map_or(id, |m: u32| m.max(id)));
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |msg: &str| GraphError::Parse { line: line_no, msg: msg.to_string() };
        if let Some(rest) = line.strip_prefix("#label") {
            let mut it = rest.split_whitespace();
            let u = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected `#label <node> <label>`"))?;
            let l = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected `#label <node> <label>`"))?;
            if it.next().is_some() {
                return Err(err("trailing tokens after label"));
            }
            bump(u, &mut max_id);
            labels.push((u, l));
            continue;
        }
        if line.starts_with('#') {
            return Err(err("unknown directive"));
        }
        let mut it = line.split_whitespace();
        let u: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("expected two integer node ids"))?;
        let v: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("expected two integer node ids"))?;
        if it.next().is_some() {
            return Err(err("trailing tokens after edge"));
        }
        bump(u, &mut max_id);
        bump(v, &mut max_id);
        edges.push((u, v));
    }
    let n = max_id.map_or(0, |m| m as usize + 1);
    let mut label_vec = vec![0u32; n];
    for (u, l) in labels {
        label_vec[u as usize] = l;
    }
    Ok(Graph::from_edges_labeled(n, &edges, label_vec))
}

/// JSON graph container: `{ "n": int, "edges": [[u,v]...], "labels": [int...] }`.
#[derive(Serialize, Deserialize)]
pub struct JsonGraph {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u32>>,
}

pub fn load_json(text: &str) -> Result<Graph, GraphError> {
    let jg: JsonGraph = serde_json::from_str(text)?;
    let labels = jg.labels.unwrap_or_else(|| vec![0; jg.n]);
    if labels.len() != jg.n {
        return Err(GraphError::Argument("labels length must equal n".into()));
    }
    for &(u, v) in &jg.edges {
        if u as usize >= jg.n || v as usize >= jg.n {
            return Err(GraphError::Argument(format!("edge ({u},{v}) out of range")));
        }
    }
    Ok(Graph::from_edges_labeled(jg.n, &jg.edges, labels))
}

pub fn to_json(g: &Graph) -> JsonGraph {
    JsonGraph {
        n: g.node_count(),
        edges: g.edges(),
        labels: if g.is_labeled() { Some(g.labels().to_vec()) } else { None },
    }
}
