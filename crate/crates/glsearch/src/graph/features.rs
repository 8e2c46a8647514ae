//! Local-degree-profile node features with optional label one-hots.

use super::Graph;

/// Dense n x F feature matrix; row i describes node i.
#[derive(Debug, Clone)]
pub struct NodeFeatures {
    pub dim: usize,
    data: Vec<f64>,
}

impl NodeFeatures {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Per-node `(deg, min, max, mean, std)` of neighbor degrees; isolated nodes
/// get all zeros. When `n_labels > 0` a one-hot block for the node label is
/// appended, padding the feature width so graphs with different label tables
/// can share one encoder.
pub fn local_degree_profile(g: &Graph, n_labels: usize) -> NodeFeatures {
    let dim = 5 + n_labels;
    let mut data = vec![0.0; g.node_count() * dim];
    for u in 0..g.node_count() {
        let row = &mut data[u * dim..(u + 1) * dim];
        let neigh = g.neighbors(u as u32);
        row[0] = neigh.len() as f64;
        if !neigh.is_empty() {
            let degs: Vec<f64> = neigh.iter().map(|&v| g.degree(v) as f64).collect();
            let mean = degs.iter().sum::<f64>() / degs.len() as f64;
            let var = degs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / degs.len() as f64;
            row[1] = degs.iter().cloned().fold(f64::INFINITY, f64::min);
            row[2] = degs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row[3] = mean;
            row[4] = var.sqrt();
        }
        if n_labels > 0 {
            let l = g.label(u as u32) as usize;
            if l < n_labels {
                row[5 + l] = 1.0;
            }
        }
    }
    NodeFeatures { dim, data }
}

/// Features sized from the graph itself: plain LDP for unlabeled graphs,
/// LDP + one-hot over the graph's own label table otherwise.
pub fn node_features(g: &Graph) -> NodeFeatures {
    local_degree_profile(g, g.label_table_size())
}
