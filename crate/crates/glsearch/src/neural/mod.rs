//! The Q network: a GAT encoder plus readout/interact heads combined into
//! the factored state-value form `q = 1 + gamma * MLP(hG, hs, hDc, hD0)`,
//! with the unfactored variants kept as ablation heads. Everything runs in
//! f64 with exact reverse-mode gradients from [`tape`].

pub mod adam;
pub mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use params::{BlockDef, GradBuf, ParamSet};
pub use tape::{NodeId, Tape};
pub use tensor::Mat;

use crate::bidomain::{Action, Bidomain, SearchState};
use crate::graph::{local_degree_profile, Graph, NodeFeatures};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("tensor {name}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch { name: String, expected: [usize; 2], got: [usize; 2] },
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unknown tensor {0}")]
    UnknownTensor(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("feature dim mismatch: network expects {expected}, features have {got}")]
    FeatureDim { expected: usize, got: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractMode {
    /// Width-3 stride-1 convolution on each input, elementwise max, MLP.
    ConvMax,
    /// Elementwise sum, MLP.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// Scores the state the action leads to: q = 1 + gamma * MLP(...).
    Factored,
    /// Order-sensitive concatenation of per-graph and per-node embeddings.
    Unfactored,
    /// Like `Unfactored` but with commutative interactions.
    UnfactoredI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Input feature width: 5 LDP statistics plus the label one-hot block.
    pub feature_dim: usize,
    /// Width of the label one-hot block inside `feature_dim`.
    pub n_labels: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub gat_layers: usize,
    pub interact_mode: InteractMode,
    pub head_mode: HeadMode,
    pub gamma: f64,
}

impl NetConfig {
    pub fn with_labels(n_labels: usize) -> NetConfig {
        NetConfig {
            feature_dim: 5 + n_labels,
            n_labels,
            hidden_dim: 64,
            embed_dim: 32,
            gat_layers: 3,
            interact_mode: InteractMode::ConvMax,
            head_mode: HeadMode::Factored,
            gamma: 1.0,
        }
    }

    pub fn features_for(&self, g: &Graph) -> NodeFeatures {
        local_degree_profile(g, self.n_labels)
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::with_labels(0)
    }
}

struct GatIds {
    w: usize,
    a_src: usize,
    a_dst: usize,
    b: usize,
}

struct MlpIds {
    layers: Vec<(usize, usize)>,
}

struct InteractIds {
    conv: Option<(usize, usize)>,
    mlp: MlpIds,
}

struct NetIds {
    gat: Vec<GatIds>,
    ro_graph: MlpIds,
    ro_sub: MlpIds,
    ro_bd_side: MlpIds,
    ro_bd_set: MlpIds,
    in_graph: InteractIds,
    in_sub: InteractIds,
    in_bd: InteractIds,
    final_mlp: MlpIds,
    unf_final: MlpIds,
    unfi_graph: InteractIds,
    unfi_sub: InteractIds,
    unfi_act: InteractIds,
    unfi_final: MlpIds,
}

fn mlp_dims(input: usize, layers: usize) -> Vec<usize> {
    let mut dims = vec![input];
    for k in 1..layers {
        dims.push((dims[k - 1] / 2).max(1));
    }
    dims.push(1);
    dims
}

enum LastAct {
    Linear,
    EluPlusOne,
}

struct Builder<'a> {
    params: ParamSet,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn glorot(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let rng = &mut *self.rng;
        self.params.add(name, rows, cols, &mut |_, _| rng.gen_range(-limit..limit))
    }

    fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.params.add(name, rows, cols, &mut |_, _| 0.0)
    }

    fn mlp(&mut self, prefix: &str, dims: &[usize]) -> MlpIds {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let wid = self.glorot(&format!("{prefix}.w{}", k + 1), w[0], w[1]);
                let bid = self.zeros(&format!("{prefix}.b{}", k + 1), 1, w[1]);
                (wid, bid)
            })
            .collect();
        MlpIds { layers }
    }

    fn interact(&mut self, prefix: &str, in_dim: usize, embed: usize, mode: InteractMode) -> InteractIds {
        let (conv, mlp_in) = match mode {
            InteractMode::ConvMax => {
                let w = self.glorot(&format!("{prefix}.conv_w"), 1, 3);
                let b = self.zeros(&format!("{prefix}.conv_b"), 1, 1);
                (Some((w, b)), in_dim - 2)
            }
            InteractMode::Sum => (None, in_dim),
        };
        let mid = embed.max((mlp_in + embed) / 2);
        let mlp = self.mlp(prefix, &[mlp_in, mid, embed]);
        InteractIds { conv, mlp }
    }
}

/// The full network: configuration, parameters, and block-id layout.
pub struct QNet {
    pub cfg: NetConfig,
    pub params: ParamSet,
    ids: NetIds,
}

impl QNet {
    pub fn new(cfg: NetConfig, seed: u64) -> QNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder { params: ParamSet::new(), rng: &mut rng };
        let hidden = cfg.hidden_dim;
        let embed = cfg.embed_dim;

        let gat = (0..cfg.gat_layers)
            .map(|l| {
                let in_dim = if l == 0 { cfg.feature_dim } else { hidden };
                GatIds {
                    w: b.glorot(&format!("gat{l}.w"), in_dim, hidden),
                    a_src: b.glorot(&format!("gat{l}.a_src"), hidden, 1),
                    a_dst: b.glorot(&format!("gat{l}.a_dst"), hidden, 1),
                    b: b.zeros(&format!("gat{l}.b"), 1, hidden),
                }
            })
            .collect();

        let ro_dims = [hidden, embed.max((hidden + embed) / 2), embed];
        let ro_set_dims = [embed, embed, embed];
        let ids = NetIds {
            gat,
            ro_graph: b.mlp("ro_graph", &ro_dims),
            ro_sub: b.mlp("ro_sub", &ro_dims),
            ro_bd_side: b.mlp("ro_bd_side", &ro_dims),
            ro_bd_set: b.mlp("ro_bd_set", &ro_set_dims),
            in_graph: b.interact("in_graph", embed, embed, cfg.interact_mode),
            in_sub: b.interact("in_sub", embed, embed, cfg.interact_mode),
            in_bd: b.interact("in_bd", embed, embed, cfg.interact_mode),
            final_mlp: b.mlp("final", &mlp_dims(4 * embed, 7)),
            unf_final: b.mlp("unf_final", &mlp_dims(6 * hidden, 7)),
            unfi_graph: b.interact("unfi_graph", hidden, embed, cfg.interact_mode),
            unfi_sub: b.interact("unfi_sub", hidden, embed, cfg.interact_mode),
            unfi_act: b.interact("unfi_act", hidden, embed, cfg.interact_mode),
            unfi_final: b.mlp("unfi_final", &mlp_dims(3 * embed, 7)),
        };
        QNet { cfg, params: b.params, ids }
    }

    fn apply_mlp(&self, tape: &mut Tape, ids: &MlpIds, mut x: NodeId, last: LastAct) -> NodeId {
        let count = ids.layers.len();
        for (k, &(w, bia)) in ids.layers.iter().enumerate() {
            let wn = tape.param(&self.params, w);
            let bn = tape.param(&self.params, bia);
            x = tape.matmul(x, wn);
            x = tape.add_bias(x, bn);
            if k + 1 < count {
                x = tape.elu(x);
            } else if matches!(last, LastAct::EluPlusOne) {
                x = tape.elu_plus_one(x);
            }
        }
        x
    }

    fn apply_interact(&self, tape: &mut Tape, ids: &InteractIds, x: NodeId, y: NodeId) -> NodeId {
        let combined = match ids.conv {
            Some((w, b)) => {
                let wn = tape.param(&self.params, w);
                let bn = tape.param(&self.params, b);
                let cx = tape.conv1d(x, wn, bn);
                let cy = tape.conv1d(y, wn, bn);
                tape.max_elem(cx, cy)
            }
            None => tape.add(x, y),
        };
        self.apply_mlp(tape, &ids.mlp, combined, LastAct::Linear)
    }

    fn readout(&self, tape: &mut Tape, ids: &MlpIds, src: NodeId, rows: Arc<Vec<u32>>) -> NodeId {
        let sum = tape.sum_rows(src, rows);
        self.apply_mlp(tape, ids, sum, LastAct::Linear)
    }

    /// GAT encoder on the tape: returns the n x hidden node-embedding matrix.
    pub fn tape_encode(&self, tape: &mut Tape, g: &Graph, feats: &NodeFeatures) -> Result<NodeId, NetError> {
        if feats.dim != self.cfg.feature_dim {
            return Err(NetError::FeatureDim { expected: self.cfg.feature_dim, got: feats.dim });
        }
        let adj = closed_adjacency(g);
        let mut x = tape.input(Mat::from_vec(g.node_count(), feats.dim, feats.as_slice().to_vec()));
        for layer in &self.ids.gat {
            let w = tape.param(&self.params, layer.w);
            let a_src = tape.param(&self.params, layer.a_src);
            let a_dst = tape.param(&self.params, layer.a_dst);
            let bias = tape.param(&self.params, layer.b);
            let z = tape.matmul(x, w);
            let s_src = tape.matmul(z, a_src);
            let s_dst = tape.matmul(z, a_dst);
            let agg = tape.gat_attn(z, s_src, s_dst, Arc::clone(&adj));
            let agg = tape.add_bias(agg, bias);
            x = tape.elu(agg);
        }
        Ok(x)
    }

    /// Inference encoding, cached by callers for the whole search.
    pub fn encode(&self, g: &Graph, feats: &NodeFeatures) -> Result<Arc<Mat>, NetError> {
        let mut tape = Tape::new();
        let id = self.tape_encode(&mut tape, g, feats)?;
        Ok(Arc::clone(tape.value(id)))
    }

    /// Factored head on the tape. `hg_cached` short-circuits the whole-graph
    /// interaction, which does not depend on the state.
    pub fn tape_q_child(
        &self,
        tape: &mut Tape,
        h1: NodeId,
        h2: NodeId,
        n1: usize,
        n2: usize,
        hg_cached: Option<NodeId>,
        child: &SearchState,
    ) -> NodeId {
        let hg = match hg_cached {
            Some(id) => id,
            None => {
                let all1: Arc<Vec<u32>> = Arc::new((0..n1 as u32).collect());
                let all2: Arc<Vec<u32>> = Arc::new((0..n2 as u32).collect());
                let g1 = self.readout(tape, &self.ids.ro_graph, h1, all1);
                let g2 = self.readout(tape, &self.ids.ro_graph, h2, all2);
                self.apply_interact(tape, &self.ids.in_graph, g1, g2)
            }
        };
        let left: Arc<Vec<u32>> = Arc::new(child.mapping().iter().map(|&(i, _)| i).collect());
        let right: Arc<Vec<u32>> = Arc::new(child.mapping().iter().map(|&(_, j)| j).collect());
        let s1 = self.readout(tape, &self.ids.ro_sub, h1, left);
        let s2 = self.readout(tape, &self.ids.ro_sub, h2, right);
        let hs = self.apply_interact(tape, &self.ids.in_sub, s1, s2);

        let mut connected = Vec::new();
        for bd in child.bidomains().iter().filter(|b| b.is_connected()) {
            let l = self.readout(tape, &self.ids.ro_bd_side, h1, Arc::new(bd.left.clone()));
            let r = self.readout(tape, &self.ids.ro_bd_side, h2, Arc::new(bd.right.clone()));
            connected.push(self.apply_interact(tape, &self.ids.in_bd, l, r));
        }
        let set_sum = if connected.is_empty() {
            tape.input(Mat::zeros(1, self.cfg.embed_dim))
        } else {
            tape.sum_list(connected)
        };
        let hdc = self.apply_mlp(tape, &self.ids.ro_bd_set, set_sum, LastAct::Linear);

        let (d0_left, d0_right) = match child.d0() {
            Some(bd) => (Arc::new(bd.left.clone()), Arc::new(bd.right.clone())),
            None => (Arc::new(Vec::new()), Arc::new(Vec::new())),
        };
        let l0 = self.readout(tape, &self.ids.ro_bd_side, h1, d0_left);
        let r0 = self.readout(tape, &self.ids.ro_bd_side, h2, d0_right);
        let hd0 = self.apply_interact(tape, &self.ids.in_bd, l0, r0);

        let cat = tape.concat_cols(vec![hg, hs, hdc, hd0]);
        let m = self.apply_mlp(tape, &self.ids.final_mlp, cat, LastAct::EluPlusOne);
        let scaled = tape.scale(m, self.cfg.gamma);
        tape.add_const(scaled, 1.0)
    }

    /// Ablation heads on the tape, scoring (state, action) directly from raw
    /// summed embeddings.
    pub fn tape_q_unfactored(
        &self,
        tape: &mut Tape,
        h1: NodeId,
        h2: NodeId,
        n1: usize,
        n2: usize,
        parent: &SearchState,
        action: Action,
        interacted: bool,
    ) -> NodeId {
        let all1: Arc<Vec<u32>> = Arc::new((0..n1 as u32).collect());
        let all2: Arc<Vec<u32>> = Arc::new((0..n2 as u32).collect());
        let left: Arc<Vec<u32>> = Arc::new(parent.mapping().iter().map(|&(i, _)| i).collect());
        let right: Arc<Vec<u32>> = Arc::new(parent.mapping().iter().map(|&(_, j)| j).collect());
        let hg1 = tape.sum_rows(h1, all1);
        let hg2 = tape.sum_rows(h2, all2);
        let hs1 = tape.sum_rows(h1, left);
        let hs2 = tape.sum_rows(h2, right);
        let hi = tape.sum_rows(h1, Arc::new(vec![action.0]));
        let hj = tape.sum_rows(h2, Arc::new(vec![action.1]));
        if interacted {
            let hg = self.apply_interact(tape, &self.ids.unfi_graph, hg1, hg2);
            let hs = self.apply_interact(tape, &self.ids.unfi_sub, hs1, hs2);
            let ha = self.apply_interact(tape, &self.ids.unfi_act, hi, hj);
            let cat = tape.concat_cols(vec![hg, hs, ha]);
            self.apply_mlp(tape, &self.ids.unfi_final, cat, LastAct::EluPlusOne)
        } else {
            let cat = tape.concat_cols(vec![hg1, hg2, hs1, hs2, hi, hj]);
            self.apply_mlp(tape, &self.ids.unf_final, cat, LastAct::EluPlusOne)
        }
    }

    /// Precomputes everything state-independent for a pair: node embeddings
    /// and the whole-graph interacted embedding.
    pub fn pair_embeddings(&self, g1: &Graph, g2: &Graph) -> Result<PairEmbeddings, NetError> {
        let f1 = self.cfg.features_for(g1);
        let f2 = self.cfg.features_for(g2);
        let mut tape = Tape::new();
        let h1 = self.tape_encode(&mut tape, g1, &f1)?;
        let h2 = self.tape_encode(&mut tape, g2, &f2)?;
        let all1: Arc<Vec<u32>> = Arc::new((0..g1.node_count() as u32).collect());
        let all2: Arc<Vec<u32>> = Arc::new((0..g2.node_count() as u32).collect());
        let r1 = self.readout(&mut tape, &self.ids.ro_graph, h1, all1);
        let r2 = self.readout(&mut tape, &self.ids.ro_graph, h2, all2);
        let hg = self.apply_interact(&mut tape, &self.ids.in_graph, r1, r2);
        Ok(PairEmbeddings {
            n1: g1.node_count(),
            n2: g2.node_count(),
            h1: Arc::clone(tape.value(h1)),
            h2: Arc::clone(tape.value(h2)),
            hg: Arc::clone(tape.value(hg)),
        })
    }

    /// Interacted embedding of one bidomain, per the readout/interact
    /// composition used inside the factored head.
    pub fn bidomain_embedding(&self, pe: &PairEmbeddings, bd: &Bidomain) -> Vec<f64> {
        let mut tape = Tape::new();
        let h1 = tape.input_shared(Arc::clone(&pe.h1));
        let h2 = tape.input_shared(Arc::clone(&pe.h2));
        let l = self.readout(&mut tape, &self.ids.ro_bd_side, h1, Arc::new(bd.left.clone()));
        let r = self.readout(&mut tape, &self.ids.ro_bd_side, h2, Arc::new(bd.right.clone()));
        let e = self.apply_interact(&mut tape, &self.ids.in_bd, l, r);
        tape.value(e).data.clone()
    }

    /// Inference score of a child state under the factored head.
    pub fn q_child(&self, pe: &PairEmbeddings, child: &SearchState) -> f64 {
        let mut tape = Tape::new();
        let h1 = tape.input_shared(Arc::clone(&pe.h1));
        let h2 = tape.input_shared(Arc::clone(&pe.h2));
        let hg = tape.input_shared(Arc::clone(&pe.hg));
        let q = self.tape_q_child(&mut tape, h1, h2, pe.n1, pe.n2, Some(hg), child);
        tape.scalar(q)
    }

    /// Inference score under the configured head mode.
    pub fn q_score(
        &self,
        pe: &PairEmbeddings,
        parent: &SearchState,
        action: Action,
        child: &SearchState,
    ) -> f64 {
        match self.cfg.head_mode {
            HeadMode::Factored => self.q_child(pe, child),
            HeadMode::Unfactored | HeadMode::UnfactoredI => {
                let mut tape = Tape::new();
                let h1 = tape.input_shared(Arc::clone(&pe.h1));
                let h2 = tape.input_shared(Arc::clone(&pe.h2));
                let q = self.tape_q_unfactored(
                    &mut tape,
                    h1,
                    h2,
                    pe.n1,
                    pe.n2,
                    parent,
                    action,
                    matches!(self.cfg.head_mode, HeadMode::UnfactoredI),
                );
                tape.scalar(q)
            }
        }
    }
}

/// State-independent per-pair cache: node embeddings for both graphs plus
/// the interacted whole-graph embedding.
#[derive(Clone)]
pub struct PairEmbeddings {
    pub n1: usize,
    pub n2: usize,
    pub h1: Arc<Mat>,
    pub h2: Arc<Mat>,
    pub hg: Arc<Mat>,
}

/// Neighbor lists including the node itself, as GAT attention softmaxes over
/// the closed neighborhood.
pub fn closed_adjacency(g: &Graph) -> Arc<Vec<Vec<u32>>> {
    let mut adj = Vec::with_capacity(g.node_count());
    for u in 0..g.node_count() as u32 {
        let mut row = g.neighbors(u).to_vec();
        row.push(u);
        row.sort_unstable();
        adj.push(row);
    }
    Arc::new(adj)
}

#[cfg(test)]
mod tests;
