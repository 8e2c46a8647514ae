//! Q-network-backed selection with action-space pruning.
//!
//! Large states can expose thousands of candidate pairs, so only a bounded
//! subset is scored: candidates are narrowed to the smallest bidomains, and
//! within them to the highest-degree nodes, capping the number of child
//! evaluations per step.

use super::{Policy, SelectCtx};
use crate::bidomain::{Action, SearchState};
use crate::graph::Graph;
use crate::neural::{PairEmbeddings, QNet};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Number of smallest bidomains candidates may come from.
    pub max_bidomains: usize,
    /// Cap on scored pairs per step.
    pub max_pairs: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig { max_bidomains: 1, max_pairs: 20 }
    }
}

fn node_order(deg: usize, id: u32) -> (std::cmp::Reverse<usize>, u32) {
    (std::cmp::Reverse(deg), id)
}

/// Narrows `candidates` to at most `prune.max_pairs` actions: pick the
/// smallest bidomains holding any candidate, then cross the top
/// ceil(sqrt(max_pairs)) left and right nodes by degree. Falls back to a
/// degree-ordered truncation when the cross product is filtered empty
/// (label-sparse bidomains).
pub fn prune_candidates(
    g1: &Graph,
    g2: &Graph,
    state: &SearchState,
    candidates: &[Action],
    prune: &PruneConfig,
) -> Vec<Action> {
    if candidates.len() <= prune.max_pairs {
        return candidates.to_vec();
    }
    // Candidates grouped by the bidomain they came from.
    let mut groups: Vec<(usize, Vec<Action>)> = Vec::new();
    for bd in state.bidomains() {
        let inside: Vec<Action> = candidates
            .iter()
            .copied()
            .filter(|&(i, j)| {
                bd.left.binary_search(&i).is_ok() && bd.right.binary_search(&j).is_ok()
            })
            .collect();
        if !inside.is_empty() {
            groups.push((bd.left.len() * bd.right.len(), inside));
        }
    }
    if groups.is_empty() {
        return candidates[..prune.max_pairs.min(candidates.len())].to_vec();
    }
    groups.sort_by_key(|&(size, _)| size);
    groups.truncate(prune.max_bidomains.max(1));

    let mut out = Vec::new();
    for (_, inside) in &groups {
        let k = (prune.max_pairs as f64).sqrt().ceil() as usize;
        let mut lefts: Vec<u32> = inside.iter().map(|&(i, _)| i).collect();
        lefts.sort_unstable();
        lefts.dedup();
        lefts.sort_by_key(|&i| node_order(g1.degree(i), i));
        lefts.truncate(k);
        let mut rights: Vec<u32> = inside.iter().map(|&(_, j)| j).collect();
        rights.sort_unstable();
        rights.dedup();
        rights.sort_by_key(|&j| node_order(g2.degree(j), j));
        rights.truncate(k);
        for &i in &lefts {
            for &j in &rights {
                if inside.contains(&(i, j)) {
                    out.push((i, j));
                }
            }
        }
        if out.is_empty() {
            // Top-k x top-k missed every label-compatible pair.
            let mut sorted = inside.clone();
            sorted.sort_by_key(|&(i, j)| (node_order(g1.degree(i), i), node_order(g2.degree(j), j)));
            out.extend(sorted);
        }
    }
    out.truncate(prune.max_pairs);
    out
}

/// Selection by factored Q score: refine each pruned candidate and score the
/// resulting state, returning the argmax. Node embeddings are computed once
/// per pair and shared read-only.
pub struct LearnedPolicy {
    net: Arc<QNet>,
    prune: PruneConfig,
    pair: Option<PairEmbeddings>,
}

impl LearnedPolicy {
    pub fn new(net: Arc<QNet>) -> LearnedPolicy {
        LearnedPolicy { net, prune: PruneConfig::default(), pair: None }
    }

    pub fn with_prune(net: Arc<QNet>, prune: PruneConfig) -> LearnedPolicy {
        LearnedPolicy { net, prune, pair: None }
    }

    pub fn embeddings(&self) -> Option<&PairEmbeddings> {
        self.pair.as_ref()
    }

    /// Scores for the given actions under the configured head.
    pub fn scores(
        &self,
        g1: &Graph,
        g2: &Graph,
        state: &SearchState,
        actions: &[Action],
    ) -> Vec<f64> {
        let pe = self.pair.as_ref().expect("reset() must run before scoring");
        actions
            .iter()
            .map(|&a| {
                let child = state.refine(g1, g2, a);
                self.net.q_score(pe, state, a, &child)
            })
            .collect()
    }
}

impl Policy for LearnedPolicy {
    fn name(&self) -> &'static str {
        "learned"
    }

    fn reset(&mut self, g1: &Graph, g2: &Graph) {
        self.pair = Some(
            self.net
                .pair_embeddings(g1, g2)
                .expect("feature dimensions must match the checkpoint"),
        );
    }

    fn select(&mut self, ctx: &SelectCtx) -> Action {
        let pruned = prune_candidates(ctx.g1, ctx.g2, ctx.state, ctx.candidates, &self.prune);
        let scores = self.scores(ctx.g1, ctx.g2, ctx.state, &pruned);
        let mut best = 0;
        for k in 1..pruned.len() {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        pruned[best]
    }
}
