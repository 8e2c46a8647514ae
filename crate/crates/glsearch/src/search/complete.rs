//! Exhaustive search producing exact subtree values.
//!
//! Used both as the exactness reference against [`super::mcs_oracle`] and to
//! generate supervision targets: for every expanded action edge the value
//! `y = 1 + gamma + ... + gamma^(L-1)` where `L` is the longest path from
//! the edge to a terminal state.

use crate::bidomain::{Action, SearchState};
use crate::graph::Graph;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompleteError {
    #[error("pair too large for complete search: |V1|*|V2| = {0} exceeds cap {1}")]
    TooLarge(usize, usize),
    #[error("expansion cap {0} exceeded")]
    ExpansionCap(u64),
    #[error("empty input graph")]
    EmptyGraph,
}

#[derive(Debug, Clone)]
pub struct CompleteOptions {
    /// Guard on |V1|*|V2|.
    pub max_product: usize,
    /// Hard cap on expanded states, against pathological pairs.
    pub max_expansions: u64,
    pub gamma: f64,
    /// Record (upper bound, exact best-in-subtree) per expanded state.
    pub audit: bool,
}

impl Default for CompleteOptions {
    fn default() -> Self {
        CompleteOptions { max_product: 12 * 12, max_expansions: 20_000_000, gamma: 1.0, audit: false }
    }
}

/// Supervision sample for one expanded action edge.
#[derive(Debug, Clone)]
pub struct TargetSample {
    /// Mapping of the state the action was taken from, in canonical order.
    pub parent: Vec<Action>,
    pub action: Action,
    pub y: f64,
}

#[derive(Debug)]
pub struct CompleteResult {
    /// Exact connected-induced MCS size.
    pub size: usize,
    pub targets: Vec<TargetSample>,
    pub expansions: u64,
    /// (upper bound, best size in subtree) per expanded state when audited.
    pub audit: Vec<(usize, usize)>,
}

impl CompleteResult {
    /// Target lookup keyed by (parent canonical mapping, action).
    pub fn target_map(&self) -> HashMap<(Vec<Action>, Action), f64> {
        self.targets.iter().map(|t| ((t.parent.clone(), t.action), t.y)).collect()
    }
}

struct Ctx<'a> {
    g1: &'a Graph,
    g2: &'a Graph,
    opts: &'a CompleteOptions,
    memo: HashMap<Vec<Action>, usize>,
    targets: Vec<TargetSample>,
    audit: Vec<(usize, usize)>,
    expansions: u64,
}

fn discounted_sum(gamma: f64, len: usize) -> f64 {
    let mut y = 0.0;
    let mut factor = 1.0;
    for _ in 0..len {
        y += factor;
        factor *= gamma;
    }
    y
}

/// Returns the exact best mapping size in the subtree rooted at `state`.
///
/// Every action of every visited state is enumerated in deterministic
/// order. A child subtree is skipped only when its upper bound cannot beat
/// the best size already established in the current subtree, which keeps
/// each returned value exact; memoization on the canonical pair set makes
/// revisits free.
fn explore(ctx: &mut Ctx, state: &SearchState) -> Result<usize, CompleteError> {
    ctx.expansions += 1;
    if ctx.expansions > ctx.opts.max_expansions {
        return Err(CompleteError::ExpansionCap(ctx.opts.max_expansions));
    }
    let key = state.canonical_key();
    let mut actions = state.action_space(ctx.g1, ctx.g2);
    actions.sort_unstable();
    let mut best = state.size();
    for action in actions {
        let child = state.refine(ctx.g1, ctx.g2, action);
        let child_key = child.canonical_key();
        let child_best = match ctx.memo.get(&child_key) {
            Some(&v) => v,
            None => {
                if child.upper_bound() <= best {
                    // Cannot improve the subtree maximum; not expanded and
                    // hence yields no target.
                    continue;
                }
                let v = explore(ctx, &child)?;
                ctx.memo.insert(child_key, v);
                v
            }
        };
        ctx.targets.push(TargetSample {
            parent: key.clone(),
            action,
            y: discounted_sum(ctx.opts.gamma, child_best - state.size()),
        });
        best = best.max(child_best);
    }
    if ctx.opts.audit {
        ctx.audit.push((state.upper_bound(), best));
    }
    Ok(best)
}

/// Exhausts the search space of a small pair and returns the exact MCS size
/// together with per-edge supervision targets.
pub fn complete_search(
    g1: &Graph,
    g2: &Graph,
    opts: &CompleteOptions,
) -> Result<CompleteResult, CompleteError> {
    let product = g1.node_count() * g2.node_count();
    if product == 0 {
        return Err(CompleteError::EmptyGraph);
    }
    if product > opts.max_product {
        return Err(CompleteError::TooLarge(product, opts.max_product));
    }
    let root = SearchState::initial(g1, g2).map_err(|_| CompleteError::EmptyGraph)?;
    let mut ctx = Ctx {
        g1,
        g2,
        opts,
        memo: HashMap::new(),
        targets: Vec::new(),
        audit: Vec::new(),
        expansions: 0,
    };
    let size = explore(&mut ctx, &root)?;
    Ok(CompleteResult {
        size,
        targets: ctx.targets,
        expansions: ctx.expansions,
        audit: ctx.audit,
    })
}
