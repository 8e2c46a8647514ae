//! Search states and the bidomain partition they induce.
//!
//! A bidomain pairs the nodes of the two graphs that share the same
//! adjacency signature with respect to the already-matched pairs; matching
//! is only legal inside a bidomain, which is what keeps the two selected
//! subgraphs isomorphic after every step. Refining a state on a selected
//! pair splits every bidomain in two: nodes adjacent to the new pair
//! (signature extended by 1) and the rest (extended by 0).

use crate::graph::Graph;
use std::collections::HashSet;
use thiserror::Error;

pub type Action = (u32, u32);

#[derive(Debug, Error)]
pub enum StateError {
    #[error("empty input graph")]
    EmptyGraph,
    #[error("action {0:?} is not in the action space")]
    InvalidAction(Action),
}

/// Adjacency signature with respect to the mapped pairs, one bit per pair in
/// selection order. The all-zero signature marks the disconnected bidomain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    words: Vec<u64>,
    len: usize,
}

impl Signature {
    pub fn empty() -> Signature {
        Signature { words: Vec::new(), len: 0 }
    }

    pub fn push(&self, bit: bool) -> Signature {
        let mut words = self.words.clone();
        if self.len % 64 == 0 {
            words.push(0);
        }
        if bit {
            words[self.len / 64] |= 1 << (self.len % 64);
        }
        Signature { words, len: self.len + 1 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// True when no bit is set, i.e. the bidomain is disconnected from the
    /// matched subgraphs.
    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Renders selection order left to right, e.g. "10" for a bidomain
    /// adjacent to the first matched pair only.
    pub fn to_bit_string(&self) -> String {
        (0..self.len).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }
}

/// A pair of node sets, one per graph, sharing a connectivity signature.
#[derive(Debug, Clone)]
pub struct Bidomain {
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub signature: Signature,
}

impl Bidomain {
    pub fn is_connected(&self) -> bool {
        !self.signature.is_zero()
    }

    /// Admissible per-bidomain contribution to the upper bound: the sum over
    /// labels of min(left count, right count). Reduces to min(|L|,|R|) on
    /// unlabeled graphs.
    pub fn bound(&self, g1: &Graph, g2: &Graph) -> usize {
        if !g1.is_labeled() && !g2.is_labeled() {
            return self.left.len().min(self.right.len());
        }
        let mut counts: std::collections::HashMap<u32, (usize, usize)> = std::collections::HashMap::new();
        for &u in &self.left {
            counts.entry(g1.label(u)).or_default().0 += 1;
        }
        for &v in &self.right {
            counts.entry(g2.label(v)).or_default().1 += 1;
        }
        counts.values().map(|&(a, b)| a.min(b)).sum()
    }
}

/// One node of the search tree: the mapping built so far, the bidomain
/// partition it induces, and the per-state bookkeeping Algorithm-style
/// iterative search needs (exhausted actions, cached upper bound).
///
/// The mapping and partition are fixed at construction; `refine` returns a
/// fresh child and leaves the parent reusable for sibling actions. Only the
/// exhausted-action set mutates, and only via [`SearchState::exhaust`].
#[derive(Debug, Clone)]
pub struct SearchState {
    mapping: Vec<Action>,
    /// Active partition entries: both sides non-empty.
    bidomains: Vec<Bidomain>,
    /// Entries whose one side emptied out. They can never contribute actions
    /// or bound mass but complete the partition of the unmatched nodes; their
    /// signatures are frozen at the step they emptied.
    residue: Vec<Bidomain>,
    upper_bound: usize,
    exhausted: HashSet<Action>,
}

impl SearchState {
    /// Empty state over the full node sets: a single all-zero bidomain.
    pub fn initial(g1: &Graph, g2: &Graph) -> Result<SearchState, StateError> {
        if g1.node_count() == 0 || g2.node_count() == 0 {
            return Err(StateError::EmptyGraph);
        }
        let root = Bidomain {
            left: (0..g1.node_count() as u32).collect(),
            right: (0..g2.node_count() as u32).collect(),
            signature: Signature::empty(),
        };
        let ub = root.bound(g1, g2);
        Ok(SearchState {
            mapping: Vec::new(),
            bidomains: vec![root],
            residue: Vec::new(),
            upper_bound: ub,
            exhausted: HashSet::new(),
        })
    }

    pub fn mapping(&self) -> &[Action] {
        &self.mapping
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    pub fn depth(&self) -> usize {
        self.mapping.len()
    }

    pub fn bidomains(&self) -> &[Bidomain] {
        &self.bidomains
    }

    pub fn residue(&self) -> &[Bidomain] {
        &self.residue
    }

    /// The disconnected (all-zero signature) bidomain, wherever it lives.
    pub fn d0(&self) -> Option<&Bidomain> {
        self.bidomains
            .iter()
            .find(|b| !b.is_connected())
            .or_else(|| self.residue.iter().find(|b| !b.is_connected()))
    }

    /// |mapping| + sum over all bidomains of the per-label min-side count.
    pub fn upper_bound(&self) -> usize {
        self.upper_bound
    }

    pub fn exhausted(&self) -> &HashSet<Action> {
        &self.exhausted
    }

    /// Marks an action as expanded from this state (Algorithm line
    /// "actions <- actions \ {a_t}").
    pub fn exhaust(&mut self, action: Action) {
        self.exhausted.insert(action);
    }

    /// Candidate pairs: label-matching pairs drawn from connected bidomains,
    /// minus the exhausted set. At the root the single all-zero bidomain is
    /// used instead, otherwise no search could start.
    pub fn action_space(&self, g1: &Graph, g2: &Graph) -> Vec<Action> {
        self.actions_inner(g1, g2, true)
    }

    /// Terminal check per the connected-MCS rule: no label-compatible pair
    /// remains in any connected bidomain, ignoring the exhausted set.
    pub fn is_terminal(&self, g1: &Graph, g2: &Graph) -> bool {
        self.actions_inner(g1, g2, false).is_empty()
    }

    fn actions_inner(&self, g1: &Graph, g2: &Graph, filter_exhausted: bool) -> Vec<Action> {
        let labeled = g1.is_labeled() || g2.is_labeled();
        let mut out = Vec::new();
        for bd in &self.bidomains {
            let usable = if self.mapping.is_empty() { !bd.is_connected() } else { bd.is_connected() };
            if !usable {
                continue;
            }
            for &i in &bd.left {
                for &j in &bd.right {
                    if labeled && g1.label(i) != g2.label(j) {
                        continue;
                    }
                    if filter_exhausted && self.exhausted.contains(&(i, j)) {
                        continue;
                    }
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Child state after matching `action = (i, j)`. Every bidomain splits on
    /// adjacency to i (left side) and j (right side); entries that lose a
    /// side move to the residue list.
    pub fn refine(&self, g1: &Graph, g2: &Graph, action: Action) -> SearchState {
        let (i, j) = action;
        let mut mapping = self.mapping.clone();
        mapping.push(action);
        let mut bidomains = Vec::with_capacity(self.bidomains.len() + 1);
        let mut residue = self.residue.clone();
        let mut ub = mapping.len();
        for bd in &self.bidomains {
            let mut adj_l = Vec::new();
            let mut rest_l = Vec::new();
            for &u in &bd.left {
                if u == i {
                    continue;
                }
                if g1.has_edge(u, i) {
                    adj_l.push(u);
                } else {
                    rest_l.push(u);
                }
            }
            let mut adj_r = Vec::new();
            let mut rest_r = Vec::new();
            for &v in &bd.right {
                if v == j {
                    continue;
                }
                if g2.has_edge(v, j) {
                    adj_r.push(v);
                } else {
                    rest_r.push(v);
                }
            }
            for (left, right, bit) in [(adj_l, adj_r, true), (rest_l, rest_r, false)] {
                if left.is_empty() && right.is_empty() {
                    continue;
                }
                let child = Bidomain { left, right, signature: bd.signature.push(bit) };
                if child.left.is_empty() || child.right.is_empty() {
                    residue.push(child);
                } else {
                    ub += child.bound(g1, g2);
                    bidomains.push(child);
                }
            }
        }
        SearchState {
            mapping,
            bidomains,
            residue,
            upper_bound: ub,
            exhausted: HashSet::new(),
        }
    }

    /// Checked variant used by the engine boundary: rejects pairs outside the
    /// current action space.
    pub fn refine_checked(&self, g1: &Graph, g2: &Graph, action: Action) -> Result<SearchState, StateError> {
        if !self.action_space(g1, g2).contains(&action) {
            return Err(StateError::InvalidAction(action));
        }
        Ok(self.refine(g1, g2, action))
    }

    /// Order-independent key over the mapped pair set; equal pair sets give
    /// equal keys regardless of selection order. The empty mapping yields the
    /// fixed empty key.
    pub fn canonical_key(&self) -> Vec<Action> {
        let mut pairs = self.mapping.clone();
        pairs.sort_unstable();
        pairs
    }

    /// Verifies that the mapping is a valid connected induced common
    /// subgraph: injective, label-preserving, edge/non-edge preserving, and
    /// connected once it has at least two pairs.
    pub fn validate_mapping(&self, g1: &Graph, g2: &Graph) -> Result<(), String> {
        validate_mapping(g1, g2, &self.mapping)
    }
}

/// Standalone mapping validator, usable on incumbents detached from states.
pub fn validate_mapping(g1: &Graph, g2: &Graph, mapping: &[Action]) -> Result<(), String> {
    let mut left = HashSet::new();
    let mut right = HashSet::new();
    for &(i, j) in mapping {
        if !left.insert(i) || !right.insert(j) {
            return Err(format!("mapping not injective at ({i},{j})"));
        }
        if g1.label(i) != g2.label(j) {
            return Err(format!("label mismatch at ({i},{j})"));
        }
    }
    for (a, &(i1, j1)) in mapping.iter().enumerate() {
        for &(i2, j2) in mapping.iter().skip(a + 1) {
            if g1.has_edge(i1, i2) != g2.has_edge(j1, j2) {
                return Err(format!("induced mismatch between ({i1},{j1}) and ({i2},{j2})"));
            }
        }
    }
    if mapping.len() >= 2 {
        let nodes: Vec<u32> = mapping.iter().map(|&(i, _)| i).collect();
        let sub = g1.induced(&nodes);
        if !sub.is_connected() {
            return Err("matched subgraph is disconnected".into());
        }
    }
    Ok(())
}
