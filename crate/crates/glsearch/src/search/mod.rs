//! Iterative branch-and-bound search with incumbent tracking, anytime curve
//! recording and promise-based backtracking.

mod complete;
mod oracle;

pub use complete::{complete_search, CompleteOptions, CompleteResult, TargetSample};
pub use oracle::mcs_oracle;

use crate::bidomain::{validate_mapping, Action, SearchState};
use crate::graph::Graph;
use crate::policy::{Policy, SelectCtx};
use serde::{Deserialize, Serialize};
use std::cell::{Cell, RefCell};
use std::collections::BinaryHeap;
use std::collections::HashSet;
use std::rc::Rc;
use std::time::Instant;

/// Iteration and/or wall-clock limits. Searches stop at whichever limit is
/// hit first; a fully exhausted search space sets `completed` instead.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Budget {
    pub max_iterations: Option<u64>,
    pub max_seconds: Option<f64>,
}

impl Budget {
    pub fn iterations(n: u64) -> Budget {
        Budget { max_iterations: Some(n), max_seconds: None }
    }

    pub fn seconds(s: f64) -> Budget {
        Budget { max_iterations: None, max_seconds: Some(s) }
    }

    pub fn unlimited() -> Budget {
        Budget::default()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u64,
    pub seconds: f64,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_mapping: Vec<Action>,
    pub best_size: usize,
    pub curve: Vec<CurvePoint>,
    pub iterations: u64,
    pub completed: bool,
}

impl SearchResult {
    /// First iteration at which the final incumbent size was reached.
    pub fn iterations_to_best(&self) -> Option<u64> {
        self.curve.iter().find(|p| p.size == self.best_size).map(|p| p.iteration)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,seconds,size\n");
        for p in &self.curve {
            out.push_str(&format!("{},{:.6},{}\n", p.iteration, p.seconds, p.size));
        }
        out
    }
}

/// How many non-improving iterations are tolerated before the next state is
/// taken from the promise queue instead of the stack.
pub const PROMISE_PATIENCE: u64 = 3;

struct Node {
    state: RefCell<SearchState>,
    enqueued: Cell<bool>,
    depth: usize,
}

struct PromiseEntry {
    action_count: usize,
    depth: usize,
    seq: u64,
    node: Rc<Node>,
}

impl PartialEq for PromiseEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for PromiseEntry {}
impl PartialOrd for PromiseEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PromiseEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: largest action space first, then deeper states, then
        // earlier insertion.
        self.action_count
            .cmp(&other.action_count)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Branch and bound over node-pair selections.
///
/// Each loop pass pops one state (one search iteration for budget
/// accounting, checked at the top of the pass), updates the incumbent,
/// prunes on the upper bound, and otherwise expands one action chosen by the
/// policy: the state goes back on the stack minus that action and the
/// refined child is pushed. Child states whose pair set was already visited
/// are dropped. With `promise` enabled, after [`PROMISE_PATIENCE`]
/// non-improving iterations the next state comes from a max-priority queue
/// keyed by action-space size at first expansion.
pub fn search(
    g1: &Graph,
    g2: &Graph,
    policy: &mut dyn Policy,
    budget: &Budget,
    promise: bool,
) -> SearchResult {
    let start = Instant::now();
    policy.reset(g1, g2);

    let mut result = SearchResult {
        best_mapping: Vec::new(),
        best_size: 0,
        curve: Vec::new(),
        iterations: 0,
        completed: false,
    };
    let root = match SearchState::initial(g1, g2) {
        Ok(s) => s,
        Err(_) => {
            result.completed = true;
            result.curve.push(CurvePoint { iteration: 0, seconds: 0.0, size: 0 });
            return result;
        }
    };

    let mut stack: Vec<Rc<Node>> = vec![Rc::new(Node {
        state: RefCell::new(root),
        enqueued: Cell::new(false),
        depth: 0,
    })];
    let mut queue: BinaryHeap<PromiseEntry> = BinaryHeap::new();
    let mut visited: HashSet<Vec<Action>> = HashSet::new();
    visited.insert(Vec::new());
    // Largest mapping seen since the last promise-pop (or the start); as
    // long as the search keeps reaching deeper states it is not considered
    // stuck, even when the global incumbent stands still.
    let mut local_best: usize = 0;
    let mut stall: u64 = 0;
    let mut seq: u64 = 0;

    loop {
        if let Some(limit) = budget.max_iterations {
            if result.iterations >= limit {
                break;
            }
        }
        if let Some(limit) = budget.max_seconds {
            if start.elapsed().as_secs_f64() >= limit {
                break;
            }
        }
        let from_promise = promise && stall >= PROMISE_PATIENCE && !queue.is_empty();
        let node = if from_promise {
            local_best = 0;
            stall = 0;
            queue.pop().expect("non-empty queue").node
        } else {
            match stack.pop() {
                Some(n) => n,
                None => {
                    result.completed = true;
                    break;
                }
            }
        };
        result.iterations += 1;
        let iteration = result.iterations;

        let mut improved = false;
        {
            let mut st = node.state.borrow_mut();
            if st.size() > local_best {
                local_best = st.size();
                improved = true;
            }
            if st.size() > result.best_size {
                st.validate_mapping(g1, g2)
                    .expect("incumbent must be a valid connected induced common subgraph");
                result.best_size = st.size();
                result.best_mapping = st.mapping().to_vec();
                result.curve.push(CurvePoint {
                    iteration,
                    seconds: start.elapsed().as_secs_f64(),
                    size: result.best_size,
                });
                improved = true;
            }

            let prune = st.upper_bound() <= result.best_size;
            let actions = if prune { Vec::new() } else { st.action_space(g1, g2) };
            if !prune && !actions.is_empty() {
                if promise && !node.enqueued.get() {
                    node.enqueued.set(true);
                    queue.push(PromiseEntry {
                        action_count: actions.len(),
                        depth: node.depth,
                        seq,
                        node: Rc::clone(&node),
                    });
                    seq += 1;
                }
                let action = {
                    let ctx = SelectCtx { g1, g2, state: &st, candidates: &actions };
                    policy.select(&ctx)
                };
                debug_assert!(actions.contains(&action), "policy returned a non-candidate");
                st.exhaust(action);
                let child = st.refine(g1, g2, action);
                policy.observe(&st, action, &child);
                drop(st);
                if !from_promise {
                    // A promise-popped state keeps its original stack entry;
                    // re-pushing would expand it twice.
                    stack.push(Rc::clone(&node));
                }
                if visited.insert(child.canonical_key()) {
                    let depth = child.depth();
                    stack.push(Rc::new(Node {
                        state: RefCell::new(child),
                        enqueued: Cell::new(false),
                        depth,
                    }));
                }
            }
        }

        if improved || from_promise {
            stall = 0;
        } else {
            stall += 1;
        }
        if iteration % 100 == 0 {
            result.curve.push(CurvePoint {
                iteration,
                seconds: start.elapsed().as_secs_f64(),
                size: result.best_size,
            });
        }
    }

    result.curve.push(CurvePoint {
        iteration: result.iterations,
        seconds: start.elapsed().as_secs_f64(),
        size: result.best_size,
    });
    result
}

/// Re-checks a finished result against the inputs; used by harnesses.
pub fn validate_result(g1: &Graph, g2: &Graph, result: &SearchResult) -> Result<(), String> {
    if result.best_mapping.len() != result.best_size {
        return Err("best_size does not match mapping length".into());
    }
    validate_mapping(g1, g2, &result.best_mapping)?;
    if result.curve.windows(2).any(|w| w[1].size < w[0].size) {
        return Err("curve is not monotone".into());
    }
    match result.curve.last() {
        Some(last) if last.size == result.best_size => Ok(()),
        _ => Err("curve must end at the best size".into()),
    }
}
