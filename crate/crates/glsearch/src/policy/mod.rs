//! Node-pair selection policies.
//!
//! A policy picks one candidate pair per expansion. The degree heuristic
//! and the score-update policy are the two classic solver behaviours; the
//! random policy replaces the learned score with noise, and
//! [`learned::LearnedPolicy`] scores the pruned candidate set with the Q
//! network.

mod learned;

pub use learned::{prune_candidates, LearnedPolicy, PruneConfig};

use crate::bidomain::{Action, SearchState};
use crate::graph::Graph;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub struct SelectCtx<'a> {
    pub g1: &'a Graph,
    pub g2: &'a Graph,
    pub state: &'a SearchState,
    pub candidates: &'a [Action],
}

pub trait Policy {
    fn name(&self) -> &'static str;

    /// Called once per graph pair before the search starts.
    fn reset(&mut self, _g1: &Graph, _g2: &Graph) {}

    /// Must return an element of `ctx.candidates` (non-empty by contract).
    fn select(&mut self, ctx: &SelectCtx) -> Action;

    /// Hook invoked after each refinement, for online score updates.
    fn observe(&mut self, _parent: &SearchState, _action: Action, _child: &SearchState) {}
}

/// Shared candidate ordering: higher degree on the left node first, smaller
/// id on ties, then the same for the right node. Both the degree policy and
/// the zero-score state of the score policy reduce to this order.
fn degree_key(g1: &Graph, g2: &Graph, a: Action) -> (usize, std::cmp::Reverse<u32>, usize, std::cmp::Reverse<u32>) {
    (g1.degree(a.0), std::cmp::Reverse(a.0), g2.degree(a.1), std::cmp::Reverse(a.1))
}

pub fn degree_select(g1: &Graph, g2: &Graph, candidates: &[Action]) -> Action {
    *candidates
        .iter()
        .max_by_key(|&&a| degree_key(g1, g2, a))
        .expect("select requires a non-empty candidate list")
}

/// Large-degree-first heuristic.
pub struct DegreePolicy;

impl Policy for DegreePolicy {
    fn name(&self) -> &'static str {
        "degree"
    }

    fn select(&mut self, ctx: &SelectCtx) -> Action {
        degree_select(ctx.g1, ctx.g2, ctx.candidates)
    }
}

/// Per-node scores credited with the upper-bound reduction each selection
/// achieved; selection maximizes score(i)+score(j) with degree tie-breaks.
/// Scores start at zero and are reset for every new pair, so the first
/// moves coincide with the degree policy.
pub struct ScoreRlPolicy {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl ScoreRlPolicy {
    pub fn new() -> ScoreRlPolicy {
        ScoreRlPolicy { left: Vec::new(), right: Vec::new() }
    }

    pub fn score(&self, action: Action) -> f64 {
        self.left[action.0 as usize] + self.right[action.1 as usize]
    }
}

impl Default for ScoreRlPolicy {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for ScoreRlPolicy {
    fn name(&self) -> &'static str {
        "scorerl"
    }

    fn reset(&mut self, g1: &Graph, g2: &Graph) {
        self.left = vec![0.0; g1.node_count()];
        self.right = vec![0.0; g2.node_count()];
    }

    fn select(&mut self, ctx: &SelectCtx) -> Action {
        *ctx.candidates
            .iter()
            .max_by(|&&a, &&b| {
                self.score(a)
                    .partial_cmp(&self.score(b))
                    .unwrap()
                    .then_with(|| degree_key(ctx.g1, ctx.g2, a).cmp(&degree_key(ctx.g1, ctx.g2, b)))
            })
            .expect("select requires a non-empty candidate list")
    }

    fn observe(&mut self, parent: &SearchState, action: Action, child: &SearchState) {
        let reduction = parent.upper_bound().saturating_sub(child.upper_bound()) as f64;
        self.left[action.0 as usize] += reduction;
        self.right[action.1 as usize] += reduction;
    }
}

/// Uniform seeded choice; stands in for a Q network emitting random scores.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> RandomPolicy {
        RandomPolicy { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(&mut self, ctx: &SelectCtx) -> Action {
        ctx.candidates[self.rng.gen_range(0..ctx.candidates.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidomain::SearchState;
    use crate::graph::{generate_er, load_edge_list, Graph};

    fn ctx_of<'a>(
        g1: &'a Graph,
        g2: &'a Graph,
        state: &'a SearchState,
        candidates: &'a [Action],
    ) -> SelectCtx<'a> {
        SelectCtx { g1, g2, state, candidates }
    }

    #[test]
    fn degree_prefers_star_center() {
        let star = load_edge_list("0 1\n0 2\n0 3").unwrap();
        let s = SearchState::initial(&star, &star).unwrap();
        let candidates = s.action_space(&star, &star);
        let a = degree_select(&star, &star, &candidates);
        assert_eq!(a, (0, 0));
    }

    #[test]
    fn degree_matches_two_highest_degree_nodes_first() {
        // Left graph peaks at node 2, right at node 3; the misleading
        // high-degree first move pairs them up.
        let g1 = Graph::from_edges(5, &[(2, 0), (2, 1), (2, 3), (2, 4), (0, 1)]);
        let g2 = Graph::from_edges(6, &[(3, 0), (3, 1), (3, 2), (3, 4), (3, 5)]);
        let s = SearchState::initial(&g1, &g2).unwrap();
        let candidates = s.action_space(&g1, &g2);
        assert_eq!(degree_select(&g1, &g2, &candidates), (2, 3));
    }

    #[test]
    fn degree_tie_breaks_by_smallest_id() {
        let tri = load_edge_list("0 1\n1 2\n2 0").unwrap();
        let s = SearchState::initial(&tri, &tri).unwrap();
        let candidates = s.action_space(&tri, &tri);
        assert_eq!(degree_select(&tri, &tri, &candidates), (0, 0));
    }

    #[test]
    fn score_rl_degenerates_to_degree_when_fresh() {
        for seed in 0..30 {
            let g1 = generate_er(8, 0.4, seed).unwrap();
            let g2 = generate_er(8, 0.4, seed + 500).unwrap();
            let s = SearchState::initial(&g1, &g2).unwrap();
            let candidates = s.action_space(&g1, &g2);
            if candidates.is_empty() {
                continue;
            }
            let mut p = ScoreRlPolicy::new();
            p.reset(&g1, &g2);
            let got = p.select(&ctx_of(&g1, &g2, &s, &candidates));
            assert_eq!(got, degree_select(&g1, &g2, &candidates), "seed {seed}");
        }
    }

    #[test]
    fn score_rl_observe_credits_both_endpoints() {
        let g = load_edge_list("0 1\n1 2\n2 0\n2 3").unwrap();
        let mut p = ScoreRlPolicy::new();
        p.reset(&g, &g);
        let s0 = SearchState::initial(&g, &g).unwrap();
        let s1 = s0.refine(&g, &g, (2, 2));
        let drop = s0.upper_bound() - s1.upper_bound();
        p.observe(&s0, (2, 2), &s1);
        assert_eq!(p.left[2], drop as f64);
        assert_eq!(p.right[2], drop as f64);

        // Scores reset across pairs.
        p.reset(&g, &g);
        assert_eq!(p.left[2], 0.0);
    }

    #[test]
    fn random_single_candidate_and_determinism() {
        let g = load_edge_list("0 1").unwrap();
        let s = SearchState::initial(&g, &g).unwrap();
        let one = [(0u32, 0u32)];
        let mut p = RandomPolicy::new(5);
        assert_eq!(p.select(&ctx_of(&g, &g, &s, &one)), (0, 0));

        let candidates = s.action_space(&g, &g);
        let mut a = RandomPolicy::new(7);
        let mut b = RandomPolicy::new(7);
        let seq_a: Vec<Action> =
            (0..20).map(|_| a.select(&ctx_of(&g, &g, &s, &candidates))).collect();
        let seq_b: Vec<Action> =
            (0..20).map(|_| b.select(&ctx_of(&g, &g, &s, &candidates))).collect();
        assert_eq!(seq_a, seq_b);
    }

    #[test]
    fn random_uniform_chi_squared() {
        // 10 candidates, 10^4 draws; chi-squared critical value for df=9 at
        // p=0.01 is 21.666.
        let g = Graph::from_edges(10, &[(0, 1)]);
        let s = SearchState::initial(&g, &g).unwrap();
        let candidates: Vec<Action> = (0..10).map(|j| (0, j)).collect();
        let mut p = RandomPolicy::new(11);
        let mut counts = [0usize; 10];
        let draws = 10_000;
        for _ in 0..draws {
            let a = p.select(&ctx_of(&g, &g, &s, &candidates));
            counts[a.1 as usize] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 21.666, "chi-squared statistic {chi2} too large");
    }

    #[test]
    fn selections_stay_in_candidate_list() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut policies: Vec<Box<dyn Policy>> = vec![
            Box::new(DegreePolicy),
            Box::new(ScoreRlPolicy::new()),
            Box::new(RandomPolicy::new(3)),
        ];
        let mut steps = 0usize;
        'outer: for seed in 0.. {
            let g1 = generate_er(9, 0.35, seed).unwrap();
            let g2 = generate_er(9, 0.35, seed + 777).unwrap();
            for p in policies.iter_mut() {
                p.reset(&g1, &g2);
                let mut s = SearchState::initial(&g1, &g2).unwrap();
                loop {
                    let candidates = s.action_space(&g1, &g2);
                    if candidates.is_empty() {
                        break;
                    }
                    let a = p.select(&ctx_of(&g1, &g2, &s, &candidates));
                    assert!(candidates.contains(&a), "{} left the candidate list", p.name());
                    steps += 1;
                    if steps >= 100_000 {
                        break 'outer;
                    }
                    // Random restarts keep states diverse.
                    if rng.gen::<f64>() < 0.1 {
                        break;
                    }
                    s = s.refine(&g1, &g2, a);
                }
            }
        }
        assert!(steps >= 100_000);
    }
}
