//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use glsearch::bench::{run_bench, BenchDataset, BenchSpec, PolicyKind};
use glsearch::bidomain::{Action, SearchState};
use glsearch::graph::{generate_er, Graph};
use glsearch::neural::{HeadMode, NetConfig, QNet};
use glsearch::policy::{
    degree_select, DegreePolicy, LearnedPolicy, Policy, RandomPolicy, ScoreRlPolicy, SelectCtx,
};
use glsearch::search::{complete_search, mcs_oracle, search, Budget, CompleteOptions};
use glsearch::train::{Curriculum, TrainConfig, Trainer};
use glsearch::verify;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("[{}] {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let mut labeled = 0;
    for idx in 0..200 {
        let (g1, g2) = verify::small_pair(0xC1, idx);
        if g1.is_labeled() {
            labeled += 1;
        }
        let cs = complete_search(&g1, &g2, &CompleteOptions::default()).unwrap().size;
        let oracle = mcs_oracle(&g1, &g2).unwrap();
        assert_eq!(cs, oracle, "pair {idx} disagrees");
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "criterion 1 (oracle equivalence)",
        labeled >= 50 && secs < 120.0,
        &format!("200 pairs exact ({labeled} labeled), {secs:.1}s"),
    );
}

#[test]
fn criterion_2_ub_admissibility() {
    let start = Instant::now();
    let result = verify::ub_admissibility(50, 7, 0xC2);
    let secs = start.elapsed().as_secs_f64();
    report(
        "criterion 2 (UB admissibility)",
        result.pass && secs < 300.0,
        &format!("{} in {secs:.1}s", result.detail),
    );
}

#[test]
fn criterion_3_isomorphism_invariant() {
    let result = verify::isomorphism_suite(100_000, 0xC3);
    report("criterion 3 (isomorphism invariant)", result.pass, &result.detail);
}

/// Expands candidates in a fixed id order; `reverse` flips the order, so one
/// variant reaches the deep branch of the fixture first and the other last.
struct OrderedPolicy {
    reverse: bool,
}

impl Policy for OrderedPolicy {
    fn name(&self) -> &'static str {
        "ordered"
    }

    fn select(&mut self, ctx: &SelectCtx) -> Action {
        let it = ctx.candidates.iter();
        *(if self.reverse { it.max() } else { it.min() }).unwrap()
    }
}

#[test]
fn criterion_4_figure_ordering() {
    let (g1, g2) = verify::deep_shallow_pair();

    // The fixture reproduces the published target values: the deep root
    // action is worth 5 future pairs, the shallow one 4.
    let targets = complete_search(&g1, &g2, &CompleteOptions::default()).unwrap();
    assert_eq!(targets.size, 5);
    let map = targets.target_map();
    assert_eq!(map[&(vec![], (1, 1))], 5.0);
    assert_eq!(map[&(vec![], (0, 0))], 4.0);

    let deep_first = search(&g1, &g2, &mut OrderedPolicy { reverse: true }, &Budget::unlimited(), false);
    let shallow_first = search(&g1, &g2, &mut OrderedPolicy { reverse: false }, &Budget::unlimited(), false);
    assert_eq!(deep_first.best_size, 5);
    assert_eq!(shallow_first.best_size, 5);
    let deep_iters = deep_first.iterations_to_best().unwrap();
    let shallow_iters = shallow_first.iterations_to_best().unwrap();
    report(
        "criterion 4 (deep-branch-first ordering)",
        deep_iters < shallow_iters,
        &format!(
            "incumbent 5 reached at iteration {deep_iters} (deep first) vs {shallow_iters} (reverse)"
        ),
    );
}

#[test]
fn criterion_5_gradient_correctness() {
    let start = Instant::now();
    let mut net = QNet::new(NetConfig::with_labels(0), 0xC5);
    let (err, blocks) = verify::gradient_max_rel_err(&mut net, 0x5EED, 20);
    let secs = start.elapsed().as_secs_f64();
    report(
        "criterion 5 (gradient correctness)",
        err < 1e-4 && secs < 60.0,
        &format!("max rel err {err:.3e} over {blocks} blocks, {secs:.1}s"),
    );
}

fn permute_graph(g: &Graph, perm: &[u32]) -> Graph {
    let edges: Vec<(u32, u32)> =
        g.edges().iter().map(|&(u, v)| (perm[u as usize], perm[v as usize])).collect();
    let mut labels = vec![0u32; g.node_count()];
    for u in 0..g.node_count() {
        labels[perm[u] as usize] = g.label(u as u32);
    }
    Graph::from_edges_labeled(g.node_count(), &edges, labels)
}

fn factored_scores(net: &QNet, g1: &Graph, g2: &Graph, state: &SearchState, actions: &[Action]) -> Vec<f64> {
    let pe = net.pair_embeddings(g1, g2).unwrap();
    actions.iter().map(|&a| net.q_child(&pe, &state.refine(g1, g2, a))).collect()
}

#[test]
fn criterion_6_symmetry_suite() {
    let net = QNet::new(NetConfig::with_labels(0), 0xC6);
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let mut states_checked = 0;
    while states_checked < 100 {
        let n1 = rng.gen_range(5..=8);
        let n2 = rng.gen_range(5..=8);
        let g1 = generate_er(n1, 0.4, rng.gen()).unwrap();
        let g2 = generate_er(n2, 0.4, rng.gen()).unwrap();
        let mut state = SearchState::initial(&g1, &g2).unwrap();
        for _ in 0..rng.gen_range(0..3) {
            let acts = state.action_space(&g1, &g2);
            if acts.is_empty() {
                break;
            }
            state = state.refine(&g1, &g2, acts[rng.gen_range(0..acts.len())]);
        }
        let actions = state.action_space(&g1, &g2);
        if actions.is_empty() {
            continue;
        }
        states_checked += 1;

        let scores = factored_scores(&net, &g1, &g2, &state, &actions);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        // (a) Swap the input graphs, mirroring the mapping and actions.
        let mut mirrored = SearchState::initial(&g2, &g1).unwrap();
        for &(i, j) in state.mapping() {
            mirrored = mirrored.refine(&g2, &g1, (j, i));
        }
        let mirrored_actions: Vec<Action> = actions.iter().map(|&(i, j)| (j, i)).collect();
        let swap_scores = factored_scores(&net, &g2, &g1, &mirrored, &mirrored_actions);
        for (k, (a, b)) in scores.iter().zip(swap_scores.iter()).enumerate() {
            assert!((a - b).abs() <= 1e-9, "swap changed score {k}: {a} vs {b}");
        }
        let swap_argmax = swap_scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((scores[swap_argmax] - max).abs() <= 1e-9, "swap moved the argmax");

        // (b) Relabel the first graph by a random permutation.
        let mut perm: Vec<u32> = (0..n1 as u32).collect();
        perm.shuffle(&mut rng);
        let g1p = permute_graph(&g1, &perm);
        let mut permuted = SearchState::initial(&g1p, &g2).unwrap();
        for &(i, j) in state.mapping() {
            permuted = permuted.refine(&g1p, &g2, (perm[i as usize], j));
        }
        let perm_actions: Vec<Action> =
            actions.iter().map(|&(i, j)| (perm[i as usize], j)).collect();
        let perm_scores = factored_scores(&net, &g1p, &g2, &permuted, &perm_actions);
        for (k, (a, b)) in scores.iter().zip(perm_scores.iter()).enumerate() {
            assert!((a - b).abs() <= 1e-9, "permutation changed score {k}: {a} vs {b}");
        }
        let perm_argmax = perm_scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((scores[perm_argmax] - max).abs() <= 1e-9, "permutation moved the argmax");
    }

    // The Eq.-1 head must be demonstrably order sensitive on at least one
    // constructed state.
    let mut cfg = NetConfig::with_labels(0);
    cfg.head_mode = HeadMode::Unfactored;
    let unf = QNet::new(cfg, 77);
    let g1 = generate_er(5, 0.5, 11).unwrap();
    let g2 = generate_er(6, 0.5, 12).unwrap();
    let s0 = SearchState::initial(&g1, &g2).unwrap();
    let s0_swap = SearchState::initial(&g2, &g1).unwrap();
    let pe = unf.pair_embeddings(&g1, &g2).unwrap();
    let pe_swap = unf.pair_embeddings(&g2, &g1).unwrap();
    let mut violated = false;
    for action in s0.action_space(&g1, &g2) {
        let child = s0.refine(&g1, &g2, action);
        let child_swap = s0_swap.refine(&g2, &g1, (action.1, action.0));
        let q = unf.q_score(&pe, &s0, action, &child);
        let q_swap = unf.q_score(&pe_swap, &s0_swap, (action.1, action.0), &child_swap);
        if (q - q_swap).abs() > 1e-9 {
            violated = true;
            break;
        }
    }
    report(
        "criterion 6 (symmetry suite)",
        violated,
        &format!("{states_checked} states swap/permutation invariant; unfactored head violates swap"),
    );
}

#[test]
fn criterion_7_degeneration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut agree = 0;
    for _ in 0..100 {
        let n1 = rng.gen_range(5..=30);
        let n2 = rng.gen_range(5..=30);
        let g1 = generate_er(n1, 0.25, rng.gen()).unwrap();
        let g2 = generate_er(n2, 0.25, rng.gen()).unwrap();
        let state = SearchState::initial(&g1, &g2).unwrap();
        let candidates = state.action_space(&g1, &g2);
        if candidates.is_empty() {
            agree += 1;
            continue;
        }
        let mut fresh = ScoreRlPolicy::new();
        fresh.reset(&g1, &g2);
        let ctx = SelectCtx { g1: &g1, g2: &g2, state: &state, candidates: &candidates };
        if fresh.select(&ctx) == degree_select(&g1, &g2, &candidates) {
            agree += 1;
        }
    }
    report(
        "criterion 7 (first-move degeneration)",
        agree == 100,
        &format!("{agree}/100 fresh pairs pick the degree move"),
    );
}

fn held_out_means(net: &Arc<QNet>, eval_seed: u64) -> (f64, f64, f64) {
    let budget = Budget::iterations(500);
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed);
    let (mut learned_sum, mut degree_sum, mut random_sum) = (0.0, 0.0, 0.0);
    let pairs = 20;
    for _ in 0..pairs {
        let g1 = generate_er(50, 0.08, rng.gen()).unwrap();
        let g2 = generate_er(50, 0.08, rng.gen()).unwrap();

        let mut learned = LearnedPolicy::new(Arc::clone(net));
        learned_sum += search(&g1, &g2, &mut learned, &budget, true).best_size as f64;

        degree_sum += search(&g1, &g2, &mut DegreePolicy, &budget, false).best_size as f64;

        let mut random = RandomPolicy::new(rng.gen());
        random_sum += search(&g1, &g2, &mut random, &budget, true).best_size as f64;
    }
    (learned_sum / pairs as f64, degree_sum / pairs as f64, random_sum / pairs as f64)
}

#[test]
fn criterion_8_directional_training() {
    let start = Instant::now();
    let curriculum = Curriculum::synthetic();
    let mut passes = 0;
    let mut fails = 0;
    let mut lines = Vec::new();
    for seed in 1..=3u64 {
        let cfg = TrainConfig { net: NetConfig::with_labels(0), ..TrainConfig::default() };
        let mut trainer = Trainer::new(&curriculum, cfg, seed).unwrap();
        trainer.run().unwrap();
        let net = Arc::new(trainer.into_net());

        let (learned, degree, random) = held_out_means(&net, 0xE7A1 ^ seed);
        let ok = learned >= degree && learned >= random;
        lines.push(format!(
            "seed {seed}: mean sizes learned {learned:.2} | degree {degree:.2} | random {random:.2} -> {}",
            if ok { "pass" } else { "fail" }
        ));
        if ok {
            passes += 1;
        } else {
            fails += 1;
        }
        if passes >= 2 || fails >= 2 {
            break;
        }
    }
    let hours = start.elapsed().as_secs_f64() / 3600.0;
    for l in &lines {
        println!("  {l}");
    }
    report(
        "criterion 8 (directional training)",
        passes >= 2 && hours <= 4.0,
        &format!("{passes} of {} seeds pass in {hours:.2}h", passes + fails),
    );
}

#[test]
fn criterion_9_promise_soundness() {
    // Exactness: identical exact sizes with promise on and off.
    for idx in 0..50 {
        let (g1, g2) = verify::small_pair(0xC9, idx);
        let off = search(&g1, &g2, &mut DegreePolicy, &Budget::unlimited(), false);
        let on = search(&g1, &g2, &mut DegreePolicy, &Budget::unlimited(), true);
        assert!(off.completed && on.completed);
        assert_eq!(off.best_size, on.best_size, "pair {idx}: promise changed the exact size");
    }

    // Anytime quality on medium pairs.
    let budget = Budget::iterations(500);
    let mut rng = ChaCha8Rng::seed_from_u64(0x909);
    let (mut on_sum, mut off_sum) = (0usize, 0usize);
    for _ in 0..10 {
        let g1 = generate_er(100, 0.08, rng.gen()).unwrap();
        let g2 = generate_er(100, 0.08, rng.gen()).unwrap();
        off_sum += search(&g1, &g2, &mut DegreePolicy, &budget, false).best_size;
        on_sum += search(&g1, &g2, &mut DegreePolicy, &budget, true).best_size;
    }
    report(
        "criterion 9 (promise soundness)",
        on_sum >= off_sum,
        &format!(
            "50 exact sizes identical; mean incumbent promise-on {:.1} vs off {:.1}",
            on_sum as f64 / 10.0,
            off_sum as f64 / 10.0
        ),
    );
}

#[test]
fn criterion_10_bench_determinism() {
    let spec = BenchSpec {
        datasets: vec![BenchDataset {
            name: "er20".into(),
            source: glsearch::train::PairSource::Er { n: 20, p: 0.2 },
            pairs: 6,
        }],
        policies: vec![PolicyKind::Degree, PolicyKind::Scorerl, PolicyKind::Random],
        budget_iterations: Some(200),
        budget_seconds: None,
        seed: 0xC10,
        promise: false,
        checkpoint: None,
        workers: None,
    };
    let base = std::env::temp_dir().join(format!("glsearch_acc10_{}", std::process::id()));
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    run_bench(&spec, Some(&dir_a)).unwrap();
    run_bench(&spec, Some(&dir_b)).unwrap();
    let a = std::fs::read(dir_a.join("table.csv")).unwrap();
    let b = std::fs::read(dir_b.join("table.csv")).unwrap();
    let identical = a == b;
    let _ = std::fs::remove_dir_all(&base);
    report(
        "criterion 10 (bench determinism)",
        identical,
        &format!("table.csv byte-identical across runs ({} bytes)", a.len()),
    );
}
