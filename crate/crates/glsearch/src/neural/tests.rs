use super::*;
use crate::graph::{generate_er, Graph};

fn permute_graph(g: &Graph, perm: &[u32]) -> Graph {
    let edges: Vec<(u32, u32)> =
        g.edges().iter().map(|&(u, v)| (perm[u as usize], perm[v as usize])).collect();
    let mut labels = vec![0u32; g.node_count()];
    for u in 0..g.node_count() {
        labels[perm[u] as usize] = g.label(u as u32);
    }
    Graph::from_edges_labeled(g.node_count(), &edges, labels)
}

fn zeroed(mut net: QNet) -> QNet {
    for block in 0..net.params.block_count() {
        let len = net.params.value(block).data.len();
        for idx in 0..len {
            net.params.set_coord(block, idx, 0.0);
        }
    }
    net
}

#[test]
fn encode_zero_weights_gives_zero_embedding() {
    let net = zeroed(QNet::new(NetConfig::with_labels(0), 1));
    let g = Graph::from_edges(1, &[]);
    let h = net.encode(&g, &net.cfg.features_for(&g)).unwrap();
    assert!(h.data.iter().all(|&x| x == 0.0));
}

#[test]
fn encode_is_permutation_equivariant() {
    let net = QNet::new(NetConfig::with_labels(0), 42);
    let g = generate_er(9, 0.4, 5).unwrap();
    let perm: Vec<u32> = vec![4, 7, 0, 2, 8, 1, 6, 3, 5];
    let gp = permute_graph(&g, &perm);
    let h = net.encode(&g, &net.cfg.features_for(&g)).unwrap();
    let hp = net.encode(&gp, &net.cfg.features_for(&gp)).unwrap();
    for u in 0..9 {
        let a = h.row(u);
        let b = hp.row(perm[u] as usize);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12, "node {u}: {x} vs {y}");
        }
    }
}

#[test]
fn readout_conventions() {
    let net = QNet::new(NetConfig::with_labels(0), 3);
    let src = Arc::new(Mat::from_vec(
        3,
        64,
        (0..3 * 64).map(|i| ((i as f64) * 0.37).sin()).collect(),
    ));
    let run = |rows: Vec<u32>| {
        let mut tape = Tape::new();
        let h = tape.input_shared(Arc::clone(&src));
        let out = net.readout(&mut tape, &net.ids.ro_graph, h, Arc::new(rows));
        tape.value(out).data.clone()
    };
    // Empty subset equals MLP of the zero vector.
    let empty = run(vec![]);
    let mlp_zero = {
        let mut tape = Tape::new();
        let z = tape.input(Mat::zeros(1, 64));
        let out = net.apply_mlp(&mut tape, &net.ids.ro_graph, z, LastAct::Linear);
        tape.value(out).data.clone()
    };
    assert_eq!(empty, mlp_zero);
    // Singleton equals MLP of that row.
    let single = run(vec![1]);
    let mlp_row = {
        let mut tape = Tape::new();
        let z = tape.input(Mat::row_vec(src.row(1).to_vec()));
        let out = net.apply_mlp(&mut tape, &net.ids.ro_graph, z, LastAct::Linear);
        tape.value(out).data.clone()
    };
    assert_eq!(single, mlp_row);
    // Permutations of the subset agree (up to fp summation order).
    let a = run(vec![0, 1, 2]);
    let b = run(vec![2, 0, 1]);
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn interact_is_commutative_in_both_modes() {
    for mode in [InteractMode::ConvMax, InteractMode::Sum] {
        let mut cfg = NetConfig::with_labels(0);
        cfg.interact_mode = mode;
        let net = QNet::new(cfg, 9);
        let x = Mat::row_vec((0..32).map(|i| (i as f64 * 0.11).cos()).collect());
        let y = Mat::row_vec((0..32).map(|i| (i as f64 * 0.23).sin()).collect());
        let run = |a: &Mat, b: &Mat| {
            let mut tape = Tape::new();
            let an = tape.input(a.clone());
            let bn = tape.input(b.clone());
            let out = net.apply_interact(&mut tape, &net.ids.in_graph, an, bn);
            tape.value(out).data.clone()
        };
        assert_eq!(run(&x, &y), run(&y, &x), "mode {mode:?}");
    }
}

#[test]
fn conv_output_length_is_thirty() {
    let net = QNet::new(NetConfig::with_labels(0), 4);
    let mut tape = Tape::new();
    let x = tape.input(Mat::row_vec(vec![0.5; 32]));
    let (w, b) = net.ids.in_graph.conv.unwrap();
    let wn = tape.param(&net.params, w);
    let bn = tape.param(&net.params, b);
    let out = tape.conv1d(x, wn, bn);
    assert_eq!(tape.value(out).cols, 30);
}

#[test]
fn sum_interact_with_zero_is_mlp_of_x() {
    let mut cfg = NetConfig::with_labels(0);
    cfg.interact_mode = InteractMode::Sum;
    let net = QNet::new(cfg, 12);
    let x = Mat::row_vec((0..32).map(|i| (i as f64 * 0.17).sin()).collect());
    let mut tape = Tape::new();
    let xn = tape.input(x.clone());
    let zn = tape.input(Mat::zeros(1, 32));
    let both = net.apply_interact(&mut tape, &net.ids.in_sub, xn, zn);
    let mut tape2 = Tape::new();
    let xn2 = tape2.input(x);
    let direct = net.apply_mlp(&mut tape2, &net.ids.in_sub.mlp, xn2, LastAct::Linear);
    assert_eq!(tape.value(both).data, tape2.value(direct).data);
}

#[test]
fn bidomain_embedding_examples() {
    let net = QNet::new(NetConfig::with_labels(2), 21);
    // Bonded anchors with satellites in three signature classes; the classes
    // have different neighborhoods so no automorphism collapses them.
    let g = Graph::from_edges_labeled(6, &[(0, 1), (0, 2), (1, 3), (0, 5)], vec![1, 1, 0, 0, 0, 0]);
    let pe = net.pair_embeddings(&g, &g).unwrap();
    let s = SearchState::initial(&g, &g)
        .unwrap()
        .refine(&g, &g, (0, 0))
        .refine(&g, &g, (1, 1));
    assert_eq!(s.bidomains().len(), 3);
    let embeds: Vec<Vec<f64>> =
        s.bidomains().iter().map(|bd| net.bidomain_embedding(&pe, bd)).collect();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let dist = embeds[i]
                .iter()
                .zip(embeds[j].iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dist > 1e-9, "bidomain embeddings {i} and {j} coincide");
        }
    }

    // Swapping the two sides leaves the embedding unchanged.
    let bd = &s.bidomains()[0];
    let swapped = crate::bidomain::Bidomain {
        left: bd.right.clone(),
        right: bd.left.clone(),
        signature: bd.signature.clone(),
    };
    assert_eq!(net.bidomain_embedding(&pe, bd), net.bidomain_embedding(&pe, &swapped));
}

#[test]
fn q_value_gamma_and_positivity() {
    let g1 = generate_er(6, 0.4, 1).unwrap();
    let g2 = generate_er(6, 0.4, 2).unwrap();

    let mut cfg = NetConfig::with_labels(0);
    cfg.gamma = 0.0;
    let net = QNet::new(cfg, 5);
    let pe = net.pair_embeddings(&g1, &g2).unwrap();
    let s = SearchState::initial(&g1, &g2).unwrap().refine(&g1, &g2, (0, 0));
    assert_eq!(net.q_child(&pe, &s), 1.0);

    let net = QNet::new(NetConfig::with_labels(0), 5);
    let pe = net.pair_embeddings(&g1, &g2).unwrap();
    for j in 0..6 {
        let s = SearchState::initial(&g1, &g2).unwrap().refine(&g1, &g2, (0, j));
        assert!(net.q_child(&pe, &s) > 1.0);
    }
}

#[test]
fn q_value_invariant_under_relabeling() {
    let net = QNet::new(NetConfig::with_labels(0), 31);
    let g1 = generate_er(8, 0.35, 3).unwrap();
    let g2 = generate_er(8, 0.35, 4).unwrap();
    let perm: Vec<u32> = vec![5, 2, 7, 0, 3, 6, 1, 4];
    let g1p = permute_graph(&g1, &perm);

    let pe = net.pair_embeddings(&g1, &g2).unwrap();
    let pep = net.pair_embeddings(&g1p, &g2).unwrap();
    let s0 = SearchState::initial(&g1, &g2).unwrap();
    let s0p = SearchState::initial(&g1p, &g2).unwrap();
    for action in s0.action_space(&g1, &g2).into_iter().take(8) {
        let child = s0.refine(&g1, &g2, action);
        let childp = s0p.refine(&g1p, &g2, (perm[action.0 as usize], action.1));
        let q = net.q_child(&pe, &child);
        let qp = net.q_child(&pep, &childp);
        assert!((q - qp).abs() < 1e-9, "{q} vs {qp}");
    }
}

#[test]
fn unfactored_head_examples() {
    let g1 = generate_er(5, 0.5, 11).unwrap();
    let g2 = generate_er(6, 0.5, 12).unwrap();

    // Zero weights: every action scores the same constant.
    let mut cfg = NetConfig::with_labels(0);
    cfg.head_mode = HeadMode::Unfactored;
    let net = zeroed(QNet::new(cfg.clone(), 1));
    let pe = net.pair_embeddings(&g1, &g2).unwrap();
    let s0 = SearchState::initial(&g1, &g2).unwrap();
    let scores: Vec<f64> = s0
        .action_space(&g1, &g2)
        .into_iter()
        .map(|a| {
            let child = s0.refine(&g1, &g2, a);
            net.q_score(&pe, &s0, a, &child)
        })
        .collect();
    assert!(scores.windows(2).all(|w| w[0] == w[1]));

    // Generic weights: swapping the graphs changes the unfactored score but
    // not the interacted one.
    let net = QNet::new(cfg.clone(), 77);
    let pe = net.pair_embeddings(&g1, &g2).unwrap();
    let pe_swap = net.pair_embeddings(&g2, &g1).unwrap();
    let s0 = SearchState::initial(&g1, &g2).unwrap();
    let s0_swap = SearchState::initial(&g2, &g1).unwrap();
    let action = (0u32, 1u32);
    let child = s0.refine(&g1, &g2, action);
    let child_swap = s0_swap.refine(&g2, &g1, (1, 0));
    let q = net.q_score(&pe, &s0, action, &child);
    let q_swap = net.q_score(&pe_swap, &s0_swap, (1, 0), &child_swap);
    assert!((q - q_swap).abs() > 1e-9, "unfactored head should be order sensitive");

    cfg.head_mode = HeadMode::UnfactoredI;
    let net = QNet::new(cfg, 77);
    let pe = net.pair_embeddings(&g1, &g2).unwrap();
    let pe_swap = net.pair_embeddings(&g2, &g1).unwrap();
    let q = net.q_score(&pe, &s0, action, &child);
    let q_swap = net.q_score(&pe_swap, &s0_swap, (1, 0), &child_swap);
    assert!((q - q_swap).abs() < 1e-12, "interacted head must be order invariant");
}

#[test]
fn backward_zero_seed_gives_zero_gradients() {
    let net = QNet::new(NetConfig::with_labels(0), 8);
    let g = generate_er(5, 0.5, 3).unwrap();
    let mut tape = Tape::new();
    let h1 = net.tape_encode(&mut tape, &g, &net.cfg.features_for(&g)).unwrap();
    let h2 = net.tape_encode(&mut tape, &g, &net.cfg.features_for(&g)).unwrap();
    let s = SearchState::initial(&g, &g).unwrap().refine(&g, &g, (1, 1));
    let q = net.tape_q_child(&mut tape, h1, h2, 5, 5, None, &s);
    let mut grads = GradBuf::like(&net.params);
    tape.backward(&[(q, 0.0)], &mut grads);
    assert_eq!(grads.max_abs(), 0.0);
}

#[test]
fn shared_graph_embedding_matches_recomputation() {
    // Caching hG (or reusing one encode across several actions) must leave
    // gradients identical to rebuilding the whole computation per action.
    let net = QNet::new(NetConfig::with_labels(0), 17);
    let g1 = generate_er(6, 0.4, 21).unwrap();
    let g2 = generate_er(6, 0.4, 22).unwrap();
    let s0 = SearchState::initial(&g1, &g2).unwrap();
    let actions = [(0u32, 0u32), (1, 2)];

    let shared = {
        let mut tape = Tape::new();
        let h1 = net.tape_encode(&mut tape, &g1, &net.cfg.features_for(&g1)).unwrap();
        let h2 = net.tape_encode(&mut tape, &g2, &net.cfg.features_for(&g2)).unwrap();
        let mut grads = GradBuf::like(&net.params);
        let seeds: Vec<(NodeId, f64)> = actions
            .iter()
            .map(|&a| (net.tape_q_child(&mut tape, h1, h2, 6, 6, None, &s0.refine(&g1, &g2, a)), 1.0))
            .collect();
        tape.backward(&seeds, &mut grads);
        grads
    };

    let mut separate = GradBuf::like(&net.params);
    for &a in &actions {
        let mut tape = Tape::new();
        let h1 = net.tape_encode(&mut tape, &g1, &net.cfg.features_for(&g1)).unwrap();
        let h2 = net.tape_encode(&mut tape, &g2, &net.cfg.features_for(&g2)).unwrap();
        let q = net.tape_q_child(&mut tape, h1, h2, 6, 6, None, &s0.refine(&g1, &g2, a));
        tape.backward(&[(q, 1.0)], &mut separate);
    }

    for block in 0..net.params.block_count() {
        let a = shared.value(block);
        let b = separate.value(block);
        for (x, y) in a.data.iter().zip(b.data.iter()) {
            assert!((x - y).abs() < 1e-12, "block {block}");
        }
    }
}

#[test]
fn determinism_within_build() {
    let net = QNet::new(NetConfig::with_labels(0), 40);
    let g1 = generate_er(7, 0.3, 8).unwrap();
    let g2 = generate_er(7, 0.3, 9).unwrap();
    let pe = net.pair_embeddings(&g1, &g2).unwrap();
    let s = SearchState::initial(&g1, &g2).unwrap().refine(&g1, &g2, (2, 3));
    assert_eq!(net.q_child(&pe, &s).to_bits(), net.q_child(&pe, &s).to_bits());
}
