//! Three-stage trainer: supervised pre-training on complete-search targets,
//! imitation of the degree heuristic, then standard deep Q-learning with a
//! FIFO replay buffer, a periodically synchronized target network, and
//! epsilon-greedy exploration, all over a staged curriculum of graph pairs.

mod curriculum;

pub use curriculum::{Curriculum, CurriculumStage, PairSource, StandInKind};

use crate::bidomain::{Action, SearchState};
use crate::graph::Graph;
use crate::neural::{checkpoint, Adam, GradBuf, HeadMode, NetConfig, NodeId, PairEmbeddings, QNet, Tape};
use crate::policy::{degree_select, prune_candidates, PruneConfig};
use crate::search::{complete_search, CompleteOptions, TargetSample};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("net: {0}")]
    Net(#[from] crate::neural::NetError),
    #[error("empty curriculum stage {0}")]
    EmptyStage(usize),
}

/// One (s_t, a_t, r_t, s_{t+1}) record; the reward is always +1 so it is not
/// stored. States are kept as the mapping pair list and re-derived on
/// demand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transition {
    pub stage: usize,
    pub pair: usize,
    pub parent_mapping: Vec<Action>,
    pub action: Action,
    pub terminal: bool,
}

impl Transition {
    pub const REWARD: f64 = 1.0;
}

/// FIFO queue of the most recent transitions.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer { items: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.items[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_iterations: u64,
    pub pretrain_iterations: u64,
    pub imitation_iterations: u64,
    /// Iterations spent per curriculum stage before advancing.
    pub stage_iterations: u64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync_every: u64,
    pub checkpoint_every: u64,
    pub lr: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// |V1|*|V2| guard for pre-training pairs.
    pub complete_cap: usize,
    /// Expansion guard for pre-training pairs.
    pub complete_expansions: u64,
    /// Cap on retained supervision edges per pair.
    pub target_reservoir: usize,
    pub prune: PruneConfig,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_iterations: 10_000,
            pretrain_iterations: 1_250,
            imitation_iterations: 2_500,
            stage_iterations: 2_500,
            batch_size: 32,
            replay_capacity: 1_024,
            target_sync_every: 100,
            checkpoint_every: 500,
            lr: 1e-3,
            gamma: 1.0,
            epsilon_start: 0.1,
            epsilon_end: 0.01,
            complete_cap: 18 * 18,
            complete_expansions: 600_000,
            target_reservoir: 50_000,
            prune: PruneConfig::default(),
            net: NetConfig::with_labels(4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Imitation,
    Dqn,
}

#[derive(Debug, Clone, Copy)]
pub enum Behavior {
    Expert,
    EpsilonGreedy(f64),
}

fn splitmix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rebuild_state(g1: &Graph, g2: &Graph, mapping: &[Action]) -> SearchState {
    let mut s = SearchState::initial(g1, g2).expect("non-empty training graphs");
    for &a in mapping {
        s = s.refine(g1, g2, a);
    }
    s
}

enum PretrainEntry {
    Targets(Arc<Vec<TargetSample>>),
    Ineligible,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub seed: u64,
    pub net: QNet,
    target: QNet,
    adam: Adam,
    buffer: ReplayBuffer,
    pub iteration: u64,
    pairs: Vec<Vec<(Graph, Graph)>>,
    pretrain_cache: HashMap<(usize, usize), PretrainEntry>,
    target_embeds: HashMap<(usize, usize), PairEmbeddings>,
    out_dir: Option<PathBuf>,
    pub losses: Vec<f64>,
    pub skipped_pretrain_pairs: usize,
    pub syncs: u64,
}

impl Trainer {
    pub fn new(curriculum: &Curriculum, cfg: TrainConfig, seed: u64) -> Result<Trainer, TrainError> {
        let pairs = curriculum.materialize(seed)?;
        let net = QNet::new(cfg.net.clone(), splitmix(seed, 0xA11CE));
        let mut target = QNet::new(cfg.net.clone(), 0);
        target.params.copy_from(&net.params);
        let adam = Adam::new(cfg.lr, &net.params);
        let buffer = ReplayBuffer::new(cfg.replay_capacity);
        Ok(Trainer {
            cfg,
            seed,
            net,
            target,
            adam,
            buffer,
            iteration: 0,
            pairs,
            pretrain_cache: HashMap::new(),
            target_embeds: HashMap::new(),
            out_dir: None,
            losses: Vec::new(),
            skipped_pretrain_pairs: 0,
            syncs: 0,
        })
    }

    pub fn with_output(mut self, dir: &Path) -> Result<Self, TrainError> {
        std::fs::create_dir_all(dir)?;
        self.out_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    pub fn phase_of(&self, iteration: u64) -> Phase {
        if iteration < self.cfg.pretrain_iterations {
            Phase::Pretrain
        } else if iteration < self.cfg.pretrain_iterations + self.cfg.imitation_iterations {
            Phase::Imitation
        } else {
            Phase::Dqn
        }
    }

    pub fn stage_of(&self, iteration: u64) -> usize {
        ((iteration / self.cfg.stage_iterations) as usize).min(self.pairs.len().saturating_sub(1))
    }

    pub fn epsilon_of(&self, iteration: u64) -> f64 {
        let start = self.cfg.pretrain_iterations + self.cfg.imitation_iterations;
        if iteration < start {
            return self.cfg.epsilon_start;
        }
        let span = self.cfg.total_iterations.saturating_sub(start + 1).max(1) as f64;
        let progress = ((iteration - start) as f64 / span).min(1.0);
        self.cfg.epsilon_start + (self.cfg.epsilon_end - self.cfg.epsilon_start) * progress
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn pair(&self, stage: usize, idx: usize) -> (&Graph, &Graph) {
        let (a, b) = &self.pairs[stage][idx];
        (a, b)
    }

    /// Supervision targets for a pair, computed once and downsampled to the
    /// reservoir cap; pairs exceeding the complete-search guards are marked
    /// ineligible.
    fn pretrain_targets(&mut self, stage: usize, idx: usize) -> Option<Arc<Vec<TargetSample>>> {
        if let Some(entry) = self.pretrain_cache.get(&(stage, idx)) {
            return match entry {
                PretrainEntry::Targets(t) => Some(Arc::clone(t)),
                PretrainEntry::Ineligible => None,
            };
        }
        let opts = CompleteOptions {
            max_product: self.cfg.complete_cap,
            max_expansions: self.cfg.complete_expansions,
            gamma: self.cfg.gamma,
            audit: false,
        };
        let (g1, g2) = {
            let (a, b) = &self.pairs[stage][idx];
            (a.clone(), b.clone())
        };
        let entry = match complete_search(&g1, &g2, &opts) {
            Ok(mut result) => {
                let mut targets = std::mem::take(&mut result.targets);
                if targets.len() > self.cfg.target_reservoir {
                    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
                        self.seed,
                        0xF00D ^ ((stage as u64) << 32) ^ idx as u64,
                    ));
                    // Seeded reservoir keeps the retained set deterministic.
                    for k in self.cfg.target_reservoir..targets.len() {
                        let slot = rng.gen_range(0..=k);
                        if slot < self.cfg.target_reservoir {
                            targets.swap(slot, k);
                        }
                    }
                    targets.truncate(self.cfg.target_reservoir);
                }
                PretrainEntry::Targets(Arc::new(targets))
            }
            Err(err) => {
                eprintln!("pretrain: skipping pair (stage {stage}, idx {idx}): {err}");
                self.skipped_pretrain_pairs += 1;
                PretrainEntry::Ineligible
            }
        };
        self.pretrain_cache.insert((stage, idx), entry);
        match self.pretrain_cache.get(&(stage, idx)).unwrap() {
            PretrainEntry::Targets(t) => Some(Arc::clone(t)),
            PretrainEntry::Ineligible => None,
        }
    }

    /// Q(s_t, a_t) on the tape under the configured head mode.
    fn tape_q(
        &self,
        tape: &mut Tape,
        h1: NodeId,
        h2: NodeId,
        hg: Option<NodeId>,
        n1: usize,
        n2: usize,
        parent: &SearchState,
        action: Action,
        g1: &Graph,
        g2: &Graph,
    ) -> NodeId {
        match self.cfg.net.head_mode {
            HeadMode::Factored => {
                let child = parent.refine(g1, g2, action);
                self.net.tape_q_child(tape, h1, h2, n1, n2, hg, &child)
            }
            HeadMode::Unfactored => {
                self.net.tape_q_unfactored(tape, h1, h2, n1, n2, parent, action, false)
            }
            HeadMode::UnfactoredI => {
                self.net.tape_q_unfactored(tape, h1, h2, n1, n2, parent, action, true)
            }
        }
    }

    /// One supervised step on complete-search targets: sample a batch of
    /// action edges, minimize mean squared error against their exact values.
    pub fn pretrain_step(&mut self, stage: usize, idx: usize, rng: &mut ChaCha8Rng) -> Option<f64> {
        let targets = self.pretrain_targets(stage, idx)?;
        if targets.is_empty() {
            return None;
        }
        let (g1, g2) = {
            let (a, b) = &self.pairs[stage][idx];
            (a.clone(), b.clone())
        };
        let batch: Vec<&TargetSample> =
            (0..self.cfg.batch_size).map(|_| &targets[rng.gen_range(0..targets.len())]).collect();

        let mut tape = Tape::new();
        let f1 = self.cfg.net.features_for(&g1);
        let f2 = self.cfg.net.features_for(&g2);
        let h1 = self.net.tape_encode(&mut tape, &g1, &f1).expect("feature dims");
        let h2 = self.net.tape_encode(&mut tape, &g2, &f2).expect("feature dims");
        let mut sq_nodes = Vec::with_capacity(batch.len());
        for sample in &batch {
            let parent = rebuild_state(&g1, &g2, &sample.parent);
            let q = self.tape_q(
                &mut tape,
                h1,
                h2,
                None,
                g1.node_count(),
                g2.node_count(),
                &parent,
                sample.action,
                &g1,
                &g2,
            );
            let y = tape.input(crate::neural::Mat::from_vec(1, 1, vec![sample.y]));
            let diff = tape.sub(q, y);
            sq_nodes.push(tape.square(diff));
        }
        let total = tape.sum_list(sq_nodes);
        let loss = tape.scale(total, 1.0 / batch.len() as f64);
        let mut grads = GradBuf::like(&self.net.params);
        tape.backward(&[(loss, 1.0)], &mut grads);
        let loss_val = tape.scalar(loss);
        self.adam.step(&mut self.net.params, &grads);
        Some(loss_val)
    }

    /// Rolls one root-to-terminal sequence (no backtracking) and appends all
    /// transitions to the replay buffer. Returns the final mapping size.
    pub fn collect_episode(
        &mut self,
        stage: usize,
        idx: usize,
        behavior: Behavior,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let (g1, g2) = {
            let (a, b) = &self.pairs[stage][idx];
            (a.clone(), b.clone())
        };
        let embeds = match behavior {
            Behavior::EpsilonGreedy(_) => {
                Some(self.net.pair_embeddings(&g1, &g2).expect("feature dims"))
            }
            Behavior::Expert => None,
        };
        let mut state = match SearchState::initial(&g1, &g2) {
            Ok(s) => s,
            Err(_) => return 0,
        };
        loop {
            let candidates = state.action_space(&g1, &g2);
            if candidates.is_empty() {
                break;
            }
            // Sequence rollouts never trip the upper-bound prune: the bound
            // strictly exceeds the incumbent, which equals the current size.
            debug_assert!(state.upper_bound() > state.size());
            let action = match behavior {
                Behavior::Expert => degree_select(&g1, &g2, &candidates),
                Behavior::EpsilonGreedy(eps) => {
                    if rng.gen::<f64>() < eps {
                        candidates[rng.gen_range(0..candidates.len())]
                    } else {
                        let pruned =
                            prune_candidates(&g1, &g2, &state, &candidates, &self.cfg.prune);
                        let pe = embeds.as_ref().unwrap();
                        let mut best = 0usize;
                        let mut best_q = f64::NEG_INFINITY;
                        for (k, &a) in pruned.iter().enumerate() {
                            let child = state.refine(&g1, &g2, a);
                            let q = self.net.q_score(pe, &state, a, &child);
                            if q > best_q {
                                best_q = q;
                                best = k;
                            }
                        }
                        pruned[best]
                    }
                }
            };
            let child = state.refine(&g1, &g2, action);
            let terminal = child.is_terminal(&g1, &g2);
            self.buffer.push(Transition {
                stage,
                pair: idx,
                parent_mapping: state.mapping().to_vec(),
                action,
                terminal,
            });
            state = child;
        }
        state.size()
    }

    fn target_embeddings(&mut self, stage: usize, idx: usize) -> PairEmbeddings {
        if let Some(pe) = self.target_embeds.get(&(stage, idx)) {
            return pe.clone();
        }
        let (g1, g2) = {
            let (a, b) = &self.pairs[stage][idx];
            (a.clone(), b.clone())
        };
        let pe = self.target.pair_embeddings(&g1, &g2).expect("feature dims");
        self.target_embeds.insert((stage, idx), pe.clone());
        pe
    }

    /// Bootstrap target for one transition: 1 for terminal next states, else
    /// 1 + gamma * max over the next state's pruned actions of the target
    /// network's score.
    pub fn bootstrap_target(&mut self, t: &Transition) -> f64 {
        if t.terminal {
            return 1.0;
        }
        let pe = self.target_embeddings(t.stage, t.pair);
        let (g1, g2) = {
            let (a, b) = &self.pairs[t.stage][t.pair];
            (a.clone(), b.clone())
        };
        let mut next_mapping = t.parent_mapping.clone();
        next_mapping.push(t.action);
        let next = rebuild_state(&g1, &g2, &next_mapping);
        let candidates = next.action_space(&g1, &g2);
        if candidates.is_empty() {
            return 1.0;
        }
        let pruned = prune_candidates(&g1, &g2, &next, &candidates, &self.cfg.prune);
        let mut best = f64::NEG_INFINITY;
        for &a in &pruned {
            let grandchild = next.refine(&g1, &g2, a);
            best = best.max(self.target.q_score(&pe, &next, a, &grandchild));
        }
        1.0 + self.cfg.gamma * best
    }

    /// One DQN update: sample a batch, compute bootstrap targets with the
    /// target network, and take an Adam step on the mse loss.
    pub fn dqn_step(&mut self, rng: &mut ChaCha8Rng) -> Option<f64> {
        if self.buffer.is_empty() {
            return None;
        }
        let batch: Vec<Transition> = (0..self.cfg.batch_size)
            .map(|_| self.buffer.get(rng.gen_range(0..self.buffer.len())).clone())
            .collect();
        let ys: Vec<f64> = batch.iter().map(|t| self.bootstrap_target(t)).collect();

        // Group by pair so each graph is encoded once per batch; BTreeMap
        // keeps the tape order (and thus fp accumulation) deterministic.
        let mut by_pair: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (k, t) in batch.iter().enumerate() {
            by_pair.entry((t.stage, t.pair)).or_default().push(k);
        }
        let mut tape = Tape::new();
        let mut sq_nodes: Vec<NodeId> = Vec::with_capacity(batch.len());
        for (&(stage, idx), members) in &by_pair {
            let (g1, g2) = {
                let (a, b) = &self.pairs[stage][idx];
                (a.clone(), b.clone())
            };
            let f1 = self.cfg.net.features_for(&g1);
            let f2 = self.cfg.net.features_for(&g2);
            let h1 = self.net.tape_encode(&mut tape, &g1, &f1).expect("feature dims");
            let h2 = self.net.tape_encode(&mut tape, &g2, &f2).expect("feature dims");
            for &k in members {
                let t = &batch[k];
                let parent = rebuild_state(&g1, &g2, &t.parent_mapping);
                let q = self.tape_q(
                    &mut tape,
                    h1,
                    h2,
                    None,
                    g1.node_count(),
                    g2.node_count(),
                    &parent,
                    t.action,
                    &g1,
                    &g2,
                );
                let y = tape.input(crate::neural::Mat::from_vec(1, 1, vec![ys[k]]));
                let diff = tape.sub(q, y);
                sq_nodes.push(tape.square(diff));
            }
        }
        let total = tape.sum_list(sq_nodes);
        let loss = tape.scale(total, 1.0 / batch.len() as f64);
        let mut grads = GradBuf::like(&self.net.params);
        tape.backward(&[(loss, 1.0)], &mut grads);
        let loss_val = tape.scalar(loss);
        self.adam.step(&mut self.net.params, &grads);
        Some(loss_val)
    }

    /// Copies the online parameters into the target network.
    pub fn sync_target(&mut self) {
        self.target.params.copy_from(&self.net.params);
        self.target_embeds.clear();
        self.syncs += 1;
    }

    pub fn target_net(&self) -> &QNet {
        &self.target
    }

    /// Consumes the trainer, handing out the trained online network.
    pub fn into_net(self) -> QNet {
        self.net
    }

    /// Runs one training iteration (the schedule step dispatcher).
    pub fn step(&mut self) -> Result<(), TrainError> {
        let i = self.iteration;
        let stage = self.stage_of(i);
        if self.pairs[stage].is_empty() {
            return Err(TrainError::EmptyStage(stage));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.seed, i));
        let loss = match self.phase_of(i) {
            Phase::Pretrain => {
                let mut loss = None;
                let n = self.pairs[stage].len();
                let first = rng.gen_range(0..n);
                for probe in 0..n {
                    let idx = (first + probe) % n;
                    loss = self.pretrain_step(stage, idx, &mut rng);
                    if loss.is_some() {
                        break;
                    }
                }
                loss
            }
            Phase::Imitation => {
                let idx = rng.gen_range(0..self.pairs[stage].len());
                self.collect_episode(stage, idx, Behavior::Expert, &mut rng);
                self.dqn_step(&mut rng)
            }
            Phase::Dqn => {
                let idx = rng.gen_range(0..self.pairs[stage].len());
                let eps = self.epsilon_of(i);
                self.collect_episode(stage, idx, Behavior::EpsilonGreedy(eps), &mut rng);
                self.dqn_step(&mut rng)
            }
        };
        if let Some(l) = loss {
            self.losses.push(l);
        }
        self.iteration += 1;
        if self.iteration % self.cfg.target_sync_every == 0 {
            self.sync_target();
        }
        if self.iteration % self.cfg.checkpoint_every == 0 {
            self.save_state()?;
        }
        Ok(())
    }

    /// Runs to `total_iterations` and writes the final model checkpoint.
    /// Returns the path of the final model when an output dir is set.
    pub fn run(&mut self) -> Result<Option<PathBuf>, TrainError> {
        while self.iteration < self.cfg.total_iterations {
            self.step()?;
        }
        self.save_state()?;
        if let Some(dir) = self.out_dir.clone() {
            let model = dir.join("model.json");
            checkpoint::save(&self.net, &model)?;
            return Ok(Some(model));
        }
        Ok(None)
    }

    pub fn save_state(&self) -> Result<(), TrainError> {
        let Some(dir) = &self.out_dir else { return Ok(()) };
        let state = TrainState {
            version: 1,
            iteration: self.iteration,
            seed: self.seed,
            config: self.cfg.clone(),
            net: checkpoint::Checkpoint::from_net(&self.net),
            target: checkpoint::Checkpoint::from_net(&self.target),
            adam: self.adam.clone(),
            buffer: self.buffer.iter().cloned().collect(),
            syncs: self.syncs,
        };
        let file = std::fs::File::create(dir.join("train_state.json"))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &state)?;
        Ok(())
    }

    /// Resumes from the `train_state.json` written by a previous run.
    pub fn resume(curriculum: &Curriculum, dir: &Path) -> Result<Trainer, TrainError> {
        let file = std::fs::File::open(dir.join("train_state.json"))?;
        let state: TrainState = serde_json::from_reader(std::io::BufReader::new(file))?;
        let mut trainer = Trainer::new(curriculum, state.config, state.seed)?;
        trainer.net = state.net.into_net()?;
        trainer.target = state.target.into_net()?;
        trainer.adam = state.adam;
        trainer.iteration = state.iteration;
        trainer.syncs = state.syncs;
        for t in state.buffer {
            trainer.buffer.push(t);
        }
        trainer.out_dir = Some(dir.to_path_buf());
        Ok(trainer)
    }
}

#[derive(Serialize, Deserialize)]
struct TrainState {
    version: u32,
    iteration: u64,
    seed: u64,
    config: TrainConfig,
    net: checkpoint::Checkpoint,
    target: checkpoint::Checkpoint,
    adam: Adam,
    buffer: Vec<Transition>,
    syncs: u64,
}
