//! Staged training pair sources.
//!
//! Each stage lists pair sources with a pair count; pairs are materialized
//! deterministically from the master seed. Real-dataset slots fall back to
//! synthetic stand-ins of matching size unless an edge-list directory is
//! supplied.

use super::TrainError;
use crate::graph::{generate_ba, generate_er, generate_ws, load_edge_list, Graph};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandInKind {
    Aids,
    Linux,
    Ptc,
    Imdb,
    Mutag,
    Reddit,
    Web,
    Mcsplain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Ba { n: usize, edges_per_node: usize },
    Er { n: usize, p: f64 },
    Ws { n: usize, ring_density: usize, rewire_p: f64 },
    /// Synthetic stand-in for a named dataset slot.
    StandIn(StandInKind),
    /// Directory of edge-list files; pairs are consecutive files.
    EdgeListDir(PathBuf),
}

impl PairSource {
    /// One graph drawn from this source, deterministic in `seed`.
    pub fn generate(&self, seed: u64) -> Result<Graph, TrainError> {
        generate_one(self, seed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub sources: Vec<(PairSource, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Curriculum {
    pub stages: Vec<CurriculumStage>,
}

impl Curriculum {
    /// The four synthetic rows per stage: BA/ER/WS with the published
    /// per-stage parameters, 20 pairs each.
    pub fn synthetic() -> Curriculum {
        let stage = |ba: (usize, usize), er: (usize, f64), ws: (usize, usize, f64)| CurriculumStage {
            sources: vec![
                (PairSource::Ba { n: ba.0, edges_per_node: ba.1 }, 20),
                (PairSource::Er { n: er.0, p: er.1 }, 20),
                (PairSource::Ws { n: ws.0, ring_density: ws.1, rewire_p: ws.2 }, 20),
            ],
        };
        Curriculum {
            stages: vec![
                stage((16, 5), (14, 0.14), (18, 2, 0.2)),
                stage((32, 4), (30, 0.12), (34, 2, 0.2)),
                stage((48, 4), (46, 0.1), (50, 4, 0.2)),
                stage((62, 3), (64, 0.08), (66, 4, 0.2)),
            ],
        }
    }

    /// Synthetic rows plus stand-ins for the real-dataset slots (30 pairs
    /// each), mirroring the four-stage layout.
    pub fn full() -> Curriculum {
        let mut c = Curriculum::synthetic();
        let real: [(StandInKind, StandInKind); 4] = [
            (StandInKind::Aids, StandInKind::Linux),
            (StandInKind::Ptc, StandInKind::Imdb),
            (StandInKind::Mutag, StandInKind::Reddit),
            (StandInKind::Web, StandInKind::Mcsplain),
        ];
        for (stage, (a, b)) in c.stages.iter_mut().zip(real) {
            stage.sources.insert(0, (PairSource::StandIn(b), 30));
            stage.sources.insert(0, (PairSource::StandIn(a), 30));
        }
        c
    }

    /// Generates every pair of every stage deterministically from `seed`.
    pub fn materialize(&self, seed: u64) -> Result<Vec<Vec<(Graph, Graph)>>, TrainError> {
        let mut stages = Vec::with_capacity(self.stages.len());
        for (si, stage) in self.stages.iter().enumerate() {
            let mut pairs = Vec::new();
            for (qi, (source, count)) in stage.sources.iter().enumerate() {
                for k in 0..*count {
                    let salt = ((si as u64) << 48) | ((qi as u64) << 32) | k as u64;
                    let s1 = super::splitmix(seed, salt.wrapping_mul(2));
                    let s2 = super::splitmix(seed, salt.wrapping_mul(2) + 1);
                    pairs.push((generate_one(source, s1)?, generate_one(source, s2)?));
                }
            }
            stages.push(pairs);
        }
        Ok(stages)
    }
}

fn labeled(mut g: Graph, n_labels: u32, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u32> = (0..g.node_count()).map(|_| rng.gen_range(0..n_labels)).collect();
    let edges = g.edges();
    let name = std::mem::take(&mut g.name);
    Graph::from_edges_labeled(g.node_count(), &edges, labels).with_name(name)
}

fn generate_one(source: &PairSource, seed: u64) -> Result<Graph, TrainError> {
    let gen_err = |e: crate::graph::GraphError| {
        TrainError::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match source {
        PairSource::Ba { n, edges_per_node } => {
            generate_ba(*n, *edges_per_node, rng.gen()).map_err(gen_err)?
        }
        PairSource::Er { n, p } => generate_er(*n, *p, rng.gen()).map_err(gen_err)?,
        PairSource::Ws { n, ring_density, rewire_p } => {
            generate_ws(*n, *ring_density, *rewire_p, rng.gen()).map_err(gen_err)?
        }
        PairSource::StandIn(kind) => stand_in(*kind, &mut rng).map_err(gen_err)?,
        PairSource::EdgeListDir(dir) => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(TrainError::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("no edge-list files in {}", dir.display()),
                )));
            }
            let path = &files[rng.gen_range(0..files.len())];
            let text = std::fs::read_to_string(path)?;
            load_edge_list(&text).map_err(gen_err)?
        }
    })
}

/// Size- and density-matched synthetic substitutes for the dataset slots.
fn stand_in(kind: StandInKind, rng: &mut ChaCha8Rng) -> Result<Graph, crate::graph::GraphError> {
    let seed: u64 = rng.gen();
    Ok(match kind {
        // Small labeled chemical compounds.
        StandInKind::Aids => {
            let n = rng.gen_range(6..=10);
            labeled(generate_er(n, 0.35, seed)?, 4, seed ^ 1)
        }
        // Small sparse program dependency graphs.
        StandInKind::Linux => generate_ba(rng.gen_range(6..=10), 1, seed)?,
        // Mid-size labeled compounds.
        StandInKind::Ptc => {
            let n = rng.gen_range(12..=25);
            labeled(generate_er(n, 2.5 / n as f64, seed)?, 4, seed ^ 1)
        }
        // Dense actor ego networks.
        StandInKind::Imdb => generate_ba(rng.gen_range(12..=20), 4, seed)?,
        // Ring-heavy labeled molecules.
        StandInKind::Mutag => {
            let n = rng.gen_range(14..=20);
            labeled(generate_ws(n, 2, 0.1, seed)?, 4, seed ^ 1)
        }
        // Discussion-thread ego networks.
        StandInKind::Reddit => generate_ba(rng.gen_range(24..=40), 2, seed)?,
        // Text document graphs.
        StandInKind::Web => generate_ba(rng.gen_range(40..=60), 2, seed)?,
        // The benchmark generator's plain random pairs.
        StandInKind::Mcsplain => generate_er(rng.gen_range(25..=35), 0.12, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_stage_parameters() {
        let c = Curriculum::synthetic();
        assert_eq!(c.stages.len(), 4);
        let pairs = c.materialize(7).unwrap();
        assert_eq!(pairs[0].len(), 60);
        // Curriculum 1 sizes: BA 16, ER 14, WS 18.
        assert_eq!(pairs[0][0].0.node_count(), 16);
        assert_eq!(pairs[0][20].0.node_count(), 14);
        assert_eq!(pairs[0][40].0.node_count(), 18);
        // Curriculum 4 sizes: BA 62, ER 64, WS 66.
        assert_eq!(pairs[3][0].0.node_count(), 62);
        assert_eq!(pairs[3][20].0.node_count(), 64);
        assert_eq!(pairs[3][40].0.node_count(), 66);
    }

    #[test]
    fn materialize_is_deterministic() {
        let c = Curriculum::synthetic();
        let a = c.materialize(9).unwrap();
        let b = c.materialize(9).unwrap();
        assert_eq!(a[2][5].0.edges(), b[2][5].0.edges());
        assert_eq!(a[2][5].1.edges(), b[2][5].1.edges());
        // The two sides of a pair are independent draws.
        assert_ne!(a[0][0].0.edges(), a[0][0].1.edges());
    }

    #[test]
    fn full_curriculum_has_dataset_slots() {
        let c = Curriculum::full();
        let pairs = c.materialize(3).unwrap();
        for stage in &pairs {
            assert_eq!(stage.len(), 120);
        }
        // Aids stand-ins are small and labeled.
        let (g1, _) = &pairs[0][0];
        assert!(g1.node_count() <= 10);
        assert!(g1.is_labeled());
    }
}
