//! Benchmark harness: runs every policy on identical pairs and budgets,
//! aggregates ratio tables, and writes anytime curves as CSV.

use crate::graph::{load_edge_list, load_json, Graph, GraphError};
use crate::neural::{checkpoint, QNet};
use crate::policy::{DegreePolicy, LearnedPolicy, Policy, RandomPolicy, ScoreRlPolicy};
use crate::search::{search, validate_result, Budget, SearchResult};
use crate::train::{PairSource, TrainError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("train: {0}")]
    Train(#[from] TrainError),
    #[error("net: {0}")]
    Net(#[from] crate::neural::NetError),
    #[error("{0}")]
    Spec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Degree,
    Scorerl,
    Random,
    Learned,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Degree => "degree",
            PolicyKind::Scorerl => "scorerl",
            PolicyKind::Random => "random",
            PolicyKind::Learned => "learned",
        }
    }

    pub fn build(&self, seed: u64, net: Option<&Arc<QNet>>) -> Result<Box<dyn Policy>, BenchError> {
        Ok(match self {
            PolicyKind::Degree => Box::new(DegreePolicy),
            PolicyKind::Scorerl => Box::new(ScoreRlPolicy::new()),
            PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
            PolicyKind::Learned => {
                let net = net.ok_or_else(|| {
                    BenchError::Spec("policy `learned` requires a checkpoint".into())
                })?;
                Box::new(LearnedPolicy::new(Arc::clone(net)))
            }
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree" => Ok(PolicyKind::Degree),
            "scorerl" => Ok(PolicyKind::Scorerl),
            "random" => Ok(PolicyKind::Random),
            "learned" => Ok(PolicyKind::Learned),
            other => Err(format!("unknown policy `{other}` (degree|scorerl|random|learned)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchDataset {
    pub name: String,
    pub source: PairSource,
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    pub datasets: Vec<BenchDataset>,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub budget_iterations: Option<u64>,
    #[serde(default)]
    pub budget_seconds: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub promise: bool,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl BenchSpec {
    /// The Table-style protocol for one synthetic dataset: 50 pairs at 500
    /// iterations over all four policies.
    pub fn synthetic_protocol(name: &str, source: PairSource, seed: u64) -> BenchSpec {
        BenchSpec {
            datasets: vec![BenchDataset { name: name.to_string(), source, pairs: 50 }],
            policies: vec![PolicyKind::Degree, PolicyKind::Scorerl, PolicyKind::Random],
            budget_iterations: Some(500),
            budget_seconds: None,
            seed,
            promise: false,
            checkpoint: None,
            workers: None,
        }
    }

    pub fn budget(&self) -> Budget {
        Budget { max_iterations: self.budget_iterations, max_seconds: self.budget_seconds }
    }
}

/// Mean solution sizes plus ratios against the per-dataset best.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioTable {
    pub datasets: Vec<String>,
    pub policies: Vec<String>,
    /// mean_sizes[policy][dataset]
    pub mean_sizes: Vec<Vec<f64>>,
    pub best: Vec<f64>,
}

impl RatioTable {
    pub fn ratio(&self, policy: usize, dataset: usize) -> f64 {
        let best = self.best[dataset];
        if best > 0.0 {
            self.mean_sizes[policy][dataset] / best
        } else {
            1.0
        }
    }

    pub fn mean(&self, policy_name: &str, dataset: usize) -> Option<f64> {
        let p = self.policies.iter().position(|p| p == policy_name)?;
        Some(self.mean_sizes[p][dataset])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        for d in &self.datasets {
            out.push(',');
            out.push_str(d);
        }
        out.push('\n');
        for (p, name) in self.policies.iter().enumerate() {
            out.push_str(name);
            for d in 0..self.datasets.len() {
                out.push_str(&format!(",{:.3}", self.ratio(p, d)));
            }
            out.push('\n');
        }
        out.push_str("best_solution_size");
        for d in 0..self.datasets.len() {
            out.push_str(&format!(",{:.2}", self.best[d]));
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchCell {
    pub dataset: String,
    pub pair: usize,
    pub policy: String,
    pub size: usize,
    pub iterations: u64,
    pub completed: bool,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct BenchReport {
    pub table: RatioTable,
    pub cells: Vec<BenchCell>,
}

fn splitmix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the full (pair x policy) grid. When `out` is given, writes
/// `table.csv`, `meta.json` and one `curves/<dataset>_<pair>_<policy>.csv`
/// per cell.
pub fn run_bench(spec: &BenchSpec, out: Option<&Path>) -> Result<BenchReport, BenchError> {
    let net: Option<Arc<QNet>> = match &spec.checkpoint {
        Some(path) => Some(Arc::new(checkpoint::load(path)?)),
        None => {
            if spec.policies.contains(&PolicyKind::Learned) {
                return Err(BenchError::Spec("policy `learned` requires a checkpoint".into()));
            }
            None
        }
    };

    // Materialize all pairs first so every policy sees identical inputs.
    let mut pairs: Vec<(usize, usize, Graph, Graph)> = Vec::new();
    for (di, ds) in spec.datasets.iter().enumerate() {
        for k in 0..ds.pairs {
            let salt = ((di as u64) << 32) | k as u64;
            let g1 = ds.source.generate(splitmix(spec.seed, salt.wrapping_mul(2)))?;
            let g2 = ds.source.generate(splitmix(spec.seed, salt.wrapping_mul(2) + 1))?;
            pairs.push((di, k, g1, g2));
        }
    }

    struct Cell<'a> {
        di: usize,
        pair: usize,
        pi: usize,
        g1: &'a Graph,
        g2: &'a Graph,
    }
    let cells: Vec<Cell> = pairs
        .iter()
        .flat_map(|(di, k, g1, g2)| {
            spec.policies
                .iter()
                .enumerate()
                .map(move |(pi, _)| Cell { di: *di, pair: *k, pi, g1, g2 })
        })
        .collect();

    let budget = spec.budget();
    let run_cell = |cell: &Cell| -> (Result<SearchResult, String>, String) {
        let kind = spec.policies[cell.pi];
        let cell_seed = splitmix(
            spec.seed,
            0xBE1C ^ ((cell.di as u64) << 40) ^ ((cell.pair as u64) << 8) ^ cell.pi as u64,
        );
        match kind.build(cell_seed, net.as_ref()) {
            Ok(mut policy) => {
                let result = search(cell.g1, cell.g2, policy.as_mut(), &budget, spec.promise);
                match validate_result(cell.g1, cell.g2, &result) {
                    Ok(()) => (Ok(result), kind.name().to_string()),
                    Err(e) => (Err(e), kind.name().to_string()),
                }
            }
            Err(e) => (Err(e.to_string()), kind.name().to_string()),
        }
    };

    let results: Vec<(Result<SearchResult, String>, String)> = match spec.workers {
        Some(1) => cells.iter().map(run_cell).collect(),
        width => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(width.unwrap_or(0))
                .build()
                .map_err(|e| BenchError::Spec(e.to_string()))?;
            pool.install(|| cells.par_iter().map(run_cell).collect())
        }
    };

    let mut cell_rows = Vec::with_capacity(cells.len());
    let mut sums = vec![vec![0.0f64; spec.datasets.len()]; spec.policies.len()];
    let mut counts = vec![vec![0usize; spec.datasets.len()]; spec.policies.len()];
    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("curves"))?;
    }
    for (cell, (outcome, policy_name)) in cells.iter().zip(results.iter()) {
        let ds_name = &spec.datasets[cell.di].name;
        match outcome {
            Ok(result) => {
                sums[cell.pi][cell.di] += result.best_size as f64;
                counts[cell.pi][cell.di] += 1;
                if let Some(dir) = out {
                    let path = dir
                        .join("curves")
                        .join(format!("{}_{}_{}.csv", ds_name, cell.pair, policy_name));
                    std::fs::write(path, result.to_csv())?;
                }
                cell_rows.push(BenchCell {
                    dataset: ds_name.clone(),
                    pair: cell.pair,
                    policy: policy_name.clone(),
                    size: result.best_size,
                    iterations: result.iterations,
                    completed: result.completed,
                    error: None,
                });
            }
            Err(e) => {
                // Partial failures are recorded; the run continues.
                cell_rows.push(BenchCell {
                    dataset: ds_name.clone(),
                    pair: cell.pair,
                    policy: policy_name.clone(),
                    size: 0,
                    iterations: 0,
                    completed: false,
                    error: Some(e.clone()),
                });
            }
        }
    }

    let mean_sizes: Vec<Vec<f64>> = sums
        .iter()
        .zip(counts.iter())
        .map(|(row, crow)| {
            row.iter()
                .zip(crow.iter())
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let best: Vec<f64> = (0..spec.datasets.len())
        .map(|d| mean_sizes.iter().map(|row| row[d]).fold(0.0, f64::max))
        .collect();
    let table = RatioTable {
        datasets: spec.datasets.iter().map(|d| d.name.clone()).collect(),
        policies: spec.policies.iter().map(|p| p.name().to_string()).collect(),
        mean_sizes,
        best,
    };

    if let Some(dir) = out {
        std::fs::write(dir.join("table.csv"), table.to_csv())?;
        let meta = serde_json::json!({
            "spec": spec,
            "version": env!("CARGO_PKG_VERSION"),
            "cells": cell_rows.len(),
        });
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    }
    Ok(BenchReport { table, cells: cell_rows })
}

/// Parses a graph argument: either a file path (`.json` or edge list) or an
/// inline generator spec such as `er:n=50,p=0.08,seed=3`,
/// `ba:n=50,m=5,seed=1`, `ws:n=50,rd=4,p=0.2,seed=7`.
pub fn parse_graph_spec(arg: &str) -> Result<Graph, BenchError> {
    let inline = arg.split_once(':').filter(|(kind, _)| matches!(*kind, "ba" | "er" | "ws"));
    let Some((kind, rest)) = inline else {
        let text = std::fs::read_to_string(arg)?;
        let graph = if arg.ends_with(".json") {
            load_json(&text)?
        } else {
            load_edge_list(&text)?
        };
        return Ok(graph.with_name(
            Path::new(arg).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        ));
    };
    let mut fields = std::collections::HashMap::new();
    for part in rest.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| BenchError::Spec(format!("bad generator field `{part}`")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .ok_or_else(|| BenchError::Spec(format!("generator `{kind}` needs field `{k}`")))
    };
    let num = |k: &str| -> Result<usize, BenchError> {
        get(k)?.parse().map_err(|_| BenchError::Spec(format!("field `{k}` must be an integer")))
    };
    let real = |k: &str| -> Result<f64, BenchError> {
        get(k)?.parse().map_err(|_| BenchError::Spec(format!("field `{k}` must be a number")))
    };
    let seed = fields.get("seed").map_or(Ok(0), |s| {
        s.parse::<u64>().map_err(|_| BenchError::Spec("field `seed` must be an integer".into()))
    })?;
    let g = match kind {
        "ba" => crate::graph::generate_ba(num("n")?, num("m")?, seed)?,
        "er" => crate::graph::generate_er(num("n")?, real("p")?, seed)?,
        "ws" => crate::graph::generate_ws(num("n")?, num("rd")?, real("p")?, seed)?,
        _ => unreachable!(),
    };
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_ratio_is_one() {
        let spec = BenchSpec {
            datasets: vec![BenchDataset {
                name: "er8".into(),
                source: PairSource::Er { n: 8, p: 0.3 },
                pairs: 1,
            }],
            policies: vec![PolicyKind::Degree],
            budget_iterations: Some(100),
            budget_seconds: None,
            seed: 5,
            promise: false,
            checkpoint: None,
            workers: Some(1),
        };
        let report = run_bench(&spec, None).unwrap();
        assert_eq!(report.table.ratio(0, 0), 1.0);
        assert_eq!(report.cells.len(), 1);
    }

    #[test]
    fn tables_are_deterministic_across_runs_and_workers() {
        let mut spec = BenchSpec {
            datasets: vec![BenchDataset {
                name: "er12".into(),
                source: PairSource::Er { n: 12, p: 0.25 },
                pairs: 4,
            }],
            policies: vec![PolicyKind::Degree, PolicyKind::Random, PolicyKind::Scorerl],
            budget_iterations: Some(120),
            budget_seconds: None,
            seed: 42,
            promise: false,
            checkpoint: None,
            workers: None,
        };
        let a = run_bench(&spec, None).unwrap().table.to_csv();
        let b = run_bench(&spec, None).unwrap().table.to_csv();
        assert_eq!(a, b);
        spec.workers = Some(1);
        let c = run_bench(&spec, None).unwrap().table.to_csv();
        assert_eq!(a, c);
    }

    #[test]
    fn learned_without_checkpoint_is_rejected() {
        let spec = BenchSpec {
            datasets: vec![],
            policies: vec![PolicyKind::Learned],
            budget_iterations: Some(1),
            budget_seconds: None,
            seed: 0,
            promise: false,
            checkpoint: None,
            workers: Some(1),
        };
        assert!(run_bench(&spec, None).is_err());
    }

    #[test]
    fn graph_spec_parsing() {
        let g = parse_graph_spec("er:n=10,p=0.5,seed=3").unwrap();
        assert_eq!(g.node_count(), 10);
        let g = parse_graph_spec("ba:n=12,m=2,seed=1").unwrap();
        assert_eq!(g.edge_count(), 1 + 2 * 10);
        assert!(parse_graph_spec("er:n=10").is_err());
        assert!(parse_graph_spec("zz:n=1").is_err());
    }
}
