use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use glsearch::bench::{parse_graph_spec, run_bench, BenchSpec, PolicyKind};
use glsearch::neural::{checkpoint, HeadMode, InteractMode, QNet};
use glsearch::policy::Policy;
use glsearch::search::{search, Budget};
use glsearch::train::{Curriculum, TrainConfig, Trainer};
use glsearch::verify;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "glsearch", version, about = "Maximum common subgraph search with learned node-pair selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph and write it to a file.
    Generate(GenerateArgs),
    /// Solve one pair and write the result, curve and mapping.
    Solve(SolveArgs),
    /// Run the three-stage training pipeline.
    Train(TrainArgs),
    /// Run a policy-comparison benchmark from a JSON spec.
    Bench(BenchArgs),
    /// Run the verification suites (oracle equivalence, bound
    /// admissibility, incumbent validity, gradient check).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator spec, e.g. er:n=50,p=0.08,seed=3 or ba:n=50,m=5,seed=1 or
    /// ws:n=50,rd=4,p=0.2,seed=7
    #[arg(long)]
    spec: String,
    /// Output path; .json selects the JSON container, anything else the
    /// plain edge list.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum HeadArg {
    Factored,
    Unfactored,
    UnfactoredI,
}

impl From<HeadArg> for HeadMode {
    fn from(h: HeadArg) -> HeadMode {
        match h {
            HeadArg::Factored => HeadMode::Factored,
            HeadArg::Unfactored => HeadMode::Unfactored,
            HeadArg::UnfactoredI => HeadMode::UnfactoredI,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum InteractArg {
    ConvMax,
    Sum,
}

impl From<InteractArg> for InteractMode {
    fn from(i: InteractArg) -> InteractMode {
        match i {
            InteractArg::ConvMax => InteractMode::ConvMax,
            InteractArg::Sum => InteractMode::Sum,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// First graph: file path or generator spec.
    #[arg(long)]
    g1: String,
    /// Second graph: file path or generator spec.
    #[arg(long)]
    g2: String,
    #[arg(long, default_value = "degree")]
    policy: String,
    /// Checkpoint path; required for --policy learned.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Iteration budget.
    #[arg(long)]
    iters: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    seconds: Option<f64>,
    /// Run to completion (exhausts the search space).
    #[arg(long)]
    complete: bool,
    #[arg(long, value_enum, default_value = "off")]
    promise: OnOff,
    /// Q-head override for learned policies.
    #[arg(long, value_enum)]
    head: Option<HeadArg>,
    /// Interact operator; must match the checkpoint when one is loaded.
    #[arg(long, value_enum)]
    interact: Option<InteractArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for result.json, curve.csv, mapping.txt.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON file with training-config overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Curriculum choice: the synthetic rows only, or with stand-ins for
    /// the dataset slots.
    #[arg(long, value_enum, default_value = "full")]
    curriculum: CurriculumArg,
    /// Resume from train_state.json in the output directory.
    #[arg(long)]
    resume: bool,
    #[arg(long, value_enum)]
    head: Option<HeadArg>,
    #[arg(long, value_enum)]
    interact: Option<InteractArg>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CurriculumArg {
    Synthetic,
    Full,
}

#[derive(Args)]
struct BenchArgs {
    /// BenchSpec JSON file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let g = parse_graph_spec(&args.spec)?;
    let text = if args.out.extension().is_some_and(|e| e == "json") {
        serde_json::to_string_pretty(&glsearch::graph::to_json(&g))?
    } else {
        let mut t = String::new();
        for u in 0..g.node_count() as u32 {
            let l = g.label(u);
            if l != 0 {
                t.push_str(&format!("#label {u} {l}\n"));
            }
        }
        for (u, v) in g.edges() {
            t.push_str(&format!("{u} {v}\n"));
        }
        t
    };
    std::fs::write(&args.out, text)?;
    println!("wrote {} ({} nodes, {} edges)", args.out.display(), g.node_count(), g.edge_count());
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let kind: PolicyKind = match args.policy.parse() {
        Ok(k) => k,
        Err(e) => usage_error(&e),
    };
    if kind == PolicyKind::Learned && args.checkpoint.is_none() {
        usage_error("--policy learned requires --checkpoint");
    }
    if !args.complete && args.iters.is_none() && args.seconds.is_none() {
        usage_error("set a budget (--iters and/or --seconds) or pass --complete");
    }
    let g1 = parse_graph_spec(&args.g1).with_context(|| format!("loading --g1 {}", args.g1))?;
    let g2 = parse_graph_spec(&args.g2).with_context(|| format!("loading --g2 {}", args.g2))?;

    let net: Option<Arc<QNet>> = match &args.checkpoint {
        Some(path) => {
            let mut net = checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            if let Some(interact) = args.interact {
                if net.cfg.interact_mode != interact.into() {
                    bail!("--interact does not match the checkpoint's interact operator");
                }
            }
            if let Some(head) = args.head {
                net.cfg.head_mode = head.into();
            }
            Some(Arc::new(net))
        }
        None => None,
    };
    let mut policy: Box<dyn Policy> = kind.build(args.seed, net.as_ref()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let budget = if args.complete {
        Budget::unlimited()
    } else {
        Budget { max_iterations: args.iters, max_seconds: args.seconds }
    };
    let result = search(&g1, &g2, policy.as_mut(), &budget, args.promise == OnOff::On);
    glsearch::search::validate_result(&g1, &g2, &result).map_err(|e| anyhow::anyhow!(e))?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("result.json"), serde_json::to_string_pretty(&result)?)?;
    std::fs::write(args.out.join("curve.csv"), result.to_csv())?;
    let mapping: String =
        result.best_mapping.iter().map(|(i, j)| format!("{i} {j}\n")).collect();
    std::fs::write(args.out.join("mapping.txt"), mapping)?;
    println!(
        "best common subgraph size: {} ({} iterations, completed: {})",
        result.best_size, result.iterations, result.completed
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let curriculum = match args.curriculum {
        CurriculumArg::Synthetic => Curriculum::synthetic(),
        CurriculumArg::Full => Curriculum::full(),
    };
    let mut trainer = if args.resume {
        Trainer::resume(&curriculum, &args.out)?
    } else {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)?;
            cfg = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        }
        if let Some(head) = args.head {
            cfg.net.head_mode = head.into();
        }
        if let Some(interact) = args.interact {
            cfg.net.interact_mode = interact.into();
        }
        Trainer::new(&curriculum, cfg, args.seed)?.with_output(&args.out)?
    };
    let total = trainer.cfg.total_iterations;
    while trainer.iteration < total {
        trainer.step()?;
        let i = trainer.iteration;
        if i % 100 == 0 {
            let recent: Vec<f64> = trainer.losses.iter().rev().take(100).copied().collect();
            let mean = if recent.is_empty() {
                f64::NAN
            } else {
                recent.iter().sum::<f64>() / recent.len() as f64
            };
            println!("iter {i}/{total} mean loss (last 100 updates): {mean:.4}");
        }
    }
    let model = trainer.run()?;
    if let Some(path) = model {
        println!("final checkpoint: {}", path.display());
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec)?;
    let spec: BenchSpec = serde_json::from_str(&text).with_context(|| "parsing bench spec")?;
    let report = run_bench(&spec, Some(&args.out))?;
    print!("{}", report.table.to_csv());
    let failures = report.cells.iter().filter(|c| c.error.is_some()).count();
    if failures > 0 {
        eprintln!("{failures} cell(s) failed; see meta.json");
    }
    println!("wrote {}", args.out.join("table.csv").display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let sections = verify::run_all(args.pairs, args.seed);
    let mut ok = true;
    for s in &sections {
        println!("[{}] {}: {}", if s.pass { "PASS" } else { "FAIL" }, s.name, s.detail);
        ok &= s.pass;
    }
    if !ok {
        bail!("verification failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Train(args) => cmd_train(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}
