use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use pcl_core::gai::{build_gai_network, decompose};
use pcl_core::inference::{certify_local_optimum, SearchMode};
use pcl_core::learner::Algorithm;
use pcl_core::model::{Configuration, WeightVector};
use pcl_core::selection::SelectionKind;
use pcl_harness::output::{curves, write_outputs};
use pcl_harness::{load_problem, run_prepared, ExperimentConfig, Prepared};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pcl", about = "Part-wise coactive preference elicitation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate users and write metrics.
    Run(RunArgs),
    /// Load a problem file and report its size and constants.
    Validate {
        #[arg(long)]
        problem: String,
    },
    /// Check whether a configuration is a local optimum for given weights.
    Certify {
        #[arg(long)]
        problem: String,
        /// JSON array of weights.
        #[arg(long)]
        weights: PathBuf,
        /// JSON array of values, or an object mapping variable names to values.
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the GAI network, the part ordering and the J sets.
    DumpGai {
        #[arg(long)]
        problem: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// grid, training, hotel or a problem file.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    select: Option<SelectionKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip full regret (no full inference per user).
    #[arg(long)]
    no_regret: bool,
    /// Baseline only: match each improvement's gain to the part-wise run's.
    #[arg(long)]
    matched_gain: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.problem {
        config.problem = v;
    }
    if let Some(v) = args.algo {
        config.algorithm = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.users {
        config.users = v;
    }
    if let Some(v) = args.iters {
        config.iters = v;
    }
    if let Some(v) = args.select {
        config.selection = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.no_regret {
        config.regret = false;
    }
    if args.matched_gain {
        config.matched_gain = true;
    }
    if let Some(v) = args.out {
        config.out = Some(v);
    }
    let prepared = Prepared::for_config(&config)?;
    let experiment = run_prepared(&prepared, &config)?;
    if let Some(dir) = &config.out {
        write_outputs(&experiment, Some(&prepared.bank), dir)?;
    }
    let c = curves(&experiment);
    let converged = experiment.runs.iter().filter(|r| r.converged_at.is_some()).count();
    println!("{}: {} users, {} converged", c.label, experiment.runs.len(), converged);
    if let Some(regret) = &c.regret {
        let last = regret.mean.len() - 1;
        println!(
            "mean regret: start {:.4}, final {:.4} (std {:.4})",
            regret.mean[0], regret.mean[last], regret.std[last]
        );
    }
    let violations: Vec<_> = experiment.violations().collect();
    if !violations.is_empty() {
        for v in violations.iter().take(20) {
            eprintln!("violation: user {} t {} {}: {}", v.user, v.t, v.check, v.detail);
        }
        bail!("{} invariant violations", violations.len());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Validate { problem } => {
            let m = load_problem(&problem)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "variables": m.num_vars(),
                    "features": m.num_features(),
                    "constraints": m.constraints().len(),
                    "parts": m.num_parts(),
                    "D": m.feature_bound(),
                    "S": m.part_feature_bound(),
                }))?
            );
            Ok(())
        }
        Command::Certify {
            problem,
            weights,
            config,
        } => {
            let m = load_problem(&problem)?;
            let w: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(&weights)?)?;
            if w.len() != m.num_features() {
                bail!("expected {} weights, got {}", m.num_features(), w.len());
            }
            let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&config)?)?;
            let x = match raw {
                serde_json::Value::Object(_) => m.configuration_from_map(&serde_json::from_value(raw)?)?,
                other => Configuration(serde_json::from_value(other)?),
            };
            let feasibility = m.check_feasible(&x)?;
            if !feasibility.feasible {
                bail!("configuration is infeasible: {}", feasibility.violated.join(", "));
            }
            let cert = certify_local_optimum(&m, &WeightVector(w), &x, SearchMode::BranchAndBound)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            if !cert.is_optimal() {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::DumpGai { problem } => {
            let m = load_problem(&problem)?;
            let net = build_gai_network(&m);
            let d = decompose(&m);
            let name = |p: usize| m.parts()[p].name.clone();
            let parts: Vec<_> = (0..m.num_parts())
                .map(|p| {
                    json!({
                        "part": name(p),
                        "degree": net.degrees()[p],
                        "neighbors": net.neighbors(p).into_iter().map(name).collect::<Vec<_>>(),
                        "i_size": d.i_of(p).len(),
                        "j_size": d.j_of(p).len(),
                        "j": d.j_of(p).iter().map(|i| m.features()[i].name.clone()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "ordering": d.ordering.iter().map(|&p| name(p)).collect::<Vec<_>>(),
                    "parts": parts,
                }))?
            );
            Ok(())
        }
    }
}
