//! Result files.
//!
//! | file            | content                                                          |
//! |-----------------|------------------------------------------------------------------|
//! | `metrics.csv`   | one [`MetricsRow`] per user and iteration (deterministic)        |
//! | `runtime.csv`   | inference wall time per user and iteration                       |
//! | `curves.json`   | per-iteration mean and standard deviation of regret and runtime  |
//! | `summary.json`  | configuration, per-user outcome, check counts, violations        |
//! | `users.json`    | the sampled user weights                                         |
//! | `traces/*.jsonl`| the learner's iteration records, one file per user               |

use std::fs;
use std::io::Write;
use std::path::Path;

use pcl_core::simuser::UserBank;
use serde::Serialize;
use serde_json::json;

use crate::metrics::{mean, std_dev, MetricsRow, RuntimeRow};
use crate::run::Experiment;
use crate::Result;

pub const METRICS_HEADER: [&str; 12] = [
    "user",
    "t",
    "part",
    "branch",
    "regret",
    "creg",
    "gain",
    "zeta",
    "avg_creg",
    "bound",
    "norm_sq",
    "converged",
];

pub const RUNTIME_HEADER: [&str; 4] = ["user", "t", "inference_secs", "cumulative_secs"];

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl Iterator<Item = R>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(path: &Path, rows: impl Iterator<Item = MetricsRow>) -> Result<()> {
    write_csv(path, &METRICS_HEADER, rows)
}

pub fn write_runtime(path: &Path, rows: impl Iterator<Item = RuntimeRow>) -> Result<()> {
    write_csv(path, &RUNTIME_HEADER, rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Band {
    fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        Band {
            mean: columns.iter().map(|c| mean(c)).collect(),
            std: columns.iter().map(|c| std_dev(c)).collect(),
        }
    }
}

/// Plot data for the regret and cumulative-runtime panels of one curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curves {
    pub label: String,
    /// Iterations `0..=T`; 0 is the starting configuration.
    pub t: Vec<u64>,
    pub regret: Option<Band>,
    pub runtime: Band,
}

pub fn curves(experiment: &Experiment) -> Curves {
    let c = &experiment.config;
    let ts: Vec<u64> = (0..=c.iters).collect();
    let regret = ts
        .iter()
        .map(|&t| {
            experiment
                .runs
                .iter()
                .map(|r| r.regret_at(t))
                .collect::<Option<Vec<f64>>>()
        })
        .collect::<Option<Vec<_>>>()
        .map(Band::from_columns);
    let runtime = Band::from_columns(
        ts.iter()
            .map(|&t| experiment.runs.iter().map(|r| r.runtime_at(t)).collect())
            .collect(),
    );
    Curves {
        label: format!("{:?} {} alpha={}", c.algorithm, c.selection, c.alpha).to_lowercase(),
        t: ts,
        regret,
        runtime,
    }
}

pub fn summary(experiment: &Experiment) -> serde_json::Value {
    let runs: Vec<serde_json::Value> = experiment
        .runs
        .iter()
        .map(|r| {
            json!({
                "user": r.user,
                "iterations": r.rows.len(),
                "initial_regret": r.initial_regret,
                "final_regret": r.final_regret,
                "converged_at": r.converged_at,
                "certified": r.certified,
                "violations": r.violations.len(),
            })
        })
        .collect();
    let finals: Option<Vec<f64>> = experiment.runs.iter().map(|r| r.final_regret).collect();
    json!({
        "config": experiment.config,
        "mean_final_regret": finals.as_deref().map(mean),
        "converged": experiment.runs.iter().filter(|r| r.converged_at.is_some()).count(),
        "checks": experiment.checks(),
        "violations": experiment.violations().collect::<Vec<_>>(),
        "users": runs,
    })
}

/// Writes every result file into `dir`, creating it if needed.
pub fn write_outputs(experiment: &Experiment, bank: Option<&UserBank>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("traces"))?;
    write_metrics(
        &dir.join("metrics.csv"),
        experiment.runs.iter().flat_map(|r| r.rows.iter().cloned()),
    )?;
    write_runtime(
        &dir.join("runtime.csv"),
        experiment.runs.iter().flat_map(|r| r.runtime.iter().cloned()),
    )?;
    fs::write(
        dir.join("curves.json"),
        serde_json::to_string_pretty(&curves(experiment))?,
    )?;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary(experiment))?,
    )?;
    if let Some(bank) = bank {
        bank.save(dir.join("users.json"))?;
    }
    for r in &experiment.runs {
        let mut f = fs::File::create(dir.join("traces").join(format!("user{:02}.jsonl", r.user)))?;
        for record in &r.trace {
            writeln!(f, "{}", serde_json::to_string(record)?)?;
        }
    }
    Ok(())
}
