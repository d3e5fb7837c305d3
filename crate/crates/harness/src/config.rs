use std::path::{Path, PathBuf};

use pcl_core::inference::SearchMode;
use pcl_core::learner::Algorithm;
use pcl_core::model::ProblemModel;
use pcl_core::problems::{builtin, BUILTIN};
use pcl_core::selection::SelectionKind;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A built-in problem name or the path of a problem file.
    pub problem: String,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub users: usize,
    /// Iteration budget T.
    pub iters: u64,
    pub selection: SelectionKind,
    /// Seeds the user sample and, per user, the part-selection stream.
    pub seed: u64,
    pub exploration: f64,
    pub mode: SearchMode,
    /// Compute the full regret against each user's optimum (needs one full inference per user).
    pub regret: bool,
    /// Baseline only: instead of an α-informative oracle, the t-th improvement gains
    /// what the part-wise learner's t-th improvement gained for the same user and
    /// seed (capped by the regret). A zero gain returns the recommendation
    /// unchanged, which ends the run.
    pub matched_gain: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "grid".into(),
            algorithm: Algorithm::Pcl,
            alpha: pcl_core::simuser::DEFAULT_ALPHA,
            users: 20,
            iters: 100,
            selection: SelectionKind::Random,
            seed: 0,
            exploration: 1.0,
            mode: SearchMode::BranchAndBound,
            regret: true,
            matched_gain: false,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters < 1 {
            return Err(HarnessError::Config("iters must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(HarnessError::Config(format!("alpha {} is outside (0, 1]", self.alpha)));
        }
        if self.matched_gain && self.algorithm != Algorithm::Cl {
            return Err(HarnessError::Config(
                "matched_gain applies to the cl baseline only".into(),
            ));
        }
        if self.users == 0 {
            return Err(HarnessError::Config("users must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Seed of user `k`'s part-selection stream.
    pub fn learner_seed(&self, k: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(k as u64)
    }
}

/// Resolves a built-in name or loads a problem file.
pub fn load_problem(spec: &str) -> Result<ProblemModel> {
    if BUILTIN.contains(&spec) {
        return Ok(builtin(spec)?);
    }
    Ok(ProblemModel::load(spec)?)
}
