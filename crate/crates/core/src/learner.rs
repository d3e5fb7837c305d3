//! The part-wise coactive learner and the full-configuration coactive baseline.
//!
//! A step is split into [`LearnerState::propose`] (select a part, infer it under
//! `J` with the rest fixed) and [`LearnerState::feedback`] (validate the user's
//! improvement and apply the perceptron update on `I` or `J`). The split lets a
//! live session hold a pending recommendation between HTTP requests; a rejected
//! improvement leaves the pending turn in place.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gai::{compute_j, decompose, GaiDecomposition};
use crate::inference::{infer_full, infer_part, SearchMode};
use crate::model::{Configuration, FeatureSet, PartialConfiguration, ProblemModel, WeightVector};
use crate::selection::{surrogate_reward, SelectionKind, SelectionStrategy};
use crate::EPSILON;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Part-wise interaction.
    #[default]
    Pcl,
    /// Classic coactive learning over complete configurations.
    Cl,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pcl" => Ok(Algorithm::Pcl),
            "cl" => Ok(Algorithm::Cl),
            other => Err(format!("unknown algorithm `{other}` (pcl, cl)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub selection: SelectionKind,
    pub seed: u64,
    /// UCB1 exploration constant.
    pub exploration: f64,
    /// Custom part ordering; the degree heuristic when absent.
    pub ordering: Option<Vec<usize>>,
    /// Starting configuration; the lexicographically smallest feasible one when absent.
    pub initial: Option<Configuration>,
    pub mode: SearchMode,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            algorithm: Algorithm::Pcl,
            selection: SelectionKind::Random,
            seed: 0,
            exploration: 1.0,
            ordering: None,
            initial: None,
            mode: SearchMode::BranchAndBound,
        }
    }
}

/// Which coordinates an update touched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Estimated gain on `I` was at most zero: update all of `I`.
    I,
    /// Estimated gain on `I` was positive: update `J` only.
    J,
    /// Complete-configuration update (baseline).
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// 1-based iteration number.
    pub t: u64,
    /// `None` for complete-configuration recommendations.
    pub part: Option<usize>,
    pub assignment: PartialConfiguration,
    /// The recommended configuration `x^t`.
    pub configuration: Configuration,
    /// The part's assignment before inference.
    pub previous: PartialConfiguration,
    #[serde(with = "duration_secs")]
    pub inference_time: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: u64,
    pub part: Option<usize>,
    pub i_set: FeatureSet,
    pub j_set: FeatureSet,
    pub recommended: PartialConfiguration,
    pub improvement: PartialConfiguration,
    pub branch: Branch,
    /// `u^t[I](x̂) - u^t[I](x)`, the quantity deciding the branch.
    pub estimated_gain: f64,
    /// Normalized surrogate reward fed to the selection strategy.
    pub reward: f64,
    /// The user returned the recommendation unchanged.
    pub satisfied: bool,
    /// Satisfied and inference left the part unchanged.
    pub clean: bool,
    pub converged: bool,
    #[serde(with = "duration_secs")]
    pub inference_time: Duration,
}

impl IterationRecord {
    pub fn q_set(&self) -> &FeatureSet {
        match self.branch {
            Branch::J => &self.j_set,
            _ => &self.i_set,
        }
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(Duration::try_from_secs_f64(secs).unwrap_or_default())
    }
}

/// Supplies improvements; implemented by simulated users and live sessions alike.
pub trait ImprovementProvider {
    fn improve_part(
        &mut self,
        model: &ProblemModel,
        x: &Configuration,
        part: usize,
        objective: &FeatureSet,
    ) -> Result<PartialConfiguration>;

    fn improve_full(&mut self, model: &ProblemModel, x: &Configuration) -> Result<Configuration>;
}

#[derive(Clone, Debug)]
pub struct LearnerState {
    model: Arc<ProblemModel>,
    config: LearnerConfig,
    decomposition: GaiDecomposition,
    selection: SelectionStrategy,
    weights: WeightVector,
    x: Configuration,
    pending: Option<Recommendation>,
    trace: Vec<IterationRecord>,
    /// Per part, clean visits since the last non-clean visit.
    streak: Vec<u32>,
    converged: bool,
}

impl LearnerState {
    pub fn new(model: Arc<ProblemModel>, config: LearnerConfig) -> Result<Self> {
        let decomposition = match &config.ordering {
            Some(order) => compute_j(&model, order)?,
            None => decompose(&model),
        };
        let x = match &config.initial {
            Some(x) => {
                let report = model.check_feasible(x)?;
                if !report.feasible {
                    return Err(Error::Infeasible {
                        violated: report.violated,
                    });
                }
                x.clone()
            }
            None => infer_full(&model, &WeightVector::zeros(model.num_features()), config.mode)?,
        };
        let selection =
            SelectionStrategy::new(config.selection, &decomposition, config.seed).with_exploration(config.exploration);
        Ok(LearnerState {
            weights: WeightVector::zeros(model.num_features()),
            streak: vec![0; model.num_parts()],
            model,
            config,
            decomposition,
            selection,
            x,
            pending: None,
            trace: Vec::new(),
            converged: false,
        })
    }

    pub fn model(&self) -> &Arc<ProblemModel> {
        &self.model
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn decomposition(&self) -> &GaiDecomposition {
        &self.decomposition
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// The current configuration (the pending recommendation if one exists).
    pub fn configuration(&self) -> &Configuration {
        &self.x
    }

    pub fn pending(&self) -> Option<&Recommendation> {
        self.pending.as_ref()
    }

    pub fn trace(&self) -> &[IterationRecord] {
        &self.trace
    }

    /// Completed iterations.
    pub fn iterations(&self) -> u64 {
        self.trace.len() as u64
    }

    /// True once the current streak of clean visits covers every part at least twice
    /// (part-wise), or once the user accepts a complete recommendation (baseline).
    pub fn has_converged(&self) -> bool {
        self.converged
    }

    pub fn streak(&self) -> &[u32] {
        &self.streak
    }

    /// Prepares the next recommendation; returns the pending one if it exists.
    pub fn propose(&mut self) -> Result<&Recommendation> {
        if self.pending.is_none() {
            let t = self.iterations() + 1;
            let rec = match self.config.algorithm {
                Algorithm::Pcl => {
                    let p = self.selection.select_part();
                    let previous = self.model.restrict(&self.x, p);
                    let out = infer_part(
                        &self.model,
                        &self.weights,
                        self.decomposition.j_of(p),
                        p,
                        &self.x,
                        self.config.mode,
                    )?;
                    Recommendation {
                        t,
                        part: Some(p),
                        configuration: self.x.with(&out.assignment),
                        assignment: out.assignment,
                        previous,
                        inference_time: out.elapsed,
                    }
                }
                Algorithm::Cl => {
                    let start = std::time::Instant::now();
                    let x = infer_full(&self.model, &self.weights, self.config.mode)?;
                    let all = self.full_partial(&x);
                    Recommendation {
                        t,
                        part: None,
                        assignment: all,
                        previous: self.full_partial(&self.x),
                        configuration: x,
                        inference_time: start.elapsed(),
                    }
                }
            };
            self.x = rec.configuration.clone();
            self.pending = Some(rec);
        }
        Ok(self.pending.as_ref().expect("just set"))
    }

    fn full_partial(&self, x: &Configuration) -> PartialConfiguration {
        PartialConfiguration {
            parts: (0..self.model.num_parts()).collect(),
            vars: (0..self.model.num_vars()).collect(),
            values: x.0.clone(),
        }
    }

    /// Applies the user's improvement of the pending recommendation.
    ///
    /// The improvement must assign exactly the recommended variables and be feasible
    /// together with the fixed remainder; otherwise an error is returned and the
    /// pending recommendation is kept.
    pub fn feedback(&mut self, improvement: &PartialConfiguration) -> Result<IterationRecord> {
        let rec = self
            .pending
            .clone()
            .ok_or_else(|| Error::Protocol("no pending recommendation".into()))?;
        let model = Arc::clone(&self.model);
        match rec.part {
            Some(p) => model.expect_part_assignment(p, improvement)?,
            None => {
                if improvement.vars != rec.assignment.vars {
                    return Err(Error::Arity {
                        expected: model.num_vars(),
                        got: improvement.vars.len(),
                    });
                }
                model.check_domain(&Configuration(improvement.values.clone()))?;
            }
        }
        let x = &rec.configuration;
        let x_hat = x.with(improvement);
        let report = model.check_feasible(&x_hat)?;
        if !report.feasible {
            return Err(Error::Infeasible {
                violated: report.violated,
            });
        }

        let (i_set, j_set) = match rec.part {
            Some(p) => (self.decomposition.i_of(p).clone(), self.decomposition.j_of(p).clone()),
            None => {
                let all = FeatureSet::full(model.num_features());
                (all.clone(), all)
            }
        };
        let estimated_gain = model.partial_utility_unchecked(&self.weights, &i_set, &x_hat)
            - model.partial_utility_unchecked(&self.weights, &i_set, x);
        let branch = match rec.part {
            None => Branch::Full,
            Some(_) if estimated_gain <= EPSILON => Branch::I,
            Some(_) => Branch::J,
        };
        let q = if branch == Branch::J { &j_set } else { &i_set };
        let mut post_gain = 0.0;
        for i in q.iter() {
            let diff = model.feature_value(i, &x_hat) - model.feature_value(i, x);
            self.weights.0[i] += diff;
            post_gain += self.weights.0[i] * diff;
        }
        let scale = 2.0 * model.feature_bound() * model.part_feature_bound() as f64;
        let reward = surrogate_reward(post_gain, scale);

        let satisfied = improvement.values == rec.assignment.values;
        let clean = satisfied && rec.assignment.values == rec.previous.values;
        match rec.part {
            Some(p) => {
                self.selection.record_reward(p, reward);
                if clean {
                    self.streak[p] += 1;
                } else {
                    self.streak.iter_mut().for_each(|s| *s = 0);
                }
                self.converged = self.streak.iter().all(|&s| s >= 2);
            }
            None => self.converged = satisfied,
        }

        let record = IterationRecord {
            t: rec.t,
            part: rec.part,
            i_set,
            j_set,
            recommended: rec.assignment,
            improvement: improvement.clone(),
            branch,
            estimated_gain,
            reward,
            satisfied,
            clean,
            converged: self.converged,
            inference_time: rec.inference_time,
        };
        self.trace.push(record.clone());
        self.pending = None;
        Ok(record)
    }

    /// One part-wise step: propose, ask the provider, update.
    pub fn pcl_step(&mut self, provider: &mut dyn ImprovementProvider) -> Result<IterationRecord> {
        if self.config.algorithm != Algorithm::Pcl {
            return Err(Error::Protocol("pcl_step on a complete-configuration learner".into()));
        }
        let rec = self.propose()?.clone();
        let p = rec.part.expect("part-wise recommendation");
        let improvement = provider.improve_part(&self.model, &rec.configuration, p, self.decomposition.i_of(p))?;
        self.feedback(&improvement)
    }

    /// One complete-configuration step of the baseline.
    pub fn cl_step(&mut self, provider: &mut dyn ImprovementProvider) -> Result<IterationRecord> {
        if self.config.algorithm != Algorithm::Cl {
            return Err(Error::Protocol("cl_step on a part-wise learner".into()));
        }
        let rec = self.propose()?.clone();
        let improved = provider.improve_full(&self.model, &rec.configuration)?;
        let partial = self.full_partial(&improved);
        self.feedback(&partial)
    }

    pub fn step(&mut self, provider: &mut dyn ImprovementProvider) -> Result<IterationRecord> {
        match self.config.algorithm {
            Algorithm::Pcl => self.pcl_step(provider),
            Algorithm::Cl => self.cl_step(provider),
        }
    }
}
