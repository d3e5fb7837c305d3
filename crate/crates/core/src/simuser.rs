//! α-informative simulated users.
//!
//! Given a recommendation, the user computes the conditional optimum under its
//! hidden weights `w*` and returns the *worst* feasible replacement that still
//! closes at least an `α` fraction of the conditional regret. A user facing a
//! conditionally optimal part returns it unchanged.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{scan_options, Scope, ScoredOption};
use crate::learner::ImprovementProvider;
use crate::model::{Configuration, FeatureSet, PartialConfiguration, ProblemModel, WeightVector};
use crate::EPSILON;

/// Default fraction of the conditional regret a user's improvement closes.
pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUser {
    pub weights: WeightVector,
    pub alpha: f64,
}

/// What the user saw and did on one turn, in `u*[objective]` terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub improvement: PartialConfiguration,
    /// The lexicographically first conditional optimum.
    pub optimum: PartialConfiguration,
    pub current_value: f64,
    pub optimum_value: f64,
    pub improved_value: f64,
}

impl ImprovementReport {
    /// Conditional regret of the recommendation.
    pub fn regret(&self) -> f64 {
        self.optimum_value - self.current_value
    }

    pub fn gain(&self) -> f64 {
        self.improved_value - self.current_value
    }
}

impl SimulatedUser {
    pub fn new(weights: WeightVector, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} is outside (0, 1]")));
        }
        Ok(SimulatedUser { weights, alpha })
    }

    /// The α-informative response to a recommended part, judged on `objective`.
    pub fn improve_part_report(
        &self,
        model: &ProblemModel,
        x: &Configuration,
        part: usize,
        objective: &FeatureSet,
    ) -> Result<ImprovementReport> {
        let options = scan_options(model, &self.weights, objective, Scope::Part(part), x)?;
        let current = model.restrict(x, part);
        self.respond(options, &current)
    }

    /// The same program over complete configurations and all features.
    pub fn improve_full_report(&self, model: &ProblemModel, x: &Configuration) -> Result<ImprovementReport> {
        let all = FeatureSet::full(model.num_features());
        let options = scan_options(model, &self.weights, &all, Scope::All, x)?;
        let current = PartialConfiguration::new(
            (0..model.num_parts()).collect(),
            (0..model.num_vars()).collect(),
            x.0.clone(),
        )?;
        self.respond(options, &current)
    }

    /// Complete-configuration improvement whose gain matches `target` instead of an
    /// α fraction of the regret: the worst configuration gaining at least
    /// `min(target, regret)`. A non-positive target leaves `x` unchanged.
    pub fn improve_full_matched(
        &self,
        model: &ProblemModel,
        x: &Configuration,
        target: f64,
    ) -> Result<ImprovementReport> {
        let all = FeatureSet::full(model.num_features());
        let options = scan_options(model, &self.weights, &all, Scope::All, x)?;
        let current = PartialConfiguration::new(
            (0..model.num_parts()).collect(),
            (0..model.num_vars()).collect(),
            x.0.clone(),
        )?;
        self.choose(options, &current, |regret| target.min(regret))
    }

    fn respond(&self, options: Vec<ScoredOption>, current: &PartialConfiguration) -> Result<ImprovementReport> {
        self.choose(options, current, |regret| self.alpha * regret)
    }

    /// Worst option gaining at least `required(regret)`; unchanged when nothing is required.
    fn choose(
        &self,
        options: Vec<ScoredOption>,
        current: &PartialConfiguration,
        required: impl Fn(f64) -> f64,
    ) -> Result<ImprovementReport> {
        let here = options
            .iter()
            .find(|o| o.assignment.values == current.values)
            .ok_or_else(|| Error::Infeasible {
                violated: vec!["the recommended configuration is infeasible".into()],
            })?
            .value;
        let best = options.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
        let optimum = options
            .iter()
            .find(|o| o.value >= best - EPSILON)
            .expect("non-empty")
            .clone();
        let regret = best - here;
        let required = required(regret);
        if regret <= EPSILON || required <= EPSILON {
            return Ok(ImprovementReport {
                improvement: current.clone(),
                optimum: optimum.assignment,
                current_value: here,
                optimum_value: best,
                improved_value: here,
            });
        }
        let qualified = || options.iter().filter(|o| o.value - here >= required);
        let worst = qualified().map(|o| o.value).fold(f64::INFINITY, f64::min);
        let chosen = qualified()
            .find(|o| o.value <= worst + EPSILON)
            .expect("the optimum qualifies");
        Ok(ImprovementReport {
            improvement: chosen.assignment.clone(),
            optimum: optimum.assignment,
            current_value: here,
            optimum_value: best,
            improved_value: chosen.value,
        })
    }
}

impl ImprovementProvider for SimulatedUser {
    fn improve_part(
        &mut self,
        model: &ProblemModel,
        x: &Configuration,
        part: usize,
        objective: &FeatureSet,
    ) -> Result<PartialConfiguration> {
        Ok(self.improve_part_report(model, x, part, objective)?.improvement)
    }

    fn improve_full(&mut self, model: &ProblemModel, x: &Configuration) -> Result<Configuration> {
        let report = self.improve_full_report(model, x)?;
        Ok(x.with(&report.improvement))
    }
}

/// `count` users with i.i.d. standard-normal weights, drawn sequentially from one stream.
pub fn sample_users(num_features: usize, count: usize, seed: u64, alpha: f64) -> Result<Vec<SimulatedUser>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w: Vec<f64> = (0..num_features).map(|_| StandardNormal.sample(&mut rng)).collect();
            SimulatedUser::new(WeightVector(w), alpha)
        })
        .collect()
}

/// A replayable set of users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserBank {
    pub seed: u64,
    pub alpha: f64,
    pub users: Vec<WeightVector>,
}

impl UserBank {
    pub fn sample(num_features: usize, count: usize, seed: u64, alpha: f64) -> Result<Self> {
        let users = sample_users(num_features, count, seed, alpha)?;
        Ok(UserBank {
            seed,
            alpha,
            users: users.into_iter().map(|u| u.weights).collect(),
        })
    }

    pub fn simulated(&self) -> Result<Vec<SimulatedUser>> {
        self.users
            .iter()
            .map(|w| SimulatedUser::new(w.clone(), self.alpha))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_reproducible() {
        let a = sample_users(7, 3, 42, 0.5).unwrap();
        let b = sample_users(7, 3, 42, 0.5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].weights, a[1].weights);
        assert_eq!(sample_users(7, 20, 1, 0.5).unwrap().len(), 20);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(SimulatedUser::new(WeightVector::zeros(2), 0.0).is_err());
        assert!(SimulatedUser::new(WeightVector::zeros(2), 1.5).is_err());
    }
}
