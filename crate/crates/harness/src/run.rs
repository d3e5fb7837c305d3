//! Simulated elicitation runs with every learning-guarantee invariant checked inline.

use std::sync::Arc;
use std::time::Duration;

use pcl_core::inference::{certify_local_optimum, infer_full, SearchMode};
use pcl_core::learner::{Algorithm, Branch, IterationRecord, LearnerConfig, LearnerState};
use pcl_core::model::{Configuration, FeatureSet, ProblemModel, WeightVector};
use pcl_core::simuser::{ImprovementReport, SimulatedUser, UserBank};
use pcl_core::EPSILON;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::metrics::{le_tol, regret_bound, MetricsRow, RuntimeRow};
use crate::{HarnessError, Result};

/// A user's global optimum `x*` under `w*`.
#[derive(Clone, Debug, Serialize)]
pub struct Optimum {
    pub configuration: Configuration,
    pub value: f64,
}

/// A problem, its simulated users and (optionally) their optima, shared across runs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub model: Arc<ProblemModel>,
    pub bank: UserBank,
    pub optima: Option<Vec<Optimum>>,
}

impl Prepared {
    pub fn new(
        model: ProblemModel,
        users: usize,
        seed: u64,
        alpha: f64,
        with_optima: bool,
        mode: SearchMode,
    ) -> Result<Self> {
        let model = Arc::new(model);
        let bank = UserBank::sample(model.num_features(), users, seed, alpha)?;
        let optima = if with_optima {
            let found: pcl_core::Result<Vec<Optimum>> = bank
                .users
                .par_iter()
                .map(|w| {
                    let configuration = infer_full(&model, w, mode)?;
                    let value = model.utility(w, &configuration);
                    Ok(Optimum { configuration, value })
                })
                .collect();
            Some(found?)
        } else {
            None
        };
        Ok(Prepared { model, bank, optima })
    }

    pub fn for_config(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = crate::config::load_problem(&config.problem)?;
        Prepared::new(
            model,
            config.users,
            config.seed,
            config.alpha,
            config.regret,
            config.mode,
        )
    }

    pub fn regret(&self, user: usize, x: &Configuration) -> Option<f64> {
        let optima = self.optima.as_ref()?;
        Some(optima[user].value - self.model.utility(&self.bank.users[user], x))
    }
}

/// A failed inline check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub user: usize,
    pub t: u64,
    pub check: &'static str,
    pub detail: String,
}

/// Counts of checks performed, by kind.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckCounts {
    pub regret_bound: u64,
    pub telescoping: u64,
    pub norm_bound: u64,
    pub untouched: u64,
    pub inference_optimality: u64,
    pub alpha_informative: u64,
    pub nonnegativity: u64,
    pub certification: u64,
}

impl CheckCounts {
    fn add(&mut self, other: &CheckCounts) {
        self.regret_bound += other.regret_bound;
        self.telescoping += other.telescoping;
        self.norm_bound += other.norm_bound;
        self.untouched += other.untouched;
        self.inference_optimality += other.inference_optimality;
        self.alpha_informative += other.alpha_informative;
        self.nonnegativity += other.nonnegativity;
        self.certification += other.certification;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UserRun {
    pub user: usize,
    pub rows: Vec<MetricsRow>,
    #[serde(skip)]
    pub runtime: Vec<RuntimeRow>,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
    /// Regret of the starting configuration.
    pub initial_regret: Option<f64>,
    pub final_regret: Option<f64>,
    pub converged_at: Option<u64>,
    /// Local-optimality certificate under `w*` when the stopping rule fired.
    pub certified: Option<bool>,
    pub final_configuration: Configuration,
    pub checks: CheckCounts,
    pub violations: Vec<Violation>,
}

impl UserRun {
    /// Regret after iteration `t`, carried forward once the run stopped.
    pub fn regret_at(&self, t: u64) -> Option<f64> {
        if t == 0 {
            return self.initial_regret;
        }
        let k = (t as usize).min(self.rows.len());
        self.rows[k - 1].regret
    }

    /// Cumulative inference time after iteration `t`, carried forward.
    pub fn runtime_at(&self, t: u64) -> f64 {
        if t == 0 || self.runtime.is_empty() {
            return 0.0;
        }
        let k = (t as usize).min(self.runtime.len());
        self.runtime[k - 1].cumulative_secs
    }
}

struct Checker {
    user: usize,
    counts: CheckCounts,
    violations: Vec<Violation>,
}

impl Checker {
    fn check(&mut self, t: u64, check: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        match check {
            "regret_bound" => self.counts.regret_bound += 1,
            "telescoping" => self.counts.telescoping += 1,
            "norm_bound" => self.counts.norm_bound += 1,
            "untouched" => self.counts.untouched += 1,
            "inference_optimality" => self.counts.inference_optimality += 1,
            "alpha_informative" => self.counts.alpha_informative += 1,
            "nonnegativity" => self.counts.nonnegativity += 1,
            "certification" => self.counts.certification += 1,
            _ => unreachable!("unknown check {check}"),
        }
        if !ok {
            self.violations.push(Violation {
                user: self.user,
                t,
                check,
                detail: detail(),
            });
        }
    }
}

fn inner(a: &WeightVector, b: &WeightVector) -> f64 {
    a.dot(b.as_slice())
}

/// Runs one simulated user to convergence or the iteration budget.
pub fn run_user(prepared: &Prepared, config: &ExperimentConfig, user: usize) -> Result<UserRun> {
    if config.matched_gain {
        let paired = ExperimentConfig {
            algorithm: Algorithm::Pcl,
            matched_gain: false,
            ..config.clone()
        };
        let gains: Vec<f64> = run_user_with(prepared, &paired, user, None)?
            .rows
            .iter()
            .map(|r| r.gain)
            .collect();
        return run_user_with(prepared, config, user, Some(&gains));
    }
    run_user_with(prepared, config, user, None)
}

/// `targets` holds per-iteration gain targets for the matched baseline.
fn run_user_with(
    prepared: &Prepared,
    config: &ExperimentConfig,
    user: usize,
    targets: Option<&[f64]>,
) -> Result<UserRun> {
    let model = &prepared.model;
    let w_star = &prepared.bank.users[user];
    let simulated = SimulatedUser::new(w_star.clone(), config.alpha)?;
    let learner_config = LearnerConfig {
        algorithm: config.algorithm,
        selection: config.selection,
        seed: config.learner_seed(user),
        exploration: config.exploration,
        mode: config.mode,
        ..Default::default()
    };
    let mut state = LearnerState::new(Arc::clone(model), learner_config)?;
    let mut checker = Checker {
        user,
        counts: CheckCounts::default(),
        violations: Vec::new(),
    };
    let all = FeatureSet::full(model.num_features());
    let d = model.feature_bound();
    let s = match config.algorithm {
        Algorithm::Pcl => model.part_feature_bound() as f64,
        Algorithm::Cl => model.num_features() as f64,
    };
    let w_star_norm = w_star.norm();
    let initial_regret = prepared.regret(user, state.configuration());

    let mut rows = Vec::new();
    let mut runtime = Vec::new();
    let (mut sum_creg, mut sum_zeta, mut cumulative) = (0.0, 0.0, Duration::ZERO);
    let mut converged_at = None;
    let mut certified = None;

    for t in 1..=config.iters {
        let w_t = state.weights().clone();
        let previous = state.configuration().clone();
        let rec = state.propose()?.clone();
        let x = rec.configuration.clone();
        let (report, i_set, j_set): (ImprovementReport, FeatureSet, FeatureSet) = match rec.part {
            Some(p) => {
                let i_set = state.decomposition().i_of(p).clone();
                let j_set = state.decomposition().j_of(p).clone();
                (simulated.improve_part_report(model, &x, p, &i_set)?, i_set, j_set)
            }
            None => {
                let report = match targets {
                    Some(g) => {
                        simulated.improve_full_matched(model, &x, g.get(t as usize - 1).copied().unwrap_or(0.0))?
                    }
                    None => simulated.improve_full_report(model, &x)?,
                };
                (report, all.clone(), all.clone())
            }
        };
        let record = state.feedback(&report.improvement)?;
        let x_hat = x.with(&report.improvement);
        let w_next = state.weights().clone();
        let creg = report.regret();
        let gain = report.gain();

        // Inference optimality under the learner's model: the recommendation is
        // J-optimal given the remainder, so it beats both the previous part and the
        // user's improvement.
        let u_j = |x: &Configuration| model.partial_utility(&w_t, &j_set, x);
        let (here, before, improved) = (u_j(&x)?, u_j(&previous)?, u_j(&x_hat)?);
        checker.check(
            t,
            "inference_optimality",
            improved <= here + EPSILON && before <= here + EPSILON,
            || format!("u_t[J](x) = {here}, u_t[J](previous) = {before}, u_t[J](x_hat) = {improved}"),
        );

        // Matched improvements are not α-informative by construction, and the
        // regret bound assumes they are.
        let informative = targets.is_none();
        if informative {
            checker.check(
                t,
                "alpha_informative",
                gain >= config.alpha * creg - EPSILON && model.is_feasible(&x_hat),
                || format!("gain {gain} < alpha * CREG = {}", config.alpha * creg),
            );
        }

        let q_set = record.q_set().clone();
        let missed = i_set.difference(&q_set);
        let zeta = if record.branch == Branch::J {
            model.partial_utility(w_star, &missed, &x_hat)? - model.partial_utility(w_star, &missed, &x)?
        } else {
            0.0
        };

        // Telescoping: <w*, w^{t+1}> - <w*, w^t> = u*[Q](x_hat) - u*[Q](x).
        let lhs = inner(w_star, &w_next) - inner(w_star, &w_t);
        let rhs = model.partial_utility(w_star, &q_set, &x_hat)? - model.partial_utility(w_star, &q_set, &x)?;
        let scale = inner(w_star, &w_next).abs() + inner(w_star, &w_t).abs();
        checker.check(t, "telescoping", (lhs - rhs).abs() <= 1e-9 * scale.max(1.0), || {
            format!("inner-product change {lhs} vs utility change {rhs}")
        });

        let norm_sq = w_next.norm_sq();
        let norm_bound = 4.0 * d * d * s * s * t as f64;
        checker.check(t, "norm_bound", le_tol(norm_sq, norm_bound), || {
            format!("|w|^2 = {norm_sq} > 4 D^2 S^2 t = {norm_bound}")
        });

        let untouched = (0..model.num_features())
            .filter(|&i| !q_set.contains(i))
            .all(|i| w_next.0[i] == w_t.0[i]);
        checker.check(t, "untouched", untouched, || {
            "a coordinate outside the update set changed".into()
        });

        let regret = prepared.regret(user, &x);
        checker.check(
            t,
            "nonnegativity",
            creg >= -EPSILON && regret.map_or(true, |r| r >= -1e-9 * r.abs().max(1.0)),
            || format!("CREG {creg}, regret {regret:?}"),
        );

        sum_creg += creg;
        sum_zeta += zeta;
        let avg_creg = sum_creg / t as f64;
        let bound = regret_bound(d, s, w_star_norm, config.alpha, t, sum_zeta);
        if informative {
            checker.check(t, "regret_bound", le_tol(avg_creg, bound), || {
                format!("average CREG {avg_creg} exceeds the bound {bound}")
            });
        }

        cumulative += rec.inference_time;
        runtime.push(RuntimeRow {
            user,
            t,
            inference_secs: rec.inference_time.as_secs_f64(),
            cumulative_secs: cumulative.as_secs_f64(),
        });
        rows.push(MetricsRow {
            user,
            t,
            part: rec
                .part
                .map(|p| model.parts()[p].name.clone())
                .unwrap_or_else(|| "all".into()),
            branch: record.branch,
            regret,
            creg,
            gain,
            zeta,
            avg_creg,
            bound,
            norm_sq,
            converged: record.converged,
        });

        if record.converged {
            converged_at = Some(t);
            if config.algorithm == Algorithm::Pcl {
                let cert = certify_local_optimum(model, w_star, &x, config.mode)?;
                certified = Some(cert.is_optimal());
                checker.check(t, "certification", cert.is_optimal(), || {
                    format!("stopping rule fired but x is not a local optimum: {cert:?}")
                });
            }
            break;
        }
    }

    let final_configuration = state.configuration().clone();
    Ok(UserRun {
        user,
        final_regret: prepared.regret(user, &final_configuration),
        rows,
        runtime,
        trace: state.trace().to_vec(),
        initial_regret,
        converged_at,
        certified,
        final_configuration,
        checks: checker.counts,
        violations: checker.violations,
    })
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub runs: Vec<UserRun>,
}

impl Experiment {
    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.runs.iter().flat_map(|r| r.violations.iter())
    }

    pub fn checks(&self) -> CheckCounts {
        let mut total = CheckCounts::default();
        for r in &self.runs {
            total.add(&r.checks);
        }
        total
    }

    /// Mean regret across users after iteration `t` (0 = starting configuration).
    pub fn mean_regret_at(&self, t: u64) -> Option<f64> {
        let values: Option<Vec<f64>> = self.runs.iter().map(|r| r.regret_at(t)).collect();
        values.map(|v| crate::metrics::mean(&v))
    }
}

/// Runs every user of `prepared` under `config`, users in parallel, results in user order.
pub fn run_prepared(prepared: &Prepared, config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    if prepared.bank.users.len() < config.users {
        return Err(HarnessError::Config(format!(
            "{} users requested, {} prepared",
            config.users,
            prepared.bank.users.len()
        )));
    }
    let runs = (0..config.users)
        .into_par_iter()
        .map(|k| run_user(prepared, config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        config: config.clone(),
        runs,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    let prepared = Prepared::for_config(config)?;
    run_prepared(&prepared, config)
}
