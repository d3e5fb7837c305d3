//! One elicitation dialogue: a learner plus the turn protocol around it.
//!
//! Improvements are serialized by a per-session turn lock; a submission that
//! finds it taken is rejected as a conflict. A turn runs on a copy of the
//! learner, and the copy replaces the committed state only after the journal
//! line is written, so readers never see a half-applied step.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock, RwLockReadGuard};

use pcl_core::learner::{Algorithm, Branch, LearnerConfig, LearnerState, Recommendation};
use pcl_core::model::{Configuration, PartialConfiguration, ProblemModel, Value};
use pcl_core::selection::SelectionKind;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map};
use uuid::Uuid;

use crate::context::{summarize, ContextSummary};
use crate::error::ApiError;
use crate::journal::{Event, Journal};
use crate::registry::Problem;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    pub algorithm: Algorithm,
    pub selection: SelectionKind,
    pub seed: u64,
    /// UCB1 exploration constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploration: Option<f64>,
    /// Starting configuration by variable name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<BTreeMap<String, Value>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingImprovement,
    Inferring,
    Converged,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Improvement {
    /// The turn being answered; checked against the pending turn when present.
    #[serde(default)]
    pub turn: Option<u64>,
    /// Values for exactly the recommended variables.
    pub values: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RecommendationView {
    AwaitingImprovement {
        session: Uuid,
        turn: u64,
        /// `None` when the whole configuration is recommended.
        part: Option<String>,
        assignment: Map<String, serde_json::Value>,
        previous: Map<String, serde_json::Value>,
        context: ContextSummary,
        inference_secs: f64,
    },
    Converged {
        session: Uuid,
        turns: u64,
        configuration: Map<String, serde_json::Value>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurnResult {
    pub accepted: bool,
    pub turn: u64,
    pub part: Option<String>,
    pub branch: Branch,
    pub satisfied: bool,
    /// Satisfied and inference had left the part unchanged.
    pub clean: bool,
    pub converged: bool,
    pub estimated_gain: f64,
    pub phase: Phase,
    /// The next recommendation, absent once converged.
    pub next: Option<RecommendationView>,
}

/// Clears the in-flight flag when the turn ends, however it ends.
struct InFlight<'a>(&'a AtomicBool);

impl<'a> InFlight<'a> {
    fn start(flag: &'a AtomicBool) -> Self {
        flag.store(true, Ordering::SeqCst);
        InFlight(flag)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

#[derive(Debug)]
pub struct Session {
    pub id: Uuid,
    pub problem: Arc<Problem>,
    pub options: SessionOptions,
    initial: Configuration,
    turn: tokio::sync::Mutex<()>,
    committed: RwLock<LearnerState>,
    inferring: AtomicBool,
    closed: AtomicBool,
}

impl Session {
    /// Builds the learner and prepares the first recommendation (blocking).
    pub fn start(id: Uuid, problem: Arc<Problem>, options: SessionOptions) -> Result<Self, ApiError> {
        let model = &problem.model;
        let initial = match &options.initial {
            Some(map) => {
                let map: HashMap<String, Value> = map.iter().map(|(k, &v)| (k.clone(), v)).collect();
                Some(model.configuration_from_map(&map)?)
            }
            None => None,
        };
        let mut config = LearnerConfig {
            algorithm: options.algorithm,
            selection: options.selection,
            seed: options.seed,
            initial,
            ..LearnerConfig::default()
        };
        if let Some(c) = options.exploration {
            config.exploration = c;
        }
        let mut learner = LearnerState::new(Arc::clone(model), config)?;
        let initial = learner.configuration().clone();
        learner.propose()?;
        Ok(Session {
            id,
            problem,
            options,
            initial,
            turn: tokio::sync::Mutex::new(()),
            committed: RwLock::new(learner),
            inferring: AtomicBool::new(false),
            closed: AtomicBool::new(false),
        })
    }

    /// Rebuilds a session from its journal by replaying the accepted improvements.
    pub fn replay(problem: Arc<Problem>, events: &[Event]) -> Result<Self, ApiError> {
        let (id, options) = match events.first() {
            Some(Event::Created { session, options, .. }) => (*session, options.clone()),
            _ => {
                return Err(ApiError::Internal(
                    "journal does not start with a creation event".into(),
                ))
            }
        };
        let session = Session::start(id, problem, options)?;
        {
            let mut learner = session.write();
            for event in &events[1..] {
                let Event::Improvement { turn, values } = event else {
                    return Err(ApiError::Internal("duplicate creation event".into()));
                };
                let rec = learner
                    .pending()
                    .cloned()
                    .ok_or_else(|| ApiError::Internal(format!("turn {turn} replayed after convergence")))?;
                if rec.t != *turn {
                    return Err(ApiError::Internal(format!(
                        "journal turn {turn}, learner turn {}",
                        rec.t
                    )));
                }
                let partial = parse_improvement(&session.problem.model, &rec, values)?;
                learner.feedback(&partial)?;
                if !learner.has_converged() {
                    learner.propose()?;
                }
            }
        }
        Ok(session)
    }

    fn read(&self) -> RwLockReadGuard<'_, LearnerState> {
        self.committed.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, LearnerState> {
        self.committed.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn phase(&self) -> Phase {
        if self.read().has_converged() {
            Phase::Converged
        } else if self.inferring.load(Ordering::SeqCst) {
            Phase::Inferring
        } else {
            Phase::AwaitingImprovement
        }
    }

    pub fn recommendation(&self) -> RecommendationView {
        self.recommendation_of(&self.read())
    }

    fn recommendation_of(&self, learner: &LearnerState) -> RecommendationView {
        let model = &self.problem.model;
        match learner.pending() {
            Some(rec) if !learner.has_converged() => RecommendationView::AwaitingImprovement {
                session: self.id,
                turn: rec.t,
                part: rec.part.map(|p| model.parts()[p].name.clone()),
                assignment: partial_map(model, &rec.assignment),
                previous: partial_map(model, &rec.previous),
                context: summarize(
                    model,
                    learner.decomposition(),
                    &self.problem.globals,
                    rec.part,
                    &rec.configuration,
                ),
                inference_secs: rec.inference_time.as_secs_f64(),
            },
            _ => RecommendationView::Converged {
                session: self.id,
                turns: learner.iterations(),
                configuration: model.configuration_to_map(learner.configuration()),
            },
        }
    }

    /// Weights, configuration, trace and phase as of the last committed turn.
    pub fn snapshot(&self) -> serde_json::Value {
        let phase = self.phase();
        let learner = self.read();
        let model = &self.problem.model;
        json!({
            "session": self.id,
            "problem": self.problem.id,
            "options": self.options,
            "phase": phase,
            "turn": learner.iterations(),
            "pending_turn": learner.pending().filter(|_| !learner.has_converged()).map(|r| r.t),
            "converged": learner.has_converged(),
            "weights": learner.weights().as_slice(),
            "configuration": model.configuration_to_map(learner.configuration()),
            "initial_configuration": model.configuration_to_map(&self.initial),
            "streak": learner.streak(),
            "trace": learner.trace(),
        })
    }

    /// Applies one improvement of the pending recommendation.
    pub async fn submit(&self, journal: Option<&Journal>, improvement: Improvement) -> Result<TurnResult, ApiError> {
        let _turn = self.turn.try_lock().map_err(|_| {
            ApiError::conflict(
                "turn_in_progress",
                "another improvement for this session is being processed",
            )
        })?;
        if self.closed.load(Ordering::SeqCst) {
            return Err(ApiError::SessionNotFound(self.id.to_string()));
        }
        let mut learner = self.read().clone();
        if learner.has_converged() {
            return Err(ApiError::conflict("converged", "the session has converged"));
        }
        let rec = learner
            .pending()
            .cloned()
            .ok_or_else(|| ApiError::Internal("no pending recommendation".into()))?;
        if let Some(t) = improvement.turn {
            if t != rec.t {
                return Err(ApiError::conflict(
                    "stale_turn",
                    format!("turn {t} is not the pending turn {}", rec.t),
                ));
            }
        }
        let partial = parse_improvement(&self.problem.model, &rec, &improvement.values)?;

        let flight = InFlight::start(&self.inferring);
        let (learner, record) = tokio::task::spawn_blocking(move || {
            let record = learner.feedback(&partial).and_then(|record| {
                if !learner.has_converged() {
                    learner.propose()?;
                }
                Ok(record)
            });
            (learner, record)
        })
        .await
        .map_err(|e| ApiError::Internal(format!("turn task failed: {e}")))?;
        let record = record?;

        if let Some(journal) = journal {
            journal.append(
                self.id,
                &Event::Improvement {
                    turn: rec.t,
                    values: improvement.values,
                },
            )?;
        }
        let next = (!learner.has_converged()).then(|| self.recommendation_of(&learner));
        *self.write() = learner;
        drop(flight);

        let model = &self.problem.model;
        Ok(TurnResult {
            accepted: true,
            turn: record.t,
            part: record.part.map(|p| model.parts()[p].name.clone()),
            branch: record.branch,
            satisfied: record.satisfied,
            clean: record.clean,
            converged: record.converged,
            estimated_gain: record.estimated_gain,
            phase: if record.converged {
                Phase::Converged
            } else {
                Phase::AwaitingImprovement
            },
            next,
        })
    }

    /// Waits for any turn in flight, then marks the session closed.
    pub async fn close(&self) {
        let _turn = self.turn.lock().await;
        self.closed.store(true, Ordering::SeqCst);
    }
}

fn partial_map(model: &ProblemModel, partial: &PartialConfiguration) -> Map<String, serde_json::Value> {
    partial
        .vars
        .iter()
        .zip(&partial.values)
        .map(|(&v, &val)| (model.variables()[v].name.clone(), serde_json::Value::from(val)))
        .collect()
}

/// Maps `{variable: value}` onto the recommended variables, which it must cover exactly.
fn parse_improvement(
    model: &ProblemModel,
    rec: &Recommendation,
    values: &BTreeMap<String, Value>,
) -> Result<PartialConfiguration, ApiError> {
    let expected: Vec<&str> = rec
        .assignment
        .vars
        .iter()
        .map(|&v| model.variables()[v].name.as_str())
        .collect();
    let expected_set: BTreeSet<&str> = expected.iter().copied().collect();
    let unexpected: Vec<&str> = values
        .keys()
        .map(String::as_str)
        .filter(|k| !expected_set.contains(k))
        .collect();
    let missing: Vec<&str> = expected.iter().copied().filter(|k| !values.contains_key(*k)).collect();
    if !unexpected.is_empty() || !missing.is_empty() {
        return Err(ApiError::protocol(
            "the improvement must assign exactly the recommended variables",
            json!({
                "part": rec.part.map(|p| model.parts()[p].name.clone()),
                "expected": expected,
                "missing": missing,
                "unexpected": unexpected,
            }),
        ));
    }
    Ok(PartialConfiguration {
        parts: rec.assignment.parts.clone(),
        vars: rec.assignment.vars.clone(),
        values: expected.iter().map(|k| values[*k]).collect(),
    })
}
