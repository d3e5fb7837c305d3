//! Weekly training plan: 7 days × 5 slots, each slot resting or doing one of the
//! activities in the activity table. Each day is a basic part.
//!
//! Features, per day and body part, are the total improvement and total fatigue;
//! between consecutive days, one signed indicator per activity tells whether its
//! number of sessions differs. Hard constraints forbid activities in unavailable
//! slots and cap each body part's fatigue over any 3 consecutive slots of a day.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{Comparison, LinearExpr, ModelBuilder, ProblemModel, Term, Transform};

pub const DAYS: usize = 7;
pub const SLOTS: usize = 5;
/// Fatigue is capped over this many consecutive slots.
pub const WINDOW: usize = 3;

const DEFAULT_TABLE: &str = include_str!("../../assets/training_activities.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub name: String,
    pub improvement: Vec<u32>,
    pub fatigue: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub version: u32,
    pub body_parts: Vec<String>,
    /// Activity `k` is coded as value `k + 1`; 0 is rest.
    pub activities: Vec<Activity>,
    pub fatigue_threshold: u32,
    /// `availability[day][slot]`: 1 when the slot can hold an activity.
    pub availability: Vec<Vec<u8>>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TABLE).expect("bundled activity table parses")
    }
}

impl TrainingConfig {
    fn validate(&self) -> Result<()> {
        let nb = self.body_parts.len();
        for (k, a) in self.activities.iter().enumerate() {
            if a.improvement.len() != nb || a.fatigue.len() != nb {
                return Err(Error::invalid(
                    format!("activities[{k}]"),
                    format!("expected {nb} values per effect vector"),
                ));
            }
        }
        if self.availability.len() != DAYS || self.availability.iter().any(|d| d.len() != SLOTS) {
            return Err(Error::invalid("availability", format!("expected {DAYS}×{SLOTS} mask")));
        }
        Ok(())
    }
}

pub fn slot(day: usize, s: usize) -> String {
    format!("d{}s{}", day + 1, s + 1)
}

pub fn build_training_plan(config: &TrainingConfig) -> Result<ProblemModel> {
    config.validate()?;
    let na = config.activities.len();
    let domain: Vec<i32> = (0..=na as i32).collect();
    let mut m = ModelBuilder::new();
    let vars: Vec<Vec<usize>> = (0..DAYS)
        .map(|d| (0..SLOTS).map(|s| m.var(slot(d, s), domain.clone())).collect())
        .collect();

    // Sum over the day's slots of `effect(activity)`.
    let day_sum = |d: usize, effect: &dyn Fn(&Activity) -> u32| {
        let mut terms = Vec::new();
        for &v in &vars[d] {
            for (k, a) in config.activities.iter().enumerate() {
                let e = effect(a);
                if e != 0 {
                    terms.push(Term::conj(f64::from(e), vec![(v, k as i32 + 1)]));
                }
            }
        }
        LinearExpr::new(terms)
    };
    for d in 0..DAYS {
        for (b, body) in config.body_parts.iter().enumerate() {
            m.feature(
                format!("improvement[day{}.{body}]", d + 1),
                day_sum(d, &|a| a.improvement[b]),
                Transform::Identity,
            );
        }
        for (b, body) in config.body_parts.iter().enumerate() {
            m.feature(
                format!("fatigue[day{}.{body}]", d + 1),
                day_sum(d, &|a| a.fatigue[b]),
                Transform::Identity,
            );
        }
    }
    for d in 0..DAYS - 1 {
        for (k, a) in config.activities.iter().enumerate() {
            let value = k as i32 + 1;
            let mut terms: Vec<Term> = vars[d].iter().map(|&v| Term::conj(1.0, vec![(v, value)])).collect();
            terms.extend(vars[d + 1].iter().map(|&v| Term::conj(-1.0, vec![(v, value)])));
            m.feature(
                format!("diversity[day{}-day{}.{}]", d + 1, d + 2, a.name),
                LinearExpr::new(terms),
                Transform::SignedIndicator,
            );
        }
    }

    for d in 0..DAYS {
        for s in 0..SLOTS {
            if config.availability[d][s] == 0 {
                let v = vars[d][s];
                let busy = (1..=na as i32).map(|val| Term::conj(1.0, vec![(v, val)])).collect();
                m.constraint(
                    format!("availability[day{}.slot{}]", d + 1, s + 1),
                    LinearExpr::new(busy),
                    Comparison::Le,
                    0.0,
                );
            }
        }
        for start in 0..=SLOTS - WINDOW {
            for (b, body) in config.body_parts.iter().enumerate() {
                let mut terms = Vec::new();
                for &v in &vars[d][start..start + WINDOW] {
                    for (k, a) in config.activities.iter().enumerate() {
                        if a.fatigue[b] != 0 {
                            terms.push(Term::conj(f64::from(a.fatigue[b]), vec![(v, k as i32 + 1)]));
                        }
                    }
                }
                if terms.is_empty() {
                    continue;
                }
                m.constraint(
                    format!("fatigue[day{}.slots{}-{}.{body}]", d + 1, start + 1, start + WINDOW),
                    LinearExpr::new(terms),
                    Comparison::Le,
                    f64::from(config.fatigue_threshold),
                );
            }
        }
    }
    for (d, day_vars) in vars.iter().enumerate() {
        m.part(format!("day{}", d + 1), day_vars.clone());
    }
    let activities: Vec<&str> = config.activities.iter().map(|a| a.name.as_str()).collect();
    m.build(json!({
        "kind": "training",
        "days": DAYS,
        "slots": SLOTS,
        "values": std::iter::once("rest").chain(activities).collect::<Vec<_>>(),
        "body_parts": config.body_parts,
        "availability": config.availability,
        "fatigue_threshold": config.fatigue_threshold,
        "table_version": config.version,
    }))
}
