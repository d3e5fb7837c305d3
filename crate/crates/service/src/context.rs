//! What the user sees next to a recommended part.
//!
//! A feature is *global* when its scope reaches more than two parts. Neighbors that
//! share a local feature with the recommended part are shown with their values;
//! neighbors linked only through global features are listed by name, and the
//! global features themselves are reported as named scalars, so the complete
//! configuration is never sent.

use std::collections::BTreeSet;

use pcl_core::gai::GaiDecomposition;
use pcl_core::model::{Configuration, FeatureSet, ProblemModel};
use serde::Serialize;
use serde_json::{Map, Value};

/// Parts touched by more than this many parts make a feature global.
pub const LOCAL_REACH: usize = 2;

#[derive(Clone, Debug)]
pub struct GlobalFeatures {
    set: FeatureSet,
}

impl GlobalFeatures {
    pub fn of(model: &ProblemModel) -> Self {
        let global = model
            .features()
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                let parts: BTreeSet<usize> = f.scope.iter().map(|&v| model.part_of(v)).collect();
                parts.len() > LOCAL_REACH
            })
            .map(|(i, _)| i)
            .collect();
        GlobalFeatures {
            set: FeatureSet::new(global),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.set.contains(i)
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.set.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborContext {
    pub part: String,
    /// The neighbor's current (fixed) values.
    pub values: Map<String, Value>,
    /// Local features shared with the recommended part.
    pub shared_features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedScalar {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContextSummary {
    pub local: Vec<NeighborContext>,
    /// Parts whose features overlap the recommended part's only through global features.
    pub linked_by_globals: Vec<String>,
    /// Every global feature at the recommended configuration.
    pub globals: Vec<NamedScalar>,
    /// Problem-specific readings such as the share of the budget in use.
    pub summaries: Vec<NamedScalar>,
}

pub fn summarize(
    model: &ProblemModel,
    decomposition: &GaiDecomposition,
    globals: &GlobalFeatures,
    part: Option<usize>,
    x: &Configuration,
) -> ContextSummary {
    let mut local = Vec::new();
    let mut linked_by_globals = Vec::new();
    if let Some(p) = part {
        let own = decomposition.i_of(p);
        for q in (0..model.num_parts()).filter(|&q| q != p) {
            let shared = own.intersection(decomposition.i_of(q));
            if shared.is_empty() {
                continue;
            }
            let name = model.parts()[q].name.clone();
            let shared_local: Vec<String> = shared
                .iter()
                .filter(|&i| !globals.contains(i))
                .map(|i| model.features()[i].name.clone())
                .collect();
            if shared_local.is_empty() {
                linked_by_globals.push(name);
            } else {
                local.push(NeighborContext {
                    part: name,
                    values: part_values(model, q, x),
                    shared_features: shared_local,
                });
            }
        }
    }
    let globals = globals
        .iter()
        .map(|i| NamedScalar {
            name: model.features()[i].name.clone(),
            value: model.feature_value(i, x),
        })
        .collect();
    ContextSummary {
        local,
        linked_by_globals,
        globals,
        summaries: summaries(model, x),
    }
}

pub fn part_values(model: &ProblemModel, part: usize, x: &Configuration) -> Map<String, Value> {
    model.parts()[part]
        .variables
        .iter()
        .map(|&v| (model.variables()[v].name.clone(), Value::from(x.values()[v])))
        .collect()
}

fn summaries(model: &ProblemModel, x: &Configuration) -> Vec<NamedScalar> {
    let meta = model.metadata();
    match meta.get("kind").and_then(Value::as_str) {
        Some("hotel") => hotel_summaries(model, meta, x).unwrap_or_default(),
        _ => Vec::new(),
    }
}

/// Total cost, budget share and room counts per type, read from the variables.
fn hotel_summaries(model: &ProblemModel, meta: &Value, x: &Configuration) -> Option<Vec<NamedScalar>> {
    let strings = |key: &str| -> Option<Vec<String>> {
        meta.get(key)?
            .as_array()?
            .iter()
            .map(|v| v.as_str().map(String::from))
            .collect()
    };
    let rooms = strings("rooms")?;
    let items = strings("items")?;
    let types = strings("types")?;
    let costs: Vec<f64> = meta
        .get("costs")?
        .as_array()?
        .iter()
        .map(Value::as_f64)
        .collect::<Option<_>>()?;
    let budget = meta.get("budget")?.as_f64()?;
    let value = |name: String| model.var_index(&name).map(|v| x.values()[v]);

    let mut cost = 0.0;
    let mut counts = vec![0usize; types.len()];
    for room in &rooms {
        for (item, c) in items.iter().zip(&costs) {
            cost += c * f64::from(value(format!("{room}.{item}"))?);
        }
        let ty = usize::try_from(value(format!("{room}.type"))?).ok()?;
        *counts.get_mut(ty)? += 1;
    }
    let mut out = vec![
        NamedScalar {
            name: "cost".into(),
            value: cost,
        },
        NamedScalar {
            name: "budget".into(),
            value: budget,
        },
        NamedScalar {
            name: "budget_used_percent".into(),
            value: if budget > 0.0 { 100.0 * cost / budget } else { 0.0 },
        },
    ];
    out.extend(types.iter().zip(counts).map(|(t, n)| NamedScalar {
        name: format!("rooms.{t}"),
        value: n as f64,
    }));
    Some(out)
}
