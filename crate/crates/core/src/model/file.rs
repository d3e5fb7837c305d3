//! JSON problem definition files.
//!
//! ```json
//! {
//!   "variables":   [{"name": "a", "domain": [0, 1]}],
//!   "constraints": [{"id": "cap", "terms": [{"coef": 1, "var": "a"}], "op": "<=", "rhs": 1}],
//!   "features":    [{"name": "f", "terms": [{"coef": 1, "lits": [["a", 1]]}],
//!                    "transform": {"kind": "signed_indicator"}}],
//!   "parts":       [{"name": "p", "variables": ["a"]}],
//!   "metadata":    {}
//! }
//! ```
//!
//! A term carries either `lits` (a conjunction of `[variable, value]` literals) or
//! `var` (the variable's value); a term with neither is the constant `coef`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Atom, Comparison, Constraint, FeatureDef, LinearExpr, ProblemModel, Term, Transform, Value, Variable};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    pub features: Vec<FeatureSpec>,
    pub parts: Vec<PartSpec>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub domain: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coef: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lits: Vec<(String, Value)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub constant: f64,
    pub terms: Vec<TermSpec>,
    pub op: Comparison,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub constant: f64,
    pub terms: Vec<TermSpec>,
    pub transform: Transform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub name: String,
    pub variables: Vec<String>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// Resolves names and validates every model invariant.
    pub fn into_model(self) -> Result<ProblemModel> {
        let mut index = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(Error::invalid(
                    format!("variables[{i}].name"),
                    format!("duplicate variable name `{}`", v.name),
                ));
            }
        }
        let resolve = |name: &str, path: String| -> Result<usize> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::invalid(path, format!("unknown variable `{name}`")))
        };
        let expr = |constant: f64, terms: &[TermSpec], path: &str| -> Result<LinearExpr> {
            let mut out = Vec::with_capacity(terms.len());
            for (k, t) in terms.iter().enumerate() {
                let atom = match (&t.var, t.lits.is_empty()) {
                    (Some(_), false) => {
                        return Err(Error::invalid(
                            format!("{path}.terms[{k}]"),
                            "a term has either `lits` or `var`, not both",
                        ))
                    }
                    (Some(name), true) => Atom::Var(resolve(name, format!("{path}.terms[{k}].var"))?),
                    (None, _) => Atom::Conj(
                        t.lits
                            .iter()
                            .enumerate()
                            .map(|(l, (name, val))| Ok((resolve(name, format!("{path}.terms[{k}].lits[{l}]"))?, *val)))
                            .collect::<Result<_>>()?,
                    ),
                };
                out.push(Term { coef: t.coef, atom });
            }
            Ok(LinearExpr { constant, terms: out })
        };

        let variables = self
            .variables
            .into_iter()
            .map(|v| Variable {
                name: v.name,
                domain: v.domain,
            })
            .collect();
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(c, spec)| {
                let e = expr(spec.constant, &spec.terms, &format!("constraints[{c}]"))?;
                Ok(Constraint {
                    id: spec.id.clone(),
                    scope: e.scope(),
                    expr: e,
                    cmp: spec.op,
                    rhs: spec.rhs,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let features = self
            .features
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let e = expr(spec.constant, &spec.terms, &format!("features[{i}]"))?;
                Ok(FeatureDef {
                    name: spec.name.clone(),
                    scope: e.scope(),
                    expr: e,
                    transform: spec.transform,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let parts = self
            .parts
            .iter()
            .enumerate()
            .map(|(p, spec)| {
                let vars = spec
                    .variables
                    .iter()
                    .enumerate()
                    .map(|(k, name)| resolve(name, format!("parts[{p}].variables[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                Ok((spec.name.clone(), vars))
            })
            .collect::<Result<Vec<_>>>()?;
        ProblemModel::new(variables, constraints, features, parts, self.metadata)
    }
}

impl ProblemModel {
    pub fn from_json(text: &str) -> Result<Self> {
        ProblemFile::from_json(text)?.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ProblemFile::load(path)?.into_model()
    }

    pub fn to_file(&self) -> ProblemFile {
        let name = |v: usize| self.variables()[v].name.clone();
        let terms = |e: &LinearExpr| -> Vec<TermSpec> {
            e.terms
                .iter()
                .map(|t| match &t.atom {
                    Atom::Conj(lits) => TermSpec {
                        coef: t.coef,
                        lits: lits.iter().map(|&(v, val)| (name(v), val)).collect(),
                        var: None,
                    },
                    Atom::Var(v) => TermSpec {
                        coef: t.coef,
                        lits: Vec::new(),
                        var: Some(name(*v)),
                    },
                })
                .collect()
        };
        ProblemFile {
            variables: self
                .variables()
                .iter()
                .map(|v| VariableSpec {
                    name: v.name.clone(),
                    domain: v.domain.clone(),
                })
                .collect(),
            constraints: self
                .constraints()
                .iter()
                .map(|c| ConstraintSpec {
                    id: c.id.clone(),
                    constant: c.expr.constant,
                    terms: terms(&c.expr),
                    op: c.cmp,
                    rhs: c.rhs,
                })
                .collect(),
            features: self
                .features()
                .iter()
                .map(|f| FeatureSpec {
                    name: f.name.clone(),
                    constant: f.expr.constant,
                    terms: terms(&f.expr),
                    transform: f.transform,
                })
                .collect(),
            parts: self
                .parts()
                .iter()
                .map(|p| PartSpec {
                    name: p.name.clone(),
                    variables: p.variables.iter().map(|&v| name(v)).collect(),
                })
                .collect(),
            metadata: self.metadata().clone(),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }
}
