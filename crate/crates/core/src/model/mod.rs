//! Problem models: variables with finite integer domains, hard constraints,
//! feature definitions and the decomposition into basic parts.

mod config;
mod expr;
pub mod file;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

pub use config::{Configuration, FeatureSet, PartialConfiguration, WeightVector};
pub use expr::{Atom, Comparison, Interval, LinearExpr, Term, Transform, EXPR_TOLERANCE};

use crate::error::{Error, Result};

/// Integer-coded variable value.
pub type Value = i32;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    /// Sorted, distinct.
    pub domain: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDef {
    pub name: String,
    pub expr: LinearExpr,
    pub transform: Transform,
    /// Variables read by `expr`, sorted.
    pub scope: Vec<usize>,
}

impl FeatureDef {
    pub fn eval(&self, x: &[Value]) -> f64 {
        self.transform.apply(self.expr.eval(x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub id: String,
    pub expr: LinearExpr,
    pub cmp: Comparison,
    pub rhs: f64,
    pub scope: Vec<usize>,
}

impl Constraint {
    pub fn holds(&self, x: &[Value]) -> bool {
        self.cmp.holds(self.expr.eval(x), self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasicPart {
    pub name: String,
    /// Sorted variable indices.
    pub variables: Vec<usize>,
    /// Every feature whose scope intersects `variables`.
    pub features: FeatureSet,
}

/// Result of a feasibility check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Ids of violated constraints, in declaration order.
    pub violated: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ProblemModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    features: Vec<FeatureDef>,
    parts: Vec<BasicPart>,
    metadata: serde_json::Value,
    var_part: Vec<usize>,
    search_order: Vec<usize>,
    part_constraints: Vec<Vec<usize>>,
    self_contained: Vec<bool>,
    feature_bound: f64,
    part_feature_bound: usize,
    pub(crate) option_cache: Vec<OnceLock<Arc<[Box<[u16]>]>>>,
}

impl ProblemModel {
    /// Validates the components and derives the part feature subsets and the constants D and S.
    pub fn new(
        mut variables: Vec<Variable>,
        constraints: Vec<Constraint>,
        features: Vec<FeatureDef>,
        parts: Vec<(String, Vec<usize>)>,
        metadata: serde_json::Value,
    ) -> Result<Self> {
        let n_vars = variables.len();
        if n_vars == 0 {
            return Err(Error::invalid("variables", "model has no variables"));
        }
        let mut names = HashMap::new();
        for (i, var) in variables.iter_mut().enumerate() {
            if var.domain.is_empty() {
                return Err(Error::invalid(format!("variables[{i}].domain"), "empty domain"));
            }
            let before = var.domain.len();
            var.domain.sort_unstable();
            var.domain.dedup();
            if var.domain.len() != before {
                return Err(Error::invalid(
                    format!("variables[{i}].domain"),
                    "duplicate domain values",
                ));
            }
            if var.domain.len() > usize::from(u16::MAX) {
                return Err(Error::invalid(format!("variables[{i}].domain"), "domain too large"));
            }
            if names.insert(var.name.clone(), i).is_some() {
                return Err(Error::invalid(
                    format!("variables[{i}].name"),
                    format!("duplicate variable name `{}`", var.name),
                ));
            }
        }

        let check_expr = |expr: &LinearExpr, path: &str| -> Result<()> {
            if !expr.constant.is_finite() {
                return Err(Error::invalid(format!("{path}.constant"), "not finite"));
            }
            for (k, term) in expr.terms.iter().enumerate() {
                if !term.coef.is_finite() {
                    return Err(Error::invalid(format!("{path}.terms[{k}].coef"), "not finite"));
                }
                match &term.atom {
                    Atom::Conj(lits) => {
                        for (l, &(v, val)) in lits.iter().enumerate() {
                            let var = variables.get(v).ok_or_else(|| {
                                Error::invalid(
                                    format!("{path}.terms[{k}].lits[{l}]"),
                                    format!("variable index {v} out of range"),
                                )
                            })?;
                            if var.domain.binary_search(&val).is_err() {
                                return Err(Error::invalid(
                                    format!("{path}.terms[{k}].lits[{l}]"),
                                    format!("value {val} not in the domain of `{}`", var.name),
                                ));
                            }
                        }
                    }
                    Atom::Var(v) => {
                        if *v >= n_vars {
                            return Err(Error::invalid(
                                format!("{path}.terms[{k}].var"),
                                format!("variable index {v} out of range"),
                            ));
                        }
                    }
                }
            }
            Ok(())
        };

        let mut ids = HashMap::new();
        for (c, con) in constraints.iter().enumerate() {
            check_expr(&con.expr, &format!("constraints[{c}]"))?;
            if !con.rhs.is_finite() {
                return Err(Error::invalid(format!("constraints[{c}].rhs"), "not finite"));
            }
            if ids.insert(con.id.clone(), c).is_some() {
                return Err(Error::invalid(
                    format!("constraints[{c}].id"),
                    format!("duplicate constraint id `{}`", con.id),
                ));
            }
            if con.scope != con.expr.scope() {
                return Err(Error::invalid(
                    format!("constraints[{c}]"),
                    "scope does not match the variables of the expression",
                ));
            }
        }

        if features.is_empty() {
            return Err(Error::invalid("features", "model has no features"));
        }
        let mut feature_bound: f64 = 0.0;
        let mut fnames = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            let path = format!("features[{i}]");
            check_expr(&f.expr, &path)?;
            if let Transform::Hinge { threshold } = f.transform {
                if !threshold.is_finite() {
                    return Err(Error::invalid(format!("{path}.transform.threshold"), "not finite"));
                }
            }
            if f.scope != f.expr.scope() {
                return Err(Error::invalid(
                    path,
                    "scope does not match the variables of the expression",
                ));
            }
            if f.scope.is_empty() {
                return Err(Error::invalid(path, "feature reads no variables"));
            }
            if fnames.insert(f.name.clone(), i).is_some() {
                return Err(Error::invalid(
                    format!("{path}.name"),
                    format!("duplicate feature name `{}`", f.name),
                ));
            }
            let iv = f.transform.image(f.expr.interval(|v| variables[v].domain.as_slice()));
            if !iv.lo.is_finite() || !iv.hi.is_finite() {
                return Err(Error::invalid(path, "feature value is unbounded"));
            }
            feature_bound = feature_bound.max(iv.abs_max());
        }

        if parts.is_empty() {
            return Err(Error::invalid("parts", "model has no parts"));
        }
        let mut var_part = vec![usize::MAX; n_vars];
        let mut pnames = HashMap::new();
        for (p, (name, vars)) in parts.iter().enumerate() {
            if vars.is_empty() {
                return Err(Error::invalid(format!("parts[{p}].variables"), "part has no variables"));
            }
            if pnames.insert(name.clone(), p).is_some() {
                return Err(Error::invalid(
                    format!("parts[{p}].name"),
                    format!("duplicate part name `{name}`"),
                ));
            }
            for (k, &v) in vars.iter().enumerate() {
                if v >= n_vars {
                    return Err(Error::invalid(
                        format!("parts[{p}].variables[{k}]"),
                        format!("variable index {v} out of range"),
                    ));
                }
                if var_part[v] != usize::MAX {
                    return Err(Error::invalid(
                        format!("parts[{p}].variables[{k}]"),
                        format!(
                            "variable `{}` already belongs to part `{}`",
                            variables[v].name, parts[var_part[v]].0
                        ),
                    ));
                }
                var_part[v] = p;
            }
        }
        if let Some(v) = var_part.iter().position(|&p| p == usize::MAX) {
            return Err(Error::invalid(
                "parts",
                format!("variable `{}` is not covered by any part", variables[v].name),
            ));
        }

        let mut basic_parts: Vec<BasicPart> = parts
            .into_iter()
            .map(|(name, mut vars)| {
                vars.sort_unstable();
                BasicPart {
                    name,
                    variables: vars,
                    features: FeatureSet::empty(),
                }
            })
            .collect();
        let mut part_features: Vec<Vec<usize>> = vec![Vec::new(); basic_parts.len()];
        for (i, f) in features.iter().enumerate() {
            let mut touched: Vec<usize> = f.scope.iter().map(|&v| var_part[v]).collect();
            touched.sort_unstable();
            touched.dedup();
            for p in touched {
                part_features[p].push(i);
            }
        }
        for (part, fs) in basic_parts.iter_mut().zip(part_features) {
            part.features = FeatureSet::new(fs);
        }
        for p in 0..basic_parts.len() {
            let exclusive = basic_parts[p].features.iter().any(|i| {
                basic_parts
                    .iter()
                    .enumerate()
                    .all(|(q, other)| q == p || !other.features.contains(i))
            });
            if !exclusive {
                return Err(Error::invalid(
                    format!("parts[{p}]"),
                    format!("part `{}` has no feature that is exclusive to it", basic_parts[p].name),
                ));
            }
        }
        let part_feature_bound = basic_parts.iter().map(|p| p.features.len()).max().unwrap_or(0);

        let mut part_constraints = vec![Vec::new(); basic_parts.len()];
        let mut self_contained = vec![true; basic_parts.len()];
        for (c, con) in constraints.iter().enumerate() {
            let mut touched: Vec<usize> = con.scope.iter().map(|&v| var_part[v]).collect();
            touched.sort_unstable();
            touched.dedup();
            for &p in &touched {
                part_constraints[p].push(c);
                if touched.len() > 1 {
                    self_contained[p] = false;
                }
            }
        }
        let search_order = basic_parts.iter().flat_map(|p| p.variables.iter().copied()).collect();
        let option_cache = (0..basic_parts.len()).map(|_| OnceLock::new()).collect();

        Ok(ProblemModel {
            variables,
            constraints,
            features,
            parts: basic_parts,
            metadata,
            var_part,
            search_order,
            part_constraints,
            self_contained,
            feature_bound,
            part_feature_bound,
            option_cache,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn parts(&self) -> &[BasicPart] {
        &self.parts
    }

    pub fn metadata(&self) -> &serde_json::Value {
        &self.metadata
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// m
    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    /// n
    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    /// D: bound on the max-norm of any feature vector, from interval propagation.
    pub fn feature_bound(&self) -> f64 {
        self.feature_bound
    }

    /// S: size of the largest part feature subset.
    pub fn part_feature_bound(&self) -> usize {
        self.part_feature_bound
    }

    pub fn part_of(&self, var: usize) -> usize {
        self.var_part[var]
    }

    /// Variables ordered part by part (parts in id order, declared order within a part).
    /// This is the enumeration order used for lexicographic tie-breaking.
    pub fn search_order(&self) -> &[usize] {
        &self.search_order
    }

    pub(crate) fn part_constraints(&self, part: usize) -> &[usize] {
        &self.part_constraints[part]
    }

    /// True if every constraint touching the part reads only the part's variables.
    pub fn is_self_contained(&self, part: usize) -> bool {
        self.self_contained[part]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.name == name)
    }

    pub fn part(&self, p: usize) -> Result<&BasicPart> {
        self.parts.get(p).ok_or(Error::PartIndex {
            index: p,
            len: self.parts.len(),
        })
    }

    pub fn domain_index(&self, var: usize, value: Value) -> Option<usize> {
        self.variables[var].domain.binary_search(&value).ok()
    }

    pub fn check_domain(&self, x: &Configuration) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::Arity {
                expected: self.num_vars(),
                got: x.len(),
            });
        }
        for (v, &val) in x.values().iter().enumerate() {
            if self.domain_index(v, val).is_none() {
                return Err(Error::Domain {
                    variable: self.variables[v].name.clone(),
                    value: val,
                });
            }
        }
        Ok(())
    }

    /// phi(x). Fails on out-of-domain values.
    pub fn feature_vector(&self, x: &Configuration) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        Ok(self.phi(x))
    }

    /// phi(x) without domain checks.
    pub fn phi(&self, x: &Configuration) -> Vec<f64> {
        self.features.iter().map(|f| f.eval(x.values())).collect()
    }

    pub fn feature_value(&self, i: usize, x: &Configuration) -> f64 {
        self.features[i].eval(x.values())
    }

    /// phi restricted to `set`: `(index, value)` pairs in ascending index order.
    pub fn phi_on(&self, set: &FeatureSet, x: &Configuration) -> Vec<(usize, f64)> {
        set.iter().map(|i| (i, self.feature_value(i, x))).collect()
    }

    /// u[set](x) = sum over i in set of w_i phi_i(x).
    pub fn partial_utility(&self, w: &WeightVector, set: &FeatureSet, x: &Configuration) -> Result<f64> {
        if let Some(max) = set.max() {
            if max >= self.num_features() {
                return Err(Error::FeatureIndex {
                    index: max,
                    len: self.num_features(),
                });
            }
        }
        self.check_domain(x)?;
        Ok(self.partial_utility_unchecked(w, set, x))
    }

    pub(crate) fn partial_utility_unchecked(&self, w: &WeightVector, set: &FeatureSet, x: &Configuration) -> f64 {
        set.iter().map(|i| w.0[i] * self.features[i].eval(x.values())).sum()
    }

    pub fn utility(&self, w: &WeightVector, x: &Configuration) -> f64 {
        self.features
            .iter()
            .zip(&w.0)
            .map(|(f, wi)| wi * f.eval(x.values()))
            .sum()
    }

    pub fn check_feasible(&self, x: &Configuration) -> Result<Feasibility> {
        self.check_domain(x)?;
        let violated: Vec<String> = self
            .constraints
            .iter()
            .filter(|c| !c.holds(x.values()))
            .map(|c| c.id.clone())
            .collect();
        Ok(Feasibility {
            feasible: violated.is_empty(),
            violated,
        })
    }

    pub fn is_feasible(&self, x: &Configuration) -> bool {
        self.constraints.iter().all(|c| c.holds(x.values()))
    }

    /// x_p
    pub fn restrict(&self, x: &Configuration, part: usize) -> PartialConfiguration {
        let vars = self.parts[part].variables.clone();
        let values = vars.iter().map(|&v| x.values()[v]).collect();
        PartialConfiguration {
            parts: vec![part],
            vars,
            values,
        }
    }

    /// Checks that `partial` assigns exactly the variables of `part` with in-domain values.
    pub fn expect_part_assignment(&self, part: usize, partial: &PartialConfiguration) -> Result<()> {
        let bp = self.part(part)?;
        if partial.vars != bp.variables {
            return Err(Error::PartMismatch { part: bp.name.clone() });
        }
        for (&v, &val) in partial.vars.iter().zip(&partial.values) {
            if self.domain_index(v, val).is_none() {
                return Err(Error::Domain {
                    variable: self.variables[v].name.clone(),
                    value: val,
                });
            }
        }
        Ok(())
    }

    /// Parts whose feature subsets overlap the given part's (excluding itself).
    pub fn neighbors(&self, part: usize) -> Vec<usize> {
        let own = &self.parts[part].features;
        (0..self.parts.len())
            .filter(|&q| q != part && self.parts[q].features.intersects(own))
            .collect()
    }

    /// Parses a configuration given as a `{variable name: value}` map.
    pub fn configuration_from_map(&self, map: &HashMap<String, Value>) -> Result<Configuration> {
        let mut values = vec![None; self.num_vars()];
        for (name, &val) in map {
            let v = self
                .var_index(name)
                .ok_or_else(|| Error::invalid(name.clone(), "unknown variable"))?;
            values[v] = Some(val);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(v, val)| val.ok_or_else(|| Error::invalid(self.variables[v].name.clone(), "variable not assigned")))
            .collect::<Result<Vec<_>>>()?;
        let x = Configuration(values);
        self.check_domain(&x)?;
        Ok(x)
    }

    pub fn configuration_to_map(&self, x: &Configuration) -> serde_json::Map<String, serde_json::Value> {
        self.variables
            .iter()
            .zip(x.values())
            .map(|(var, &val)| (var.name.clone(), serde_json::Value::from(val)))
            .collect()
    }
}

/// Incremental construction of a [`ProblemModel`] by variable name.
#[derive(Debug, Default)]
pub struct ModelBuilder {
    variables: Vec<Variable>,
    index: HashMap<String, usize>,
    constraints: Vec<Constraint>,
    features: Vec<FeatureDef>,
    parts: Vec<(String, Vec<usize>)>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, name: impl Into<String>, domain: Vec<Value>) -> usize {
        let name = name.into();
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable { name, domain });
        id
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn feature(&mut self, name: impl Into<String>, expr: LinearExpr, transform: Transform) -> usize {
        let scope = expr.scope();
        self.features.push(FeatureDef {
            name: name.into(),
            expr,
            transform,
            scope,
        });
        self.features.len() - 1
    }

    pub fn constraint(&mut self, id: impl Into<String>, expr: LinearExpr, cmp: Comparison, rhs: f64) {
        let scope = expr.scope();
        self.constraints.push(Constraint {
            id: id.into(),
            expr,
            cmp,
            rhs,
            scope,
        });
    }

    pub fn part(&mut self, name: impl Into<String>, vars: Vec<usize>) {
        self.parts.push((name.into(), vars));
    }

    pub fn build(self, metadata: serde_json::Value) -> Result<ProblemModel> {
        ProblemModel::new(self.variables, self.constraints, self.features, self.parts, metadata)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_part_model() -> ModelBuilder {
        let mut b = ModelBuilder::new();
        let a = b.var("a", vec![0, 1]);
        let c = b.var("c", vec![0, 1, 2]);
        b.feature("fa", LinearExpr::new(vec![Term::var(1.0, a)]), Transform::Identity);
        b.feature("fc", LinearExpr::new(vec![Term::var(-2.0, c)]), Transform::Identity);
        b.feature(
            "diff",
            LinearExpr::new(vec![Term::var(1.0, a), Term::var(-1.0, c)]),
            Transform::SignedIndicator,
        );
        b.constraint(
            "sum",
            LinearExpr::new(vec![Term::var(1.0, a), Term::var(1.0, c)]),
            Comparison::Le,
            2.0,
        );
        b.part("pa", vec![a]);
        b.part("pc", vec![c]);
        b
    }

    #[test]
    fn derives_part_features_and_bounds() {
        let m = two_part_model().build(serde_json::Value::Null).unwrap();
        assert_eq!(m.parts()[0].features.as_slice(), &[0, 2]);
        assert_eq!(m.parts()[1].features.as_slice(), &[1, 2]);
        assert_eq!(m.feature_bound(), 4.0);
        assert_eq!(m.part_feature_bound(), 2);
        assert!(!m.is_self_contained(0));
        assert_eq!(m.neighbors(0), vec![1]);
    }

    #[test]
    fn feasibility_lists_violations() {
        let m = two_part_model().build(serde_json::Value::Null).unwrap();
        let ok = m.check_feasible(&Configuration(vec![0, 2])).unwrap();
        assert!(ok.feasible);
        let bad = m.check_feasible(&Configuration(vec![1, 2])).unwrap();
        assert_eq!(bad.violated, vec!["sum".to_string()]);
    }

    #[test]
    fn rejects_out_of_domain_and_bad_indices() {
        let m = two_part_model().build(serde_json::Value::Null).unwrap();
        assert!(matches!(
            m.feature_vector(&Configuration(vec![3, 0])),
            Err(Error::Domain { .. })
        ));
        let w = WeightVector::zeros(3);
        assert!(matches!(
            m.partial_utility(&w, &FeatureSet::new(vec![7]), &Configuration(vec![0, 0])),
            Err(Error::FeatureIndex { .. })
        ));
        assert_eq!(
            m.partial_utility(&w, &FeatureSet::empty(), &Configuration(vec![0, 0]))
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_part_without_exclusive_feature() {
        let mut b = ModelBuilder::new();
        let a = b.var("a", vec![0, 1]);
        let c = b.var("c", vec![0, 1]);
        b.feature(
            "shared",
            LinearExpr::new(vec![Term::var(1.0, a), Term::var(1.0, c)]),
            Transform::Identity,
        );
        b.feature("own", LinearExpr::new(vec![Term::var(1.0, a)]), Transform::Identity);
        b.part("pa", vec![a]);
        b.part("pc", vec![c]);
        let err = b.build(serde_json::Value::Null).unwrap_err();
        assert!(err.to_string().starts_with("parts[1]"), "{err}");
    }

    #[test]
    fn rejects_uncovered_and_doubly_covered_variables() {
        let mut b = ModelBuilder::new();
        let a = b.var("a", vec![0, 1]);
        b.var("c", vec![0, 1]);
        b.feature("fa", LinearExpr::new(vec![Term::var(1.0, a)]), Transform::Identity);
        b.part("pa", vec![a]);
        let err = b.build(serde_json::Value::Null).unwrap_err();
        assert!(err.to_string().contains("not covered"), "{err}");

        let mut b = ModelBuilder::new();
        let a = b.var("a", vec![0, 1]);
        b.feature("fa", LinearExpr::new(vec![Term::var(1.0, a)]), Transform::Identity);
        b.part("p1", vec![a]);
        b.part("p2", vec![a]);
        let err = b.build(serde_json::Value::Null).unwrap_err();
        assert!(err.to_string().starts_with("parts[1].variables[0]"), "{err}");
    }
}
