use serde::{Deserialize, Serialize};

use super::Value;
use crate::error::{Error, Result};

/// A sorted set of feature indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSet(Vec<usize>);

impl FeatureSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        FeatureSet(indices)
    }

    pub fn empty() -> Self {
        FeatureSet(Vec::new())
    }

    /// All indices `0..m`.
    pub fn full(m: usize) -> Self {
        FeatureSet((0..m).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn union(&self, other: &FeatureSet) -> FeatureSet {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        v.push(x);
                        a.next();
                    } else if y < x {
                        v.push(y);
                        b.next();
                    } else {
                        v.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    v.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    v.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        FeatureSet(v)
    }

    pub fn difference(&self, other: &FeatureSet) -> FeatureSet {
        FeatureSet(self.0.iter().copied().filter(|&i| !other.contains(i)).collect())
    }

    pub fn intersection(&self, other: &FeatureSet) -> FeatureSet {
        FeatureSet(self.0.iter().copied().filter(|&i| other.contains(i)).collect())
    }

    pub fn intersects(&self, other: &FeatureSet) -> bool {
        self.0.iter().any(|&i| other.contains(i))
    }

    pub fn is_subset(&self, other: &FeatureSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl FromIterator<usize> for FeatureSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        FeatureSet::new(iter.into_iter().collect())
    }
}

/// A total assignment, one value per model variable (indexed by variable).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(pub Vec<Value>);

impl Configuration {
    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Overwrites the variables assigned by `partial`.
    pub fn apply(&mut self, partial: &PartialConfiguration) {
        for (&v, &val) in partial.vars.iter().zip(&partial.values) {
            self.0[v] = val;
        }
    }

    /// `partial ∘ self` restricted to the complement of `partial`'s variables.
    pub fn with(&self, partial: &PartialConfiguration) -> Configuration {
        let mut out = self.clone();
        out.apply(partial);
        out
    }
}

/// An assignment to a subset of variables, tagged with the basic parts it covers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialConfiguration {
    /// Sorted basic-part ids.
    pub parts: Vec<usize>,
    /// Sorted variable indices.
    pub vars: Vec<usize>,
    pub values: Vec<Value>,
}

impl PartialConfiguration {
    /// Builds a partial configuration; `vars` need not be sorted.
    pub fn new(mut parts: Vec<usize>, vars: Vec<usize>, values: Vec<Value>) -> Result<Self> {
        if vars.len() != values.len() {
            return Err(Error::Arity {
                expected: vars.len(),
                got: values.len(),
            });
        }
        parts.sort_unstable();
        parts.dedup();
        let mut pairs: Vec<(usize, Value)> = vars.into_iter().zip(values).collect();
        pairs.sort_unstable_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 != w[1].1 {
                return Err(Error::Conflict {
                    variable: format!("#{}", w[0].0),
                    left: w[0].1,
                    right: w[1].1,
                });
            }
        }
        pairs.dedup();
        let (vars, values) = pairs.into_iter().unzip();
        Ok(PartialConfiguration { parts, vars, values })
    }

    pub fn get(&self, var: usize) -> Option<Value> {
        self.vars.binary_search(&var).ok().map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// The part combination operator: union of both assignments.
    pub fn combine(&self, other: &PartialConfiguration) -> Result<PartialConfiguration> {
        let mut parts = self.parts.clone();
        parts.extend_from_slice(&other.parts);
        let mut vars = self.vars.clone();
        vars.extend_from_slice(&other.vars);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        PartialConfiguration::new(parts, vars, values)
    }

    /// Converts to a total configuration if every variable in `0..n` is assigned.
    pub fn to_total(&self, n: usize) -> Option<Configuration> {
        if self.vars.len() != n || self.vars.iter().enumerate().any(|(i, &v)| i != v) {
            return None;
        }
        Some(Configuration(self.values.clone()))
    }
}

/// A weight per feature. Utility of `x` is `<w, phi(x)>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(m: usize) -> Self {
        WeightVector(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    /// Sum of `w_i * phi_i` over `i` in `set`.
    pub fn dot_on(&self, set: &FeatureSet, phi: &[f64]) -> f64 {
        set.iter().map(|i| self.0[i] * phi[i]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = FeatureSet::new(vec![5, 1, 3, 3]);
        let b = FeatureSet::new(vec![3, 4]);
        assert_eq!(a.as_slice(), &[1, 3, 5]);
        assert_eq!(a.union(&b).as_slice(), &[1, 3, 4, 5]);
        assert_eq!(a.difference(&b).as_slice(), &[1, 5]);
        assert_eq!(a.intersection(&b).as_slice(), &[3]);
        assert!(a.intersects(&b));
        assert!(!a.is_subset(&b));
    }

    #[test]
    fn combine_is_idempotent_and_detects_conflicts() {
        let p = PartialConfiguration::new(vec![0], vec![1, 0], vec![4, 2]).unwrap();
        assert_eq!(p.vars, vec![0, 1]);
        assert_eq!(p.combine(&p).unwrap(), p);
        let q = PartialConfiguration::new(vec![1], vec![1], vec![5]).unwrap();
        assert!(matches!(p.combine(&q), Err(Error::Conflict { .. })));
    }

    #[test]
    fn disjoint_combination_commutes() {
        let p = PartialConfiguration::new(vec![0], vec![0, 1], vec![1, 1]).unwrap();
        let q = PartialConfiguration::new(vec![1], vec![2, 3], vec![0, 1]).unwrap();
        let pq = p.combine(&q).unwrap();
        assert_eq!(pq, q.combine(&p).unwrap());
        assert_eq!(pq.to_total(4), Some(Configuration(vec![1, 1, 0, 1])));
    }
}
