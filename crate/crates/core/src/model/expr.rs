//! Feature and constraint expressions.
//!
//! An expression is a constant plus a sum of weighted atoms, where an atom is
//! either a conjunction of `variable = value` literals (1 when all hold, else 0)
//! or the integer value of a single variable. Features additionally pass the
//! expression through a [`Transform`].

use serde::{Deserialize, Serialize};

use super::Value;

/// Tolerance used when deciding whether an expression is zero and when testing constraints.
pub const EXPR_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    /// Conjunction of literals over variable indices. An empty conjunction is the constant 1.
    Conj(Vec<(usize, Value)>),
    /// Value of a variable.
    Var(usize),
}

impl Atom {
    /// Value of an atom reading only `var`, when `var = val`.
    fn eval_at(&self, var: usize, val: Value) -> f64 {
        match self {
            Atom::Conj(lits) => {
                if lits.iter().all(|&(v, x)| v == var && x == val) {
                    1.0
                } else {
                    0.0
                }
            }
            Atom::Var(_) => f64::from(val),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub atom: Atom,
}

impl Term {
    pub fn conj(coef: f64, lits: Vec<(usize, Value)>) -> Self {
        Term {
            coef,
            atom: Atom::Conj(lits),
        }
    }

    pub fn var(coef: f64, var: usize) -> Self {
        Term {
            coef,
            atom: Atom::Var(var),
        }
    }

    fn eval(&self, x: &[Value]) -> f64 {
        match &self.atom {
            Atom::Conj(lits) => {
                if lits.iter().all(|&(v, val)| x[v] == val) {
                    self.coef
                } else {
                    0.0
                }
            }
            Atom::Var(v) => self.coef * f64::from(x[*v]),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearExpr {
    pub constant: f64,
    pub terms: Vec<Term>,
}

impl LinearExpr {
    pub fn new(terms: Vec<Term>) -> Self {
        LinearExpr { constant: 0.0, terms }
    }

    pub fn eval(&self, x: &[Value]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| acc + t.eval(x))
    }

    /// Sorted, deduplicated variable indices read by the expression.
    pub fn scope(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .terms
            .iter()
            .flat_map(|t| match &t.atom {
                Atom::Conj(lits) => lits.iter().map(|&(v, _)| v).collect::<Vec<_>>(),
                Atom::Var(v) => vec![*v],
            })
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Interval hull of the expression when each variable ranges over `domain(var)`.
    ///
    /// `domain` returns the candidate values of a variable; a single-element slice
    /// means the variable is fixed. Terms reading a single variable are combined per
    /// variable (its literals are mutually exclusive), so e.g. `Σ_a c_a [x = a]`
    /// is bounded by the extreme `c_a` rather than the sum of positive ones.
    pub fn interval<'a>(&self, domain: impl Fn(usize) -> &'a [Value]) -> Interval {
        let mut acc = Interval::point(self.constant);
        let mut tables: Vec<(usize, Vec<f64>)> = Vec::new();
        for term in &self.terms {
            let single = match &term.atom {
                Atom::Var(v) => Some(*v),
                Atom::Conj(lits) => match lits.first() {
                    Some(&(v, _)) if lits.iter().all(|&(u, _)| u == v) => Some(v),
                    _ => None,
                },
            };
            if let Some(v) = single {
                let dom = domain(v);
                let k = match tables.iter().position(|(u, _)| *u == v) {
                    Some(k) => k,
                    None => {
                        tables.push((v, vec![0.0; dom.len()]));
                        tables.len() - 1
                    }
                };
                for (slot, &val) in tables[k].1.iter_mut().zip(dom) {
                    *slot += term.coef * term.atom.eval_at(v, val);
                }
                continue;
            }
            let Atom::Conj(lits) = &term.atom else { unreachable!() };
            let mut can_hold = true;
            let mut must_hold = true;
            for &(v, val) in lits {
                let dom = domain(v);
                if !dom.contains(&val) {
                    can_hold = false;
                }
                if dom.len() != 1 || dom[0] != val {
                    must_hold = false;
                }
            }
            let atom = match (can_hold, must_hold) {
                (false, _) => Interval::point(0.0),
                (true, true) => Interval::point(1.0),
                (true, false) => Interval::new(0.0, 1.0),
            };
            acc = acc + atom.scale(term.coef);
        }
        for (_, table) in tables {
            let lo = table.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                acc = acc + Interval::new(lo, hi);
            }
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// +1 when the expression is nonzero, -1 when it is zero. Maps {0, 1} to {-1, +1}.
    SignedIndicator,
    /// max(0, expr - threshold)
    Hinge {
        threshold: f64,
    },
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::SignedIndicator => {
                if v.abs() > EXPR_TOLERANCE {
                    1.0
                } else {
                    -1.0
                }
            }
            Transform::Hinge { threshold } => (v - threshold).max(0.0),
        }
    }

    /// Image of an interval under the transform (an enclosing interval).
    pub fn image(self, iv: Interval) -> Interval {
        match self {
            Transform::Identity => iv,
            Transform::SignedIndicator => {
                let may_be_zero = iv.lo <= EXPR_TOLERANCE && iv.hi >= -EXPR_TOLERANCE;
                let may_be_nonzero = iv.lo < -EXPR_TOLERANCE || iv.hi > EXPR_TOLERANCE;
                match (may_be_zero, may_be_nonzero) {
                    (true, true) => Interval::new(-1.0, 1.0),
                    (true, false) => Interval::point(-1.0),
                    _ => Interval::point(1.0),
                }
            }
            Transform::Hinge { threshold } => Interval::new((iv.lo - threshold).max(0.0), (iv.hi - threshold).max(0.0)),
        }
    }

    /// Largest value of `weight * transform(v)` over `v` in the interval.
    pub fn max_weighted(self, weight: f64, iv: Interval) -> f64 {
        let img = self.image(iv);
        if weight >= 0.0 {
            weight * img.hi
        } else {
            weight * img.lo
        }
    }

    /// Smallest value of `weight * transform(v)` over `v` in the interval.
    pub fn min_weighted(self, weight: f64, iv: Interval) -> f64 {
        let img = self.image(iv);
        if weight >= 0.0 {
            weight * img.lo
        } else {
            weight * img.hi
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn scale(self, k: f64) -> Self {
        if k >= 0.0 {
            Interval::new(self.lo * k, self.hi * k)
        } else {
            Interval::new(self.hi * k, self.lo * k)
        }
    }

    pub fn abs_max(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Le => lhs <= rhs + EXPR_TOLERANCE,
            Comparison::Ge => lhs >= rhs - EXPR_TOLERANCE,
            Comparison::Eq => (lhs - rhs).abs() <= EXPR_TOLERANCE,
        }
    }

    /// False only if no value in the interval can satisfy the comparison.
    pub fn satisfiable(self, iv: Interval, rhs: f64) -> bool {
        match self {
            Comparison::Le => iv.lo <= rhs + EXPR_TOLERANCE,
            Comparison::Ge => iv.hi >= rhs - EXPR_TOLERANCE,
            Comparison::Eq => iv.lo <= rhs + EXPR_TOLERANCE && iv.hi >= rhs - EXPR_TOLERANCE,
        }
    }
}
