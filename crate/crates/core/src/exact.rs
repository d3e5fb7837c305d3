//! Exact rational arithmetic for replaying learner traces.
//!
//! Every finite `f64` is a dyadic rational, so weights, coefficients and feature
//! values convert without loss; identities that only hold up to rounding in
//! floating point can then be checked with equality.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::model::{Atom, Configuration, FeatureSet, ProblemModel, Transform, WeightVector};

pub type Rational = BigRational;

/// Lossless conversion of a finite float.
pub fn rational(x: f64) -> Rational {
    Rational::from_float(x).expect("finite value")
}

pub fn integer(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn vector(w: &WeightVector) -> Vec<Rational> {
    w.0.iter().map(|&x| rational(x)).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

pub fn norm_sq(a: &[Rational]) -> Rational {
    dot(a, a)
}

/// `phi_i(x)` evaluated without rounding.
pub fn feature_value(model: &ProblemModel, i: usize, x: &Configuration) -> Rational {
    let f = &model.features()[i];
    let values = x.values();
    let mut acc = rational(f.expr.constant);
    for term in &f.expr.terms {
        let atom = match &term.atom {
            Atom::Conj(lits) => {
                if lits.iter().all(|&(v, val)| values[v] == val) {
                    integer(1)
                } else {
                    integer(0)
                }
            }
            Atom::Var(v) => integer(i64::from(values[*v])),
        };
        acc += rational(term.coef) * atom;
    }
    match f.transform {
        Transform::Identity => acc,
        Transform::SignedIndicator => {
            if acc.is_zero() {
                integer(-1)
            } else {
                integer(1)
            }
        }
        Transform::Hinge { threshold } => {
            let v = acc - rational(threshold);
            if v.is_positive() {
                v
            } else {
                Rational::zero()
            }
        }
    }
}

pub fn phi(model: &ProblemModel, x: &Configuration) -> Vec<Rational> {
    (0..model.num_features()).map(|i| feature_value(model, i, x)).collect()
}

/// `u[set](x)` with rational weights.
pub fn partial_utility(model: &ProblemModel, w: &[Rational], set: &FeatureSet, x: &Configuration) -> Rational {
    set.iter()
        .fold(Rational::zero(), |acc, i| acc + &w[i] * feature_value(model, i, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::build_grid;

    #[test]
    fn conversion_is_lossless() {
        assert_ne!(rational(0.1) * integer(10), integer(1));
        assert_eq!(rational(0.5) + rational(0.25), rational(0.75));
    }

    #[test]
    fn grid_features_match_float() {
        let m = build_grid();
        let x = Configuration((0..16).map(|k| (k % 3 == 0) as i32).collect());
        let exact = phi(&m, &x);
        for (e, f) in exact.iter().zip(m.phi(&x)) {
            assert_eq!(*e, rational(f));
        }
    }
}
