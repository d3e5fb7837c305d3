//! Small random models for property tests.
//!
//! Every generated model passes validation: each part gets an exclusive feature,
//! and every constraint is satisfied by the all-lowest configuration.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::model::{Comparison, LinearExpr, ModelBuilder, ProblemModel, Term, Transform, Value};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomSizes {
    pub parts: (usize, usize),
    pub vars_per_part: (usize, usize),
    pub domain: (usize, usize),
    /// Features beyond the one exclusive feature per part.
    pub extra_features: (usize, usize),
    pub constraints: (usize, usize),
}

impl Default for RandomSizes {
    /// At most 4 parts of 3 variables with 3 values: 27 options per part, 3^12 in total.
    fn default() -> Self {
        RandomSizes {
            parts: (2, 4),
            vars_per_part: (1, 3),
            domain: (2, 3),
            extra_features: (1, 6),
            constraints: (0, 3),
        }
    }
}

fn transform(rng: &mut ChaCha8Rng) -> Transform {
    match rng.gen_range(0..3) {
        0 => Transform::Identity,
        1 => Transform::SignedIndicator,
        _ => Transform::Hinge {
            threshold: f64::from(rng.gen_range(-2..=2)) / 2.0,
        },
    }
}

fn coef(rng: &mut ChaCha8Rng) -> f64 {
    // Small dyadic rationals keep float arithmetic exact.
    f64::from(rng.gen_range(-4..=4)) / 2.0
}

fn nonzero_coef(rng: &mut ChaCha8Rng) -> f64 {
    let c = coef(rng);
    if c == 0.0 {
        1.0
    } else {
        c
    }
}

/// A random term over `vars`: a literal conjunction of one or two variables, or a variable.
fn term(rng: &mut ChaCha8Rng, vars: &[usize], domains: &[Vec<Value>]) -> Term {
    let v = *vars.choose(rng).expect("non-empty");
    if rng.gen_bool(0.3) {
        return Term::var(nonzero_coef(rng), v);
    }
    let mut lits = vec![(v, *domains[v].choose(rng).expect("non-empty"))];
    if vars.len() > 1 && rng.gen_bool(0.4) {
        let u = *vars.choose(rng).expect("non-empty");
        if u != v {
            lits.push((u, *domains[u].choose(rng).expect("non-empty")));
        }
    }
    Term::conj(nonzero_coef(rng), lits)
}

pub fn random_small_instance(seed: u64, sizes: RandomSizes) -> ProblemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ModelBuilder::new();
    let n_parts = rng.gen_range(sizes.parts.0..=sizes.parts.1);
    let mut parts: Vec<Vec<usize>> = Vec::new();
    let mut domains: Vec<Vec<Value>> = Vec::new();
    for p in 0..n_parts {
        let k = rng.gen_range(sizes.vars_per_part.0..=sizes.vars_per_part.1);
        let mut vars = Vec::new();
        for i in 0..k {
            let size = rng.gen_range(sizes.domain.0..=sizes.domain.1);
            let lo = rng.gen_range(-1..=1);
            let domain: Vec<Value> = (lo..lo + size as Value).collect();
            vars.push(m.var(format!("p{p}v{i}"), domain.clone()));
            domains.push(domain);
        }
        parts.push(vars);
    }
    let all: Vec<usize> = (0..domains.len()).collect();

    for (p, vars) in parts.iter().enumerate() {
        let terms = (0..rng.gen_range(1..=2))
            .map(|_| term(&mut rng, vars, &domains))
            .collect();
        let t = transform(&mut rng);
        m.feature(format!("own{p}"), LinearExpr::new(terms), t);
    }
    for f in 0..rng.gen_range(sizes.extra_features.0..=sizes.extra_features.1) {
        let terms = (0..rng.gen_range(1..=3))
            .map(|_| term(&mut rng, &all, &domains))
            .collect();
        let t = transform(&mut rng);
        m.feature(format!("f{f}"), LinearExpr::new(terms), t);
    }
    let lowest: Vec<Value> = domains.iter().map(|d| d[0]).collect();
    for c in 0..rng.gen_range(sizes.constraints.0..=sizes.constraints.1) {
        let terms: Vec<Term> = (0..rng.gen_range(1..=2))
            .map(|_| term(&mut rng, &all, &domains))
            .collect();
        let expr = LinearExpr::new(terms);
        let at_lowest = expr.eval(&lowest);
        let slack = f64::from(rng.gen_range(0..=2)) / 2.0;
        if rng.gen_bool(0.5) {
            m.constraint(format!("c{c}"), expr, Comparison::Le, at_lowest + slack);
        } else {
            m.constraint(format!("c{c}"), expr, Comparison::Ge, at_lowest - slack);
        }
    }
    for (p, vars) in parts.into_iter().enumerate() {
        m.part(format!("part{p}"), vars);
    }
    m.build(json!({"kind": "random", "seed": seed}))
        .expect("generated models satisfy every invariant")
}
