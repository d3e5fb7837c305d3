use pcl_core::inference::{certify_local_optimum, infer_full, infer_part, scan_options, Scope, SearchMode};
use pcl_core::model::{Atom, Configuration, FeatureSet, LinearExpr, ProblemModel, Transform, WeightVector};
use pcl_core::problems::{random_small_instance, RandomSizes};
use pcl_core::EPSILON;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn eval(e: &LinearExpr, x: &[i32]) -> f64 {
    let mut acc = e.constant;
    for t in &e.terms {
        acc += t.coef
            * match &t.atom {
                Atom::Conj(lits) => lits.iter().all(|&(v, a)| x[v] == a) as i32 as f64,
                Atom::Var(v) => x[*v] as f64,
            };
    }
    acc
}

fn feature(m: &ProblemModel, i: usize, x: &[i32]) -> f64 {
    let f = &m.features()[i];
    let v = eval(&f.expr, x);
    match f.transform {
        Transform::Identity => v,
        Transform::SignedIndicator => {
            if v.abs() > 1e-9 {
                1.0
            } else {
                -1.0
            }
        }
        Transform::Hinge { threshold } => (v - threshold).max(0.0),
    }
}

fn feasible(m: &ProblemModel, x: &[i32]) -> bool {
    m.constraints().iter().all(|c| c.cmp.holds(eval(&c.expr, x), c.rhs))
}

fn utility(m: &ProblemModel, w: &[f64], set: &FeatureSet, x: &[i32]) -> f64 {
    set.iter().map(|i| w[i] * feature(m, i, x)).sum()
}

/// Every assignment of `vars` (first variable most significant), applied on top of `base`.
fn assignments(m: &ProblemModel, vars: &[usize], base: &[i32]) -> Vec<Vec<i32>> {
    let mut out = vec![base.to_vec()];
    for &v in vars.iter().rev() {
        let mut next = Vec::new();
        for &a in &m.variables()[v].domain {
            for x in &out {
                let mut y = x.clone();
                y[v] = a;
                next.push(y);
            }
        }
        out = next;
    }
    // Sort lexicographically on `vars`.
    out.sort_by(|a, b| vars.iter().map(|&v| a[v]).cmp(vars.iter().map(|&v| b[v])));
    out
}

/// First assignment (lexicographic) whose score is within EPSILON of the best, and the best.
fn brute_argmax(
    m: &ProblemModel,
    w: &[f64],
    set: &FeatureSet,
    vars: &[usize],
    base: &[i32],
) -> Option<(Vec<i32>, f64)> {
    let options: Vec<(Vec<i32>, f64)> = assignments(m, vars, base)
        .into_iter()
        .filter(|x| feasible(m, x))
        .map(|x| {
            let u = utility(m, w, set, &x);
            (x, u)
        })
        .collect();
    let best = options.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    options
        .into_iter()
        .find(|o| o.1 >= best - EPSILON)
        .map(|(x, _)| (x, best))
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| f64::from(rng.gen_range(-8..=8)) / 4.0).collect()
}

fn feasible_points(m: &ProblemModel) -> Vec<Vec<i32>> {
    let all: Vec<usize> = (0..m.num_vars()).collect();
    let base = vec![0; m.num_vars()];
    assignments(m, &all, &base)
        .into_iter()
        .filter(|x| feasible(m, x))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditional_inference_matches_enumeration(seed in 0u64..10_000, wseed in 0u64..1_000) {
        let m = random_small_instance(seed, RandomSizes::default());
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        let w = random_weights(&mut rng, m.num_features());
        let points = feasible_points(&m);
        prop_assert!(!points.is_empty());
        let base = points[rng.gen_range(0..points.len())].clone();
        let p = rng.gen_range(0..m.num_parts());
        let set: FeatureSet = (0..m.num_features()).filter(|_| rng.gen_bool(0.6)).collect();
        let vars = &m.parts()[p].variables;
        let (expected, best) = brute_argmax(&m, &w, &set, vars, &base).expect("base itself is feasible");
        for mode in [SearchMode::Exhaustive, SearchMode::BranchAndBound] {
            let out = infer_part(&m, &WeightVector(w.clone()), &set, p, &Configuration(base.clone()), mode).unwrap();
            prop_assert_eq!(out.value, best);
            prop_assert_eq!(&out.configuration(&Configuration(base.clone())).0, &expected);
        }
    }

    #[test]
    fn full_inference_matches_enumeration(seed in 0u64..10_000, wseed in 0u64..1_000) {
        let m = random_small_instance(seed, RandomSizes::default());
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        let w = random_weights(&mut rng, m.num_features());
        let all: Vec<usize> = (0..m.num_vars()).collect();
        let full = FeatureSet::full(m.num_features());
        let (expected, _) = brute_argmax(&m, &w, &full, &all, &vec![0; m.num_vars()]).unwrap();
        for mode in [SearchMode::Exhaustive, SearchMode::BranchAndBound] {
            let x = infer_full(&m, &WeightVector(w.clone()), mode).unwrap();
            prop_assert_eq!(&x.0, &expected);
        }
    }

    #[test]
    fn full_inference_matches_enumeration_with_many_global_features(seed in 0u64..10_000, wseed in 0u64..1_000) {
        // More parts and features than the default: hinges summing over several parts
        // and features linking the first part to a later one are common here.
        let sizes = RandomSizes {
            parts: (3, 5),
            vars_per_part: (1, 2),
            domain: (2, 3),
            extra_features: (6, 12),
            constraints: (0, 2),
        };
        let m = random_small_instance(seed, sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        let w = random_weights(&mut rng, m.num_features());
        let all: Vec<usize> = (0..m.num_vars()).collect();
        let full = FeatureSet::full(m.num_features());
        let (expected, best) = brute_argmax(&m, &w, &full, &all, &vec![0; m.num_vars()]).unwrap();
        let x = infer_full(&m, &WeightVector(w.clone()), SearchMode::BranchAndBound).unwrap();
        prop_assert_eq!(&x.0, &expected);
        prop_assert_eq!(utility(&m, &w, &full, &x.0), best);
    }

    #[test]
    fn local_optimality_equals_partwise_conditional_optimality(seed in 0u64..10_000, wseed in 0u64..1_000) {
        let m = random_small_instance(seed, RandomSizes::default());
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        let w = random_weights(&mut rng, m.num_features());
        let full = FeatureSet::full(m.num_features());
        for x in feasible_points(&m).into_iter().take(30) {
            let here = utility(&m, &w, &full, &x);
            let brute = (0..m.num_parts()).all(|p| {
                assignments(&m, &m.parts()[p].variables, &x)
                    .iter()
                    .filter(|y| feasible(&m, y))
                    .all(|y| utility(&m, &w, &full, y) <= here + EPSILON)
            });
            let cert = certify_local_optimum(&m, &WeightVector(w.clone()), &Configuration(x.clone()), SearchMode::BranchAndBound).unwrap();
            prop_assert_eq!(brute, cert.is_optimal());
        }
    }

    #[test]
    fn scan_lists_every_feasible_option_in_order(seed in 0u64..10_000) {
        let m = random_small_instance(seed, RandomSizes::default());
        let w = vec![1.0; m.num_features()];
        let base = feasible_points(&m)[0].clone();
        let p = seed as usize % m.num_parts();
        let vars = &m.parts()[p].variables;
        let expected: Vec<Vec<i32>> = assignments(&m, vars, &base).into_iter().filter(|x| feasible(&m, x)).collect();
        let got: Vec<Vec<i32>> = scan_options(&m, &WeightVector(w), &FeatureSet::full(m.num_features()), Scope::Part(p), &Configuration(base.clone()))
            .unwrap()
            .into_iter()
            .map(|o| Configuration(base.clone()).with(&o.assignment).0)
            .collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn random_instances_are_valid(seed in 0u64..100_000) {
        let m = random_small_instance(seed, RandomSizes::default());
        let lowest: Vec<i32> = m.variables().iter().map(|v| v.domain[0]).collect();
        prop_assert!(feasible(&m, &lowest));
        prop_assert_eq!(random_small_instance(seed, RandomSizes::default()).to_string_debug(), m.to_string_debug());
    }
}

trait DebugString {
    fn to_string_debug(&self) -> String;
}

impl DebugString for ProblemModel {
    fn to_string_debug(&self) -> String {
        format!("{:?}{:?}{:?}", self.variables(), self.features(), self.constraints())
    }
}
