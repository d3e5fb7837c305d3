use std::sync::Arc;

use pcl_core::exact;
use pcl_core::inference::{infer_full, SearchMode};
use pcl_core::learner::{Algorithm, Branch, ImprovementProvider, LearnerConfig, LearnerState};
use pcl_core::model::{Configuration, FeatureSet, PartialConfiguration, ProblemModel, WeightVector};
use pcl_core::problems::{build_grid, build_training_plan, TrainingConfig};
use pcl_core::selection::SelectionKind;
use pcl_core::simuser::{sample_users, SimulatedUser};
use pcl_core::Error;

fn grid() -> Arc<ProblemModel> {
    Arc::new(build_grid())
}

/// Accepts every recommendation as is.
struct Accept;

impl ImprovementProvider for Accept {
    fn improve_part(
        &mut self,
        model: &ProblemModel,
        x: &Configuration,
        part: usize,
        _: &FeatureSet,
    ) -> pcl_core::Result<PartialConfiguration> {
        Ok(model.restrict(x, part))
    }

    fn improve_full(&mut self, _: &ProblemModel, x: &Configuration) -> pcl_core::Result<Configuration> {
        Ok(x.clone())
    }
}

fn smallest_first() -> LearnerConfig {
    LearnerConfig {
        selection: SelectionKind::Smallest,
        ..Default::default()
    }
}

#[test]
fn fresh_state() {
    let s = LearnerState::new(grid(), LearnerConfig::default()).unwrap();
    assert!(!s.has_converged());
    assert_eq!(s.iterations(), 0);
    assert_eq!(s.weights(), &WeightVector::zeros(24));
    assert_eq!(s.configuration(), &Configuration(vec![0; 16]));
}

#[test]
fn satisfied_user_converges_after_two_sweeps() {
    let mut s = LearnerState::new(grid(), smallest_first()).unwrap();
    for t in 1..=8 {
        assert!(!s.has_converged());
        let r = s.step(&mut Accept).unwrap();
        assert!(r.satisfied && r.clean);
        assert_eq!(r.branch, Branch::I);
        assert_eq!(r.converged, t == 8);
    }
    assert!(s.has_converged());
    assert_eq!(s.weights(), &WeightVector::zeros(24));
}

#[test]
fn improving_visit_resets_the_streak() {
    let mut s = LearnerState::new(grid(), smallest_first()).unwrap();
    for _ in 0..7 {
        s.step(&mut Accept).unwrap();
    }
    assert_eq!(s.streak().iter().sum::<u32>(), 7);
    let rec = s.propose().unwrap().clone();
    let mut changed = rec.assignment.clone();
    changed.values[0] = 1 - changed.values[0];
    let r = s.feedback(&changed).unwrap();
    assert!(!r.satisfied && !r.converged);
    assert_eq!(s.streak(), &[0, 0, 0, 0]);
    assert!(!s.has_converged());
}

#[test]
fn first_update_moves_weights_to_the_feature_difference() {
    let m = grid();
    let mut s = LearnerState::new(m.clone(), LearnerConfig::default()).unwrap();
    let rec = s.propose().unwrap().clone();
    let p = rec.part.unwrap();
    let mut improved = rec.assignment.clone();
    improved.values = vec![0, 1, 1, 0];
    let x = rec.configuration.clone();
    let x_hat = x.with(&improved);
    let r = s.feedback(&improved).unwrap();
    assert_eq!(r.branch, Branch::I);
    let i_set = &m.parts()[p].features;
    let (phi, phi_hat) = (m.phi(&x), m.phi(&x_hat));
    for i in 0..24 {
        let expected = if i_set.contains(i) { phi_hat[i] - phi[i] } else { 0.0 };
        assert_eq!(s.weights().0[i], expected);
    }
    // The improvement is feedback only: the configuration keeps the recommendation.
    assert_eq!(s.configuration(), &x);
}

#[test]
fn positive_estimated_gain_updates_only_j() {
    let m = grid();
    let mut seen = 0;
    for mut user in sample_users(24, 5, 3, 0.3).unwrap() {
        let mut s = LearnerState::new(m.clone(), LearnerConfig::default()).unwrap();
        for _ in 0..60 {
            let before = s.weights().clone();
            let x = s.propose().unwrap().configuration.clone();
            let r = s.step(&mut user).unwrap();
            let p = r.part.unwrap();
            let x_hat = x.with(&r.improvement);
            let i_set = s.decomposition().i_of(p).clone();
            let j_set = s.decomposition().j_of(p).clone();
            let gain =
                m.partial_utility(&before, &i_set, &x_hat).unwrap() - m.partial_utility(&before, &i_set, &x).unwrap();
            assert_eq!(r.branch == Branch::J, gain > 1e-9);
            let q = if r.branch == Branch::J { &j_set } else { &i_set };
            for i in 0..24 {
                let d = if q.contains(i) {
                    m.feature_value(i, &x_hat) - m.feature_value(i, &x)
                } else {
                    0.0
                };
                assert_eq!(s.weights().0[i], before.0[i] + d, "coordinate {i}");
            }
            if r.branch == Branch::J {
                seen += 1;
            }
        }
    }
    assert!(seen > 0, "no update took the J branch");
}

#[test]
fn rejected_improvement_keeps_the_pending_turn() {
    let m = Arc::new(build_training_plan(&TrainingConfig::default()).unwrap());
    let mut s = LearnerState::new(m.clone(), LearnerConfig::default()).unwrap();
    let rec = s.propose().unwrap().clone();
    let p = rec.part.unwrap();
    let mut bad = rec.assignment.clone();
    // Fill every slot of the day with running: unavailable slots and fatigue both break.
    bad.values = vec![2; 5];
    match s.feedback(&bad) {
        Err(Error::Infeasible { violated }) => {
            assert!(violated.iter().any(|v| v.starts_with("availability")));
            assert!(violated.iter().any(|v| v.starts_with("fatigue")));
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
    let wrong_part = m.restrict(&rec.configuration, (p + 1) % 7);
    assert!(s.feedback(&wrong_part).is_err());
    assert_eq!(s.pending().unwrap(), &rec);
    assert_eq!(s.iterations(), 0);
}

#[test]
fn full_oracle_baseline_reaches_zero_regret_in_one_step() {
    let m = grid();
    let user = SimulatedUser::new(WeightVector(vec![1.0; 24]), 1.0).unwrap();
    let mut provider = user.clone();
    let config = LearnerConfig {
        algorithm: Algorithm::Cl,
        ..Default::default()
    };
    let mut s = LearnerState::new(m.clone(), config).unwrap();
    let r = s.step(&mut provider).unwrap();
    assert_eq!(r.branch, Branch::Full);
    let x_star = infer_full(&m, &user.weights, SearchMode::BranchAndBound).unwrap();
    let x_hat = Configuration(r.improvement.values.clone());
    assert_eq!(m.phi(&x_hat), m.phi(&x_star));
    let next = s.propose().unwrap().configuration.clone();
    assert_eq!(m.utility(&user.weights, &next), 24.0);
}

#[test]
fn weight_updates_telescope_exactly() {
    let m = grid();
    let mut user = sample_users(24, 1, 7, 0.3).unwrap().remove(0);
    let w_star = exact::vector(&user.weights);
    let mut s = LearnerState::new(m.clone(), LearnerConfig::default()).unwrap();
    let d = exact::rational(m.feature_bound());
    let size = exact::integer(m.part_feature_bound() as i64);
    let four = exact::integer(4);
    let mut prev = exact::vector(s.weights());
    for t in 1..=60 {
        let x = s.propose().unwrap().configuration.clone();
        let r = s.step(&mut user).unwrap();
        let x_hat = x.with(&r.improvement);
        let w = exact::vector(s.weights());
        let lhs = exact::dot(&w_star, &w) - exact::dot(&w_star, &prev);
        let rhs =
            exact::partial_utility(&m, &w_star, r.q_set(), &x_hat) - exact::partial_utility(&m, &w_star, r.q_set(), &x);
        assert_eq!(lhs, rhs, "iteration {t}");
        let bound = &four * &d * &d * &size * &size * exact::integer(t);
        assert!(exact::norm_sq(&w) <= bound, "iteration {t}");
        prev = w;
    }
}
