use pcl_core::inference::{infer_full, infer_part, SearchMode};
use pcl_core::learner::Branch;
use pcl_core::model::{Configuration, ProblemModel, WeightVector};
use serde::{Deserialize, Serialize};

use crate::Result;

/// One iteration of one user, as written to `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub user: usize,
    pub t: u64,
    pub part: String,
    pub branch: Branch,
    /// `REG(x^t)`; empty when regret is not computed.
    pub regret: Option<f64>,
    /// `CREG(p^t, x^t)` under `w*`.
    pub creg: f64,
    /// `u*` gain of the user's improvement.
    pub gain: f64,
    pub zeta: f64,
    /// Average conditional regret over iterations `1..=t`.
    pub avg_creg: f64,
    /// The right-hand side of the average conditional regret bound at `t`.
    pub bound: f64,
    /// `|w^{t+1}|^2`.
    pub norm_sq: f64,
    pub converged: bool,
}

/// Inference wall time, kept apart from the deterministic metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub user: usize,
    pub t: u64,
    pub inference_secs: f64,
    pub cumulative_secs: f64,
}

/// `2 D S |w*| / (alpha sqrt(t)) + (1 / (alpha t)) sum zeta`.
pub fn regret_bound(d: f64, s: f64, w_star_norm: f64, alpha: f64, t: u64, sum_zeta: f64) -> f64 {
    let t = t as f64;
    2.0 * d * s * w_star_norm / (alpha * t.sqrt()) + sum_zeta / (alpha * t)
}

/// `a <= b` up to a relative tolerance of 1e-9.
pub fn le_tol(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// `REG(x) = u*(x*) - u*(x)` with `x*` from full inference.
pub fn compute_regret(model: &ProblemModel, w_star: &WeightVector, x: &Configuration, mode: SearchMode) -> Result<f64> {
    let x_star = infer_full(model, w_star, mode)?;
    Ok(model.utility(w_star, &x_star) - model.utility(w_star, x))
}

/// `CREG(p, x) = u*(x*_p ∘ x_rest) - u*(x)`, computed on the features of part `p`.
pub fn compute_conditional_regret(
    model: &ProblemModel,
    w_star: &WeightVector,
    x: &Configuration,
    part: usize,
    mode: SearchMode,
) -> Result<f64> {
    let features = &model.part(part)?.features;
    let best = infer_part(model, w_star, features, part, x, mode)?;
    Ok(best.value - model.partial_utility(w_star, features, x)?)
}
