//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test -p pcl-harness --test acceptance`). Failing
//! criteria are reported but only fail the process when `ACCEPTANCE_STRICT=1`.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use pcl_core::exact::{self, Rational};
use pcl_core::gai::decompose;
use pcl_core::inference::{certify_local_optimum, infer_full, infer_part, scan_options, Scope, SearchMode};
use pcl_core::learner::{Algorithm, LearnerConfig, LearnerState};
use pcl_core::model::{Atom, Configuration, FeatureSet, LinearExpr, ProblemModel, Transform, WeightVector};
use pcl_core::problems::{build_hotel, builtin, random_small_instance, HotelConfig, RandomSizes};
use pcl_core::selection::SelectionKind;
use pcl_core::simuser::{SimulatedUser, UserBank};
use pcl_core::EPSILON;
use pcl_harness::metrics::median;
use pcl_harness::output::write_outputs;
use pcl_harness::run::CheckCounts;
use pcl_harness::{run_prepared, Experiment, ExperimentConfig, Prepared};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const ALPHAS: [f64; 4] = [0.1, 0.3, 0.5, 1.0];
const SEEDS: std::ops::Range<u64> = 0..5;
const USERS: usize = 20;
const GRID_T: u64 = 100;
const TRAINING_T: u64 = 100;
const HOTEL_T: u64 = 150;

const OPTIMALITY_INSTANCES: u64 = 200;
const OPTIMALITY_WEIGHTS: u64 = 50;
const MIN_CONVERGED: usize = 100;
const ORACLE_INSTANCES: usize = 1000;

const SYNTHETIC_TOLERANCE: f64 = 0.10;
const SELECTION_TOLERANCE: f64 = 0.05;
const SYNTHETIC_SECONDS: f64 = 300.0;
const TRAINING_T_CHECK: u64 = 50;
const TRAINING_RATIO: f64 = 0.20;
const HOTEL_RATIO: f64 = 0.10;
const HOTEL_ALPHA_TOLERANCE: f64 = 0.15;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, name: &str, ok: bool, detail: String) {
        let line = format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((ok, line));
    }
}

/// Every experiment run by the suite, pooled for the audits.
#[derive(Default)]
struct Pool {
    experiments: Vec<Experiment>,
}

impl Pool {
    fn add(&mut self, e: Experiment) -> &Experiment {
        self.experiments.push(e);
        self.experiments.last().expect("just pushed")
    }

    fn runs(&self) -> impl Iterator<Item = &pcl_harness::UserRun> {
        self.experiments.iter().flat_map(|e| e.runs.iter())
    }

    fn checks(&self) -> CheckCounts {
        let mut total = CheckCounts::default();
        for e in &self.experiments {
            let c = e.checks();
            total.regret_bound += c.regret_bound;
            total.telescoping += c.telescoping;
            total.norm_bound += c.norm_bound;
            total.untouched += c.untouched;
            total.inference_optimality += c.inference_optimality;
            total.alpha_informative += c.alpha_informative;
            total.nonnegativity += c.nonnegativity;
            total.certification += c.certification;
        }
        total
    }

    fn violations(&self, check: &str) -> Vec<String> {
        self.experiments
            .iter()
            .flat_map(|e| e.violations().map(move |v| (e, v)))
            .filter(|(_, v)| v.check == check)
            .map(|(e, v)| {
                format!(
                    "{} alpha={} user {} t {}: {}",
                    e.config.problem, e.config.alpha, v.user, v.t, v.detail
                )
            })
            .collect()
    }
}

fn config(problem: &str, algorithm: Algorithm, alpha: f64, seed: u64, iters: u64, regret: bool) -> ExperimentConfig {
    ExperimentConfig {
        problem: problem.into(),
        algorithm,
        alpha,
        users: USERS,
        iters,
        seed,
        regret,
        ..Default::default()
    }
}

fn run(prepared: &Prepared, config: &ExperimentConfig) -> Experiment {
    run_prepared(prepared, config).unwrap_or_else(|e| panic!("{} alpha={}: {e}", config.problem, config.alpha))
}

fn prepare(model: &ProblemModel, config: &ExperimentConfig) -> Prepared {
    Prepared::new(
        model.clone(),
        config.users,
        config.seed,
        config.alpha,
        config.regret,
        config.mode,
    )
    .expect("prepare")
}

// --- independent evaluation ------------------------------------------------

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

fn atom_vars(atom: &Atom) -> Vec<usize> {
    match atom {
        Atom::Conj(lits) => lits.iter().map(|&(v, _)| v).collect(),
        Atom::Var(v) => vec![*v],
    }
}

fn holds(m: &ProblemModel, c: usize, x: &[i32]) -> bool {
    let c = &m.constraints()[c];
    c.cmp.holds(eval(&c.expr, x), c.rhs)
}

fn feasible(m: &ProblemModel, x: &[i32]) -> bool {
    (0..m.constraints().len()).all(|c| holds(m, c, x))
}

fn utility_on(m: &ProblemModel, w: &[f64], set: &FeatureSet, x: &[i32]) -> f64 {
    set.iter().map(|i| w[i] * feature(m, i, x)).sum()
}

fn utility(m: &ProblemModel, w: &[f64], x: &[i32]) -> f64 {
    (0..m.num_features()).map(|i| w[i] * feature(m, i, x)).sum()
}

/// Every assignment of `vars` applied on top of `base`.
fn assignments(m: &ProblemModel, vars: &[usize], base: &[i32]) -> Vec<Vec<i32>> {
    let mut out = vec![base.to_vec()];
    for &v in vars {
        let mut next = Vec::with_capacity(out.len() * m.variables()[v].domain.len());
        for x in &out {
            for &a in &m.variables()[v].domain {
                let mut y = x.clone();
                y[v] = a;
                next.push(y);
            }
        }
        out = next;
    }
    out
}

/// Feasible single-part variants of `x` (including `x`), for constraints of that part.
fn part_variants(m: &ProblemModel, x: &[i32], p: usize) -> Vec<Vec<i32>> {
    assignments(m, &m.parts()[p].variables, x)
        .into_iter()
        .filter(|y| feasible(m, y))
        .collect()
}

fn quarter_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| f64::from(rng.gen_range(-8..=8)) / 4.0).collect()
}

fn normal_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

// --- criteria ----------------------------------------------------------------

fn regret_bound_suite(report: &mut Report, pool: &mut Pool) {
    let start = Instant::now();
    let mut detail = String::new();
    let mut runs = 0;
    for (problem, t) in [("grid", GRID_T), ("training", TRAINING_T), ("hotel", HOTEL_T)] {
        let model = builtin(problem).expect("builtin");
        let begin = Instant::now();
        for &alpha in &ALPHAS {
            for seed in SEEDS {
                let c = config(problem, Algorithm::Pcl, alpha, seed, t, false);
                let e = pool.add(run(&prepare(&model, &c), &c));
                runs += e.runs.len();
            }
        }
        let _ = write!(detail, "{problem} {:.1}s; ", begin.elapsed().as_secs_f64());
    }
    let checks = pool.checks();
    let bad = pool.violations("regret_bound");
    report.record(
        "regret bound suite",
        bad.is_empty() && checks.regret_bound > 0,
        format!(
            "{runs} runs, {} iteration checks, {} violations ({detail}total {:.1}s){}",
            checks.regret_bound,
            bad.len(),
            start.elapsed().as_secs_f64(),
            bad.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    );
}

/// Replays grid runs in exact rational arithmetic: the perceptron update, the
/// inner-product identity and the norm bound, against the learner's float weights.
fn exact_grid_replay() -> (u64, Vec<String>) {
    let model = Arc::new(builtin("grid").expect("grid"));
    let d = exact::rational(model.feature_bound());
    let s = exact::integer(model.part_feature_bound() as i64);
    let four = exact::integer(4);
    let mut checks = 0;
    let mut bad = Vec::new();
    for &alpha in &[0.3, 1.0] {
        let bank = UserBank::sample(model.num_features(), 5, 0, alpha).expect("users");
        for (k, w_star) in bank.users.iter().enumerate() {
            let user = SimulatedUser::new(w_star.clone(), alpha).expect("user");
            let w_star_q = exact::vector(w_star);
            let config = LearnerConfig {
                seed: k as u64,
                ..Default::default()
            };
            let mut state = LearnerState::new(Arc::clone(&model), config).expect("learner");
            let mut w_q: Vec<Rational> = vec![exact::integer(0); model.num_features()];
            for t in 1..=GRID_T {
                let rec = state.propose().expect("propose").clone();
                let p = rec.part.expect("part-wise");
                let x = rec.configuration.clone();
                let i_set = state.decomposition().i_of(p).clone();
                let improvement = user
                    .improve_part_report(&model, &x, p, &i_set)
                    .expect("improve")
                    .improvement;
                let record = state.feedback(&improvement).expect("feedback");
                let x_hat = x.with(&improvement);
                let q = record.q_set();

                let before = exact::dot(&w_star_q, &w_q);
                let (phi_hat, phi_x) = (exact::phi(&model, &x_hat), exact::phi(&model, &x));
                for i in q.iter() {
                    w_q[i] = &w_q[i] + &phi_hat[i] - &phi_x[i];
                }
                let after = exact::dot(&w_star_q, &w_q);
                let gain = exact::partial_utility(&model, &w_star_q, q, &x_hat)
                    - exact::partial_utility(&model, &w_star_q, q, &x);
                checks += 3;
                if after - before != gain {
                    bad.push(format!("alpha={alpha} user {k} t {t}: inner-product identity"));
                }
                let bound = &four * &d * &d * &s * &s * exact::integer(t as i64);
                if exact::norm_sq(&w_q) > bound {
                    bad.push(format!("alpha={alpha} user {k} t {t}: norm bound"));
                }
                if exact::vector(state.weights()) != w_q {
                    bad.push(format!("alpha={alpha} user {k} t {t}: float weights differ from exact"));
                }
                if record.converged {
                    break;
                }
            }
        }
    }
    (checks, bad)
}

fn update_identities(report: &mut Report, pool: &Pool) {
    let checks = pool.checks();
    let mut bad = pool.violations("telescoping");
    bad.extend(pool.violations("norm_bound"));
    bad.extend(pool.violations("untouched"));
    let (exact_checks, exact_bad) = exact_grid_replay();
    let ok = bad.is_empty() && exact_bad.is_empty() && checks.telescoping > 0 && exact_checks > 0;
    report.record(
        "update identities",
        ok,
        format!(
            "float: {} telescoping + {} norm + {} untouched checks, {} violations; exact grid replay: {exact_checks} checks, {} violations{}",
            checks.telescoping,
            checks.norm_bound,
            checks.untouched,
            bad.len(),
            exact_bad.len(),
            bad.iter().chain(&exact_bad).next().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    );
}

fn local_optimality_equivalence(report: &mut Report) {
    let mut cases = 0;
    let mut positives = 0;
    let mut disagreements = Vec::new();
    for seed in 0..OPTIMALITY_INSTANCES {
        let m = random_small_instance(seed, RandomSizes::default());
        let gai = decompose(&m);
        let all: Vec<usize> = (0..m.num_vars()).collect();
        let points: Vec<Vec<i32>> = assignments(&m, &all, &vec![0; m.num_vars()])
            .into_iter()
            .filter(|x| feasible(&m, x))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..OPTIMALITY_WEIGHTS {
            let w = quarter_weights(&mut rng, m.num_features());
            let start = points.choose(&mut rng).expect("feasible instance").clone();
            // Part-wise hill climbing from the random point reaches a local optimum.
            let mut climbed = start.clone();
            loop {
                let here = utility(&m, &w, &climbed);
                let better = (0..m.num_parts())
                    .flat_map(|p| part_variants(&m, &climbed, p))
                    .find(|y| utility(&m, &w, y) > here + EPSILON);
                match better {
                    Some(y) => climbed = y,
                    None => break,
                }
            }
            for x in [start, climbed] {
                let here = utility(&m, &w, &x);
                let local = (0..m.num_parts()).all(|p| {
                    part_variants(&m, &x, p)
                        .iter()
                        .all(|y| utility(&m, &w, y) <= here + EPSILON)
                });
                let conditional = (0..m.num_parts()).all(|p| {
                    let i_set = gai.i_of(p);
                    let mine = utility_on(&m, &w, i_set, &x);
                    part_variants(&m, &x, p)
                        .iter()
                        .all(|y| utility_on(&m, &w, i_set, y) <= mine + EPSILON)
                });
                let certified = certify_local_optimum(
                    &m,
                    &WeightVector(w.clone()),
                    &Configuration(x.clone()),
                    SearchMode::BranchAndBound,
                )
                .expect("certify")
                .is_optimal();
                cases += 1;
                positives += local as usize;
                if local != conditional || local != certified {
                    disagreements.push(format!(
                        "instance {seed}: local {local}, conditional {conditional}, certified {certified}"
                    ));
                }
            }
        }
    }
    report.record(
        "local-optimality equivalence",
        disagreements.is_empty(),
        format!(
            "{OPTIMALITY_INSTANCES} instances x {OPTIMALITY_WEIGHTS} weights, {cases} configurations ({positives} local optima), {} disagreements{}",
            disagreements.len(),
            disagreements.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    );
}

fn termination(report: &mut Report, pool: &mut Pool) {
    let converged = |pool: &Pool| {
        pool.runs()
            .filter(|r| r.converged_at.is_some() && r.certified.is_some())
            .count()
    };
    // Top up with further grid seeds when the pooled runs converge too rarely.
    let model = builtin("grid").expect("grid");
    let mut seed = SEEDS.end;
    while converged(pool) < MIN_CONVERGED && seed < SEEDS.end + 50 {
        let c = config("grid", Algorithm::Pcl, 1.0, seed, GRID_T, false);
        pool.add(run(&prepare(&model, &c), &c));
        seed += 1;
    }
    let total = converged(pool);
    let certified = pool.runs().filter(|r| r.certified == Some(true)).count();
    let bad = pool.violations("certification");
    report.record(
        "termination certificates",
        total >= MIN_CONVERGED && certified == total && bad.is_empty(),
        format!(
            "{total} converged part-wise runs, {certified} certified local optima, {} violations",
            bad.len()
        ),
    );
}

/// Random feasible configurations reached by random single-part moves.
struct Walker {
    x: Configuration,
}

impl Walker {
    fn step(&mut self, m: &ProblemModel, rng: &mut ChaCha8Rng) {
        let p = rng.gen_range(0..m.num_parts());
        let w = WeightVector::zeros(m.num_features());
        let options = scan_options(m, &w, &FeatureSet::full(m.num_features()), Scope::Part(p), &self.x).expect("scan");
        let o = options.choose(rng).expect("the current assignment is feasible");
        self.x = self.x.with(&o.assignment);
    }
}

fn inference_oracle(report: &mut Report) {
    let mut lines = Vec::new();
    let mut ok = true;
    for problem in ["grid", "training", "hotel", "random"] {
        let begin = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fixed = (problem != "random").then(|| builtin(problem).expect("builtin"));
        let mut walker = fixed.as_ref().map(|m| Walker {
            x: infer_full(m, &WeightVector::zeros(m.num_features()), SearchMode::BranchAndBound).expect("start"),
        });
        let mut mismatches = 0;
        for k in 0..ORACLE_INSTANCES {
            let owned;
            let (m, base) = match (&fixed, &mut walker) {
                (Some(m), Some(walker)) => {
                    walker.step(m, &mut rng);
                    (m, walker.x.clone())
                }
                _ => {
                    owned = random_small_instance(k as u64, RandomSizes::default());
                    let mut walker = Walker {
                        x: Configuration(owned.variables().iter().map(|v| v.domain[0]).collect()),
                    };
                    for _ in 0..3 {
                        walker.step(&owned, &mut rng);
                    }
                    (&owned, walker.x)
                }
            };
            let gai = decompose(m);
            let w = if rng.gen_bool(0.5) {
                quarter_weights(&mut rng, m.num_features())
            } else {
                normal_weights(&mut rng, m.num_features())
            };
            let w = WeightVector(w);
            let p = rng.gen_range(0..m.num_parts());
            let objective = match rng.gen_range(0..3) {
                0 => gai.j_of(p).clone(),
                1 => gai.i_of(p).clone(),
                _ => FeatureSet::full(m.num_features()),
            };
            let bb = infer_part(m, &w, &objective, p, &base, SearchMode::BranchAndBound).expect("branch and bound");
            let ex = infer_part(m, &w, &objective, p, &base, SearchMode::Exhaustive).expect("exhaustive");
            if bb.value != ex.value || bb.assignment != ex.assignment {
                mismatches += 1;
            }
        }
        ok &= mismatches == 0;
        lines.push(format!(
            "{problem} {mismatches}/{ORACLE_INSTANCES} mismatches ({:.1}s)",
            begin.elapsed().as_secs_f64()
        ));
    }

    // Full inference on a four-room hotel against brute force over every configuration.
    let small = build_hotel(&HotelConfig {
        floors: 1,
        rooms_per_floor: 4,
        capacity: vec![4, 2, 6, 3],
        bar_room: 1,
        budget: 8.0,
        type_caps: [2.0, 1.0, 1.0, 3.0],
        guest_cap: 10.0,
        ..Default::default()
    })
    .expect("small hotel");
    let per_room: Vec<Vec<Vec<i32>>> = (0..small.num_parts())
        .map(|p| {
            let vars = &small.parts()[p].variables;
            let own: Vec<usize> = (0..small.constraints().len())
                .filter(|&c| {
                    small.constraints()[c]
                        .expr
                        .terms
                        .iter()
                        .all(|t| atom_vars(&t.atom).iter().all(|v| vars.contains(v)))
                })
                .collect();
            assignments(&small, vars, &vec![0; small.num_vars()])
                .into_iter()
                .filter(|x| own.iter().all(|&c| holds(&small, c, x)))
                .collect()
        })
        .collect();
    let mut configurations = vec![vec![0; small.num_vars()]];
    for (p, options) in per_room.iter().enumerate() {
        let vars = &small.parts()[p].variables;
        configurations = configurations
            .iter()
            .flat_map(|x| {
                options.iter().map(move |o| {
                    let mut y = x.clone();
                    for &v in vars {
                        y[v] = o[v];
                    }
                    y
                })
            })
            .collect();
    }
    configurations.retain(|x| feasible(&small, x));
    let bank = UserBank::sample(small.num_features(), 10, 3, 0.5).expect("users");
    let mut gaps = Vec::new();
    for w in &bank.users {
        let best = configurations
            .iter()
            .map(|x| utility(&small, &w.0, x))
            .fold(f64::NEG_INFINITY, f64::max);
        let x = infer_full(&small, w, SearchMode::BranchAndBound).expect("full inference");
        gaps.push((best - utility(&small, &w.0, &x.0)).abs());
    }
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    ok &= worst <= 1e-9;
    lines.push(format!(
        "four-room hotel: {} users vs {} configurations, max optimum gap {worst:.2e}",
        bank.users.len(),
        configurations.len()
    ));
    report.record("inference oracle", ok, lines.join("; "));
}

fn synthetic_curve(report: &mut Report, pool: &mut Pool) {
    let begin = Instant::now();
    let model = builtin("grid").expect("grid");
    let alpha = 0.3;
    let mut finals = Vec::new();
    for (algorithm, selection) in [
        (Algorithm::Pcl, SelectionKind::Random),
        (Algorithm::Pcl, SelectionKind::Smallest),
        (Algorithm::Pcl, SelectionKind::Ucb1),
        (Algorithm::Cl, SelectionKind::Random),
    ] {
        let mut c = config("grid", algorithm, alpha, 0, GRID_T, true);
        c.selection = selection;
        let e = pool.add(run(&prepare(&model, &c), &c));
        finals.push(e.mean_regret_at(GRID_T).expect("regret"));
    }
    let seconds = begin.elapsed().as_secs_f64();
    // Reference only: the baseline with gains matched to the part-wise runs. Its
    // improvements are not α-informative, so it stays out of the audit pool.
    let mut matched = config("grid", Algorithm::Cl, alpha, 0, GRID_T, true);
    matched.matched_gain = true;
    let matched = run(&prepare(&model, &matched), &matched)
        .mean_regret_at(GRID_T)
        .expect("regret");
    let (random, smallest, ucb, cl) = (finals[0], finals[1], finals[2], finals[3]);
    let within = random <= cl * (1.0 + SYNTHETIC_TOLERANCE);
    let best_selection =
        random <= smallest * (1.0 + SELECTION_TOLERANCE) && random <= ucb * (1.0 + SELECTION_TOLERANCE);
    report.record(
        "synthetic curve",
        within && best_selection && seconds < SYNTHETIC_SECONDS,
        format!(
            "final mean regret PCL {random:.4} vs CL {cl:.4} (within {:.0}%: {within}); random {random:.4}, smallest {smallest:.4}, ucb1 {ucb:.4} (random best within {:.0}%: {best_selection}); {seconds:.1}s; matched-gain CL {matched:.4} (reference)",
            SYNTHETIC_TOLERANCE * 100.0,
            SELECTION_TOLERANCE * 100.0
        ),
    );
}

fn training_curve(report: &mut Report, pool: &mut Pool) {
    let model = builtin("training").expect("training");
    let c = config("training", Algorithm::Pcl, 0.5, 0, TRAINING_T, true);
    let e = pool.add(run(&prepare(&model, &c), &c));
    let (start, at) = (
        e.mean_regret_at(0).expect("regret"),
        e.mean_regret_at(TRAINING_T_CHECK).expect("regret"),
    );
    let ratio = at / start;
    report.record(
        "training curve",
        ratio <= TRAINING_RATIO,
        format!("mean regret {start:.3} -> {at:.3} at t={TRAINING_T_CHECK}, ratio {ratio:.4} (limit {TRAINING_RATIO})"),
    );
}

fn hotel_curve(report: &mut Report, pool: &mut Pool) {
    let model = builtin("hotel").expect("hotel");
    // Users and optima depend only on the seed, so both alphas share one preparation.
    let base = config("hotel", Algorithm::Pcl, 0.5, 0, HOTEL_T, true);
    let prepared = prepare(&model, &base);
    let half = pool.add(run(&prepared, &base));
    let ratios: Vec<f64> = half
        .runs
        .iter()
        .map(|r| r.regret_at(HOTEL_T).expect("regret") / r.regret_at(0).expect("regret"))
        .collect();
    let ratio = median(&ratios);
    let final_half = half.mean_regret_at(HOTEL_T).expect("regret");
    let mut low = base.clone();
    low.alpha = 0.3;
    let final_low = pool.add(run(&prepared, &low)).mean_regret_at(HOTEL_T).expect("regret");
    let spread = (final_low - final_half).abs() / final_half;
    report.record(
        "hotel curve",
        ratio <= HOTEL_RATIO && spread <= HOTEL_ALPHA_TOLERANCE,
        format!(
            "alpha=0.5 median regret ratio {ratio:.4} at t={HOTEL_T} (limit {HOTEL_RATIO}); final mean regret alpha=0.3 {final_low:.4} vs alpha=0.5 {final_half:.4}, relative difference {spread:.3} (limit {HOTEL_ALPHA_TOLERANCE})"
        ),
    );
}

fn alpha_audit(report: &mut Report, pool: &Pool) {
    let checks = pool.checks();
    let bad = pool.violations("alpha_informative");
    let runs = pool.runs().count();
    report.record(
        "alpha-informativeness audit",
        bad.is_empty() && checks.alpha_informative > 0,
        format!(
            "{} improvements over {runs} runs, {} violations{}",
            checks.alpha_informative,
            bad.len(),
            bad.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    );
}

fn determinism(report: &mut Report) {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut details = Vec::new();
    let mut ok = true;
    for (problem, alpha, iters) in [("grid", 0.3, GRID_T), ("training", 0.5, 40), ("hotel", 0.5, 40)] {
        let c = config(problem, Algorithm::Pcl, alpha, 11, iters, true);
        let mut files = Vec::new();
        for k in 0..2 {
            let model = builtin(problem).expect("builtin");
            let prepared = prepare(&model, &c);
            let e = run(&prepared, &c);
            let out = dir.path().join(format!("{problem}{k}"));
            write_outputs(&e, Some(&prepared.bank), &out).expect("write");
            files.push(std::fs::read(out.join("metrics.csv")).expect("metrics"));
        }
        let same = files[0] == files[1];
        ok &= same && !files[0].is_empty();
        details.push(format!(
            "{problem} {} bytes {}",
            files[0].len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    report.record("determinism", ok, details.join("; "));
}

fn main() {
    let mut report = Report { lines: Vec::new() };
    let mut pool = Pool::default();
    let begin = Instant::now();

    regret_bound_suite(&mut report, &mut pool);
    synthetic_curve(&mut report, &mut pool);
    training_curve(&mut report, &mut pool);
    hotel_curve(&mut report, &mut pool);
    termination(&mut report, &mut pool);
    update_identities(&mut report, &pool);
    alpha_audit(&mut report, &pool);
    local_optimality_equivalence(&mut report);
    inference_oracle(&mut report);
    determinism(&mut report);

    let failed = report.lines.iter().filter(|(ok, _)| !ok).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        report.lines.len() - failed,
        begin.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
