//! Exact conditional inference.
//!
//! A request maximizes `u[objective](x_free ∘ x_fixed)` over the free variables
//! (one basic part, or all variables) subject to every hard constraint that reads
//! a free variable. Constraints reading only fixed variables are ignored.
//!
//! Ties are resolved the same way in both search modes: with `v*` the maximum,
//! the answer is the first assignment in lexicographic order (free variables in
//! [`ProblemModel::search_order`], values ascending) whose score is at least
//! `v* - EPSILON`. Both modes rank candidates with the same compiled scoring
//! function, so they return identical assignments.
//!
//! The branch-and-bound mode searches part by part. Each basic part's feasible
//! assignments are enumerated once (with interval pruning on its constraints);
//! the bound adds, for every undecided part, its best part-local score and, for
//! features coupling several parts, the largest weighted transform over the
//! interval hull of the still-open expression.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    Atom, Comparison, Configuration, FeatureSet, Interval, LinearExpr, PartialConfiguration, ProblemModel, Transform,
    Value, WeightVector,
};
use crate::EPSILON;

/// Largest search space the exhaustive mode will enumerate.
pub const EXHAUSTIVE_LIMIT: f64 = 5e7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    #[default]
    BranchAndBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Part(usize),
    All,
}

#[derive(Clone, Debug)]
pub struct InferenceRequest<'a> {
    pub model: &'a ProblemModel,
    pub weights: &'a WeightVector,
    pub objective: &'a FeatureSet,
    pub scope: Scope,
    /// Supplies the fixed remainder; its values on the free variables are ignored.
    pub base: &'a Configuration,
    pub mode: SearchMode,
}

#[derive(Clone, Debug)]
pub struct Inferred {
    pub assignment: PartialConfiguration,
    /// `u[objective]` of the assignment combined with the fixed remainder.
    pub value: f64,
    /// Search nodes visited.
    pub nodes: u64,
    pub elapsed: Duration,
}

impl Inferred {
    pub fn configuration(&self, base: &Configuration) -> Configuration {
        base.with(&self.assignment)
    }
}

/// A feasible assignment of the free variables with its objective score.
#[derive(Clone, Debug)]
pub struct ScoredOption {
    pub assignment: PartialConfiguration,
    pub value: f64,
}

pub fn infer(req: &InferenceRequest<'_>) -> Result<Inferred> {
    let start = Instant::now();
    let problem = Compiled::new(req)?;
    let (assign, nodes) = match req.mode {
        SearchMode::Exhaustive => problem.exhaustive()?,
        SearchMode::BranchAndBound => problem.branch_and_bound()?,
    };
    let assignment = problem.to_partial(&assign);
    let value = req
        .model
        .partial_utility_unchecked(req.weights, req.objective, &req.base.with(&assignment));
    Ok(Inferred {
        assignment,
        value,
        nodes,
        elapsed: start.elapsed(),
    })
}

/// argmax over the part's assignments of `u[objective]`, the rest of `base` fixed.
pub fn infer_part(
    model: &ProblemModel,
    weights: &WeightVector,
    objective: &FeatureSet,
    part: usize,
    base: &Configuration,
    mode: SearchMode,
) -> Result<Inferred> {
    model.part(part)?;
    infer(&InferenceRequest {
        model,
        weights,
        objective,
        scope: Scope::Part(part),
        base,
        mode,
    })
}

/// argmax over all feasible configurations of the full utility.
pub fn infer_full(model: &ProblemModel, weights: &WeightVector, mode: SearchMode) -> Result<Configuration> {
    let base = lowest_values(model);
    let objective = FeatureSet::full(model.num_features());
    let out = infer(&InferenceRequest {
        model,
        weights,
        objective: &objective,
        scope: Scope::All,
        base: &base,
        mode,
    })?;
    Ok(out.configuration(&base))
}

/// The configuration taking every variable's smallest value (not necessarily feasible).
pub fn lowest_values(model: &ProblemModel) -> Configuration {
    Configuration(model.variables().iter().map(|v| v.domain[0]).collect())
}

/// Every feasible assignment of the free variables, in lexicographic order, with its score.
pub fn scan_options(
    model: &ProblemModel,
    weights: &WeightVector,
    objective: &FeatureSet,
    scope: Scope,
    base: &Configuration,
) -> Result<Vec<ScoredOption>> {
    let req = InferenceRequest {
        model,
        weights,
        objective,
        scope,
        base,
        mode: SearchMode::BranchAndBound,
    };
    let problem = Compiled::new(&req)?;
    let mut out = Vec::new();
    problem.for_each_feasible(|assign| {
        out.push(ScoredOption {
            assignment: problem.to_partial(assign),
            value: problem.score(assign),
        });
    })?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LocalOptimality {
    Optimal,
    Improvable {
        part: usize,
        witness: PartialConfiguration,
        gain: f64,
    },
}

impl LocalOptimality {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LocalOptimality::Optimal)
    }
}

/// Checks that no single basic part can be reassigned to raise the utility by more than
/// `EPSILON`; otherwise reports the first improvable part with its best replacement.
pub fn certify_local_optimum(
    model: &ProblemModel,
    weights: &WeightVector,
    x: &Configuration,
    mode: SearchMode,
) -> Result<LocalOptimality> {
    model.check_domain(x)?;
    for p in 0..model.num_parts() {
        let features = &model.parts()[p].features;
        let best = infer_part(model, weights, features, p, x, mode)?;
        let current = model.partial_utility_unchecked(weights, features, x);
        if best.value > current + EPSILON {
            return Ok(LocalOptimality::Improvable {
                part: p,
                witness: best.assignment,
                gain: best.value - current,
            });
        }
    }
    Ok(LocalOptimality::Optimal)
}

// ---------------------------------------------------------------------------
// Compiled request

/// An expression over free positions with the fixed remainder folded in.
#[derive(Clone, Debug, Default)]
struct CExpr {
    constant: f64,
    /// Contribution of a single position, tabulated by domain index.
    unary: Vec<(usize, Vec<f64>)>,
    /// Conjunctions over two or more positions.
    multi: Vec<(f64, Vec<(usize, u16)>)>,
}

impl CExpr {
    fn compile(expr: &LinearExpr, pos_of: &[Option<usize>], domains: &[&[Value]], base: &Configuration) -> Self {
        let mut constant = expr.constant;
        let mut unary: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut multi = Vec::new();
        for term in &expr.terms {
            match &term.atom {
                Atom::Conj(lits) => {
                    let mut free: Vec<(usize, u16)> = Vec::with_capacity(lits.len());
                    let mut dead = false;
                    for &(v, val) in lits {
                        match pos_of[v] {
                            None => {
                                if base.values()[v] != val {
                                    dead = true;
                                }
                            }
                            Some(pos) => match domains[pos].binary_search(&val) {
                                Ok(idx) => free.push((pos, idx as u16)),
                                Err(_) => dead = true,
                            },
                        }
                    }
                    if dead {
                        continue;
                    }
                    free.sort_unstable();
                    free.dedup();
                    if free.windows(2).any(|w| w[0].0 == w[1].0) {
                        continue;
                    }
                    match free.len() {
                        0 => constant += term.coef,
                        1 => {
                            let (pos, idx) = free[0];
                            unary.entry(pos).or_insert_with(|| vec![0.0; domains[pos].len()])[usize::from(idx)] +=
                                term.coef;
                        }
                        _ => multi.push((term.coef, free)),
                    }
                }
                Atom::Var(v) => match pos_of[*v] {
                    None => constant += term.coef * f64::from(base.values()[*v]),
                    Some(pos) => {
                        let table = unary.entry(pos).or_insert_with(|| vec![0.0; domains[pos].len()]);
                        for (slot, &val) in table.iter_mut().zip(domains[pos]) {
                            *slot += term.coef * f64::from(val);
                        }
                    }
                },
            }
        }
        CExpr {
            constant,
            unary: unary.into_iter().collect(),
            multi,
        }
    }

    #[inline]
    fn eval(&self, a: &[u16]) -> f64 {
        let mut acc = self.constant;
        for (pos, table) in &self.unary {
            acc += table[usize::from(a[*pos])];
        }
        for (coef, lits) in &self.multi {
            if lits.iter().all(|&(pos, idx)| a[pos] == idx) {
                acc += coef;
            }
        }
        acc
    }

    /// Interval hull when positions `< cursor` are assigned in `a` and the rest are open.
    fn interval(&self, a: &[u16], cursor: usize) -> Interval {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (pos, table) in &self.unary {
            if *pos < cursor {
                let v = table[usize::from(a[*pos])];
                lo += v;
                hi += v;
            } else {
                lo += table.iter().copied().fold(f64::INFINITY, f64::min);
                hi += table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        for (coef, lits) in &self.multi {
            let mut open = false;
            let mut dead = false;
            for &(pos, idx) in lits {
                if pos >= cursor {
                    open = true;
                } else if a[pos] != idx {
                    dead = true;
                    break;
                }
            }
            if dead {
                continue;
            }
            if open {
                lo += coef.min(0.0);
                hi += coef.max(0.0);
            } else {
                lo += coef;
                hi += coef;
            }
        }
        Interval { lo, hi }
    }

    fn positions(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.unary.iter().map(|(pos, _)| *pos).collect();
        for (_, lits) in &self.multi {
            p.extend(lits.iter().map(|&(pos, _)| pos));
        }
        p.sort_unstable();
        p.dedup();
        p
    }
}

#[derive(Clone, Debug)]
struct CFeature {
    weight: f64,
    transform: Transform,
    expr: CExpr,
}

impl CFeature {
    #[inline]
    fn value(&self, a: &[u16]) -> f64 {
        self.weight * self.transform.apply(self.expr.eval(a))
    }
}

#[derive(Clone, Debug)]
struct CConstraint {
    index: usize,
    expr: CExpr,
    cmp: Comparison,
    rhs: f64,
    first: usize,
    last: usize,
}

impl CConstraint {
    fn holds(&self, a: &[u16]) -> bool {
        self.cmp.holds(self.expr.eval(a), self.rhs)
    }

    fn satisfiable(&self, a: &[u16], cursor: usize) -> bool {
        self.cmp.satisfiable(self.expr.interval(a, cursor), self.rhs)
    }
}

struct Compiled<'a> {
    model: &'a ProblemModel,
    parts: Vec<usize>,
    /// position -> variable
    vars: Vec<usize>,
    domains: Vec<&'a [Value]>,
    blocks: Vec<Range<usize>>,
    features: Vec<CFeature>,
    constraints: Vec<CConstraint>,
    /// Constraints to check exactly once position `p` is assigned.
    check_at: Vec<Vec<usize>>,
    /// Constraints that are open across position `p` (interval check).
    open_at: Vec<Vec<usize>>,
    /// Whether each block's options may come from the model cache.
    cacheable: Vec<bool>,
}

impl<'a> Compiled<'a> {
    fn new(req: &InferenceRequest<'a>) -> Result<Self> {
        let model = req.model;
        if req.weights.len() != model.num_features() {
            return Err(Error::Arity {
                expected: model.num_features(),
                got: req.weights.len(),
            });
        }
        if let Some(max) = req.objective.max() {
            if max >= model.num_features() {
                return Err(Error::FeatureIndex {
                    index: max,
                    len: model.num_features(),
                });
            }
        }
        model.check_domain(req.base)?;
        let parts: Vec<usize> = match req.scope {
            Scope::Part(p) => {
                model.part(p)?;
                vec![p]
            }
            Scope::All => (0..model.num_parts()).collect(),
        };
        let mut vars = Vec::new();
        let mut blocks = Vec::new();
        for &p in &parts {
            let start = vars.len();
            vars.extend_from_slice(&model.parts()[p].variables);
            blocks.push(start..vars.len());
        }
        let mut pos_of = vec![None; model.num_vars()];
        for (pos, &v) in vars.iter().enumerate() {
            pos_of[v] = Some(pos);
        }
        let domains: Vec<&[Value]> = vars.iter().map(|&v| model.variables()[v].domain.as_slice()).collect();

        let features = req
            .objective
            .iter()
            .filter(|&i| req.weights.0[i] != 0.0)
            .filter(|&i| model.features()[i].scope.iter().any(|&v| pos_of[v].is_some()))
            .map(|i| {
                let f = &model.features()[i];
                CFeature {
                    weight: req.weights.0[i],
                    transform: f.transform,
                    expr: CExpr::compile(&f.expr, &pos_of, &domains, req.base),
                }
            })
            .collect();

        let mut constraints = Vec::new();
        let mut check_at = vec![Vec::new(); vars.len()];
        let mut open_at = vec![Vec::new(); vars.len()];
        let mut relevant: Vec<usize> = parts
            .iter()
            .flat_map(|&p| model.part_constraints(p).iter().copied())
            .collect();
        relevant.sort_unstable();
        relevant.dedup();
        for c in relevant {
            let con = &model.constraints()[c];
            let expr = CExpr::compile(&con.expr, &pos_of, &domains, req.base);
            let positions = expr.positions();
            let (Some(&first), Some(&last)) = (positions.first(), positions.last()) else {
                // Every free literal folded away.
                if !con.cmp.holds(expr.constant, con.rhs) {
                    return Err(Error::Infeasible {
                        violated: vec![con.id.clone()],
                    });
                }
                continue;
            };
            let k = constraints.len();
            check_at[last].push(k);
            for slot in open_at.iter_mut().take(last).skip(first) {
                slot.push(k);
            }
            constraints.push(CConstraint {
                index: c,
                expr,
                cmp: con.cmp,
                rhs: con.rhs,
                first,
                last,
            });
        }
        let cacheable = parts.iter().map(|&p| model.is_self_contained(p)).collect();
        Ok(Compiled {
            model,
            parts,
            vars,
            domains,
            blocks,
            features,
            constraints,
            check_at,
            open_at,
            cacheable,
        })
    }

    fn score(&self, a: &[u16]) -> f64 {
        self.features.iter().map(|f| f.value(a)).sum()
    }

    fn to_partial(&self, a: &[u16]) -> PartialConfiguration {
        let values: Vec<Value> = a
            .iter()
            .zip(&self.domains)
            .map(|(&idx, dom)| dom[usize::from(idx)])
            .collect();
        PartialConfiguration::new(self.parts.clone(), self.vars.clone(), values)
            .expect("positions are distinct variables")
    }

    fn infeasible(&self, rejected: &[u64]) -> Error {
        let mut violated: Vec<String> = self
            .constraints
            .iter()
            .zip(rejected)
            .filter(|(_, &n)| n > 0)
            .map(|(c, _)| self.model.constraints()[c.index].id.clone())
            .collect();
        if violated.is_empty() {
            violated = self
                .constraints
                .iter()
                .map(|c| self.model.constraints()[c.index].id.clone())
                .collect();
        }
        Error::Infeasible { violated }
    }

    // --- exhaustive ------------------------------------------------------

    fn space_size(&self) -> f64 {
        self.domains.iter().map(|d| d.len() as f64).product()
    }

    /// Visits every assignment of all positions in lexicographic order.
    fn odometer(&self, mut visit: impl FnMut(&[u16]) -> bool) {
        let n = self.domains.len();
        let mut a = vec![0u16; n];
        loop {
            if !visit(&a) {
                return;
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                a[k] += 1;
                if usize::from(a[k]) < self.domains[k].len() {
                    break;
                }
                a[k] = 0;
            }
        }
    }

    fn exhaustive(&self) -> Result<(Vec<u16>, u64)> {
        let size = self.space_size();
        if size > EXHAUSTIVE_LIMIT {
            return Err(Error::TooLarge {
                size,
                limit: EXHAUSTIVE_LIMIT,
            });
        }
        let mut rejected = vec![0u64; self.constraints.len()];
        let mut best = f64::NEG_INFINITY;
        let mut nodes = 0u64;
        self.odometer(|a| {
            nodes += 1;
            let mut ok = true;
            for (k, c) in self.constraints.iter().enumerate() {
                if !c.holds(a) {
                    rejected[k] += 1;
                    ok = false;
                }
            }
            if ok {
                best = best.max(self.score(a));
            }
            true
        });
        if best == f64::NEG_INFINITY {
            return Err(self.infeasible(&rejected));
        }
        let threshold = best - EPSILON;
        let mut found = None;
        self.odometer(|a| {
            if self.constraints.iter().all(|c| c.holds(a)) && self.score(a) >= threshold {
                found = Some(a.to_vec());
                false
            } else {
                true
            }
        });
        Ok((found.expect("the maximizer qualifies"), nodes))
    }

    // --- block enumeration ----------------------------------------------

    /// Feasible assignments of one block's positions with respect to the constraints
    /// whose positions all lie inside the block, in lexicographic order.
    fn enumerate_block(&self, b: usize, a: &mut [u16], rejected: &mut [u64]) -> Vec<Box<[u16]>> {
        let range = self.blocks[b].clone();
        let mut out = Vec::new();
        self.enumerate_rec(&range, range.start, a, rejected, &mut out);
        out
    }

    fn enumerate_rec(
        &self,
        range: &Range<usize>,
        pos: usize,
        a: &mut [u16],
        rejected: &mut [u64],
        out: &mut Vec<Box<[u16]>>,
    ) {
        if pos == range.end {
            out.push(a[range.clone()].into());
            return;
        }
        'values: for idx in 0..self.domains[pos].len() {
            a[pos] = idx as u16;
            for &k in &self.check_at[pos] {
                let c = &self.constraints[k];
                if c.first >= range.start && !c.holds(a) {
                    rejected[k] += 1;
                    continue 'values;
                }
            }
            for &k in &self.open_at[pos] {
                let c = &self.constraints[k];
                if c.first >= range.start && c.last < range.end && !c.satisfiable(a, pos + 1) {
                    rejected[k] += 1;
                    continue 'values;
                }
            }
            self.enumerate_rec(range, pos + 1, a, rejected, out);
        }
    }

    fn block_options(&self, b: usize, a: &mut [u16]) -> Result<Arc<[Box<[u16]>]>> {
        let part = self.parts[b];
        if self.cacheable[b] {
            if let Some(cached) = self.model.option_cache[part].get() {
                if !cached.is_empty() {
                    return Ok(cached.clone());
                }
            }
        }
        let mut rejected = vec![0u64; self.constraints.len()];
        let options: Arc<[Box<[u16]>]> = self.enumerate_block(b, a, &mut rejected).into();
        if options.is_empty() {
            return Err(self.infeasible(&rejected));
        }
        if self.cacheable[b] {
            let _ = self.model.option_cache[part].set(options.clone());
        }
        Ok(options)
    }

    /// Cross-block constraints completed by the block ending at `end`.
    fn cross_ok(&self, block: &Range<usize>, a: &[u16]) -> bool {
        block.clone().all(|pos| {
            self.check_at[pos].iter().all(|&k| {
                let c = &self.constraints[k];
                c.first >= block.start || c.holds(a)
            })
        })
    }

    fn for_each_feasible(&self, mut visit: impl FnMut(&[u16])) -> Result<()> {
        let mut a = vec![0u16; self.vars.len()];
        let options: Vec<Arc<[Box<[u16]>]>> = (0..self.blocks.len())
            .map(|b| self.block_options(b, &mut a))
            .collect::<Result<_>>()?;
        let total: f64 = options.iter().map(|o| o.len() as f64).product();
        if total > EXHAUSTIVE_LIMIT {
            return Err(Error::TooLarge {
                size: total,
                limit: EXHAUSTIVE_LIMIT,
            });
        }
        self.product_rec(0, &options, &mut a, &mut visit);
        Ok(())
    }

    fn product_rec(&self, b: usize, options: &[Arc<[Box<[u16]>]>], a: &mut [u16], visit: &mut impl FnMut(&[u16])) {
        if b == self.blocks.len() {
            visit(a);
            return;
        }
        let range = self.blocks[b].clone();
        for opt in options[b].iter() {
            a[range.clone()].copy_from_slice(opt);
            if self.cross_ok(&range, a) {
                self.product_rec(b + 1, options, a, visit);
            }
        }
    }

    // --- branch and bound -------------------------------------------------

    fn branch_and_bound(&self) -> Result<(Vec<u16>, u64)> {
        let mut a = vec![0u16; self.vars.len()];
        let options: Vec<Arc<[Box<[u16]>]>> = (0..self.blocks.len())
            .map(|b| self.block_options(b, &mut a))
            .collect::<Result<_>>()?;
        let tables = BoundTables::new(self, &options);
        let mut search = Search {
            problem: self,
            options: &options,
            tables: &tables,
            a,
            nodes: 0,
            first: 0,
        };
        let best = search.maximize();
        if best == f64::NEG_INFINITY {
            return Err(self.infeasible(&vec![1; self.constraints.len()]));
        }
        let answer = search.first_at_least(best - EPSILON).expect("the maximizer qualifies");
        Ok((answer, search.nodes))
    }
}

enum Role {
    /// Reads one block only.
    Local(usize),
    /// Identity feature whose terms each lie within one block.
    Separable,
    /// Reads exactly blocks `k` and `k + 1`.
    Chain(usize),
    /// Reads block 0 and one later, non-adjacent block `k`: local to `k` once block 0
    /// is fixed.
    Anchored(usize),
    Coupled,
}

/// An anchored feature's values by `(block 0 option, block k option)`.
struct AnchoredTable {
    feature: usize,
    block: usize,
    values: Vec<Vec<f64>>,
}

/// A feature linking consecutive blocks, split as `T(c + left[o] + right[o'] + cross)`.
struct ChainFeature {
    feature: usize,
    left: Vec<f64>,
    right: Vec<f64>,
    has_cross: bool,
}

/// A coupled feature's bookkeeping for the bound.
struct CoupledTable {
    feature: usize,
    /// Per block, per option: sum of the feature's terms internal to that block.
    contrib: Vec<Option<Vec<f64>>>,
    /// Suffix sums over blocks `>= k` of per-block minima and maxima.
    rest_lo: Vec<f64>,
    rest_hi: Vec<f64>,
    /// Terms spanning several blocks, by the block completing them.
    cross: Vec<Vec<(f64, Vec<(usize, u16)>)>>,
    cross_lo: Vec<f64>,
    cross_hi: Vec<f64>,
}

/// Convex hinge features split into their two linear pieces in the bound.
const MAX_PIECES: usize = 4;
/// Subgradient steps tuning the Lagrangian multipliers.
const LAGRANGE_STEPS: usize = 40;

/// Score tables for the bound.
///
/// With `H_k(o) = local_k(o) + G_k(o)` and
/// `G_k(o) = max_o' [chain_k(o, o') + H_{k+1}(o')]`, the best completion of a prefix
/// ending in option `o` of block `k` is at most `acc + G_k(o)` plus the interval bounds
/// of the coupled features. Cross-block constraints are relaxed in `G`, so it is an
/// upper bound, exact when nothing else couples the blocks.
struct BoundTables {
    /// Per block, per option: part-local score.
    local: Vec<Vec<f64>>,
    /// Per block pair `(k, k + 1)`: chain scores, row-major by `(o, o')`.
    chain: Vec<Option<Vec<f64>>>,
    /// Per option of block 0, per block, per option: `G_k(o)`.
    ahead: Vec<Vec<Vec<f64>>>,
    coupled: Vec<CoupledTable>,
    anchored: Vec<AnchoredTable>,
    /// Groups of relaxations; see [`BoundTables::lagrangian`].
    relaxations: Vec<Vec<Relaxation>>,
}

/// The chain DP with some coupled features replaced by linear majorants.
struct Relaxation {
    /// `(coupled index, slope, intercept)`.
    lines: Vec<(usize, f64, f64)>,
    local: Vec<Vec<f64>>,
    /// As [`BoundTables::ahead`].
    ahead: Vec<Vec<Vec<f64>>>,
}

impl Relaxation {
    /// Root bound (with the remaining coupled features at their interval bound and the
    /// anchored features left out) and the maximizing option path of the relaxed problem.
    /// Expects unconditioned tables.
    fn root(&self, tables: &BoundTables, problem: &Compiled<'_>) -> (f64, Vec<usize>) {
        let nb = self.local.len();
        let argmax = |scores: &mut dyn Iterator<Item = f64>| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (o, v) in scores.enumerate() {
                if v > best.0 {
                    best = (v, o);
                }
            }
            best
        };
        let ahead = &self.ahead[0];
        let (mut value, first) = argmax(&mut self.local[0].iter().zip(&ahead[0]).map(|(l, g)| l + g));
        let mut path = vec![first];
        for k in 0..nb - 1 {
            let prev = path[k];
            let n1 = self.local[k + 1].len();
            let row = tables.chain[k].as_ref().map(|t| &t[prev * n1..(prev + 1) * n1]);
            let (_, o) =
                argmax(&mut (0..n1).map(|o1| row.map_or(0.0, |r| r[o1]) + self.local[k + 1][o1] + ahead[k + 1][o1]));
            path.push(o);
        }
        for (j, table) in tables.coupled.iter().enumerate() {
            let f = &problem.features[table.feature];
            match self.lines.iter().find(|l| l.0 == j) {
                Some(&(_, slope, intercept)) => value += intercept + slope * f.expr.constant,
                None => {
                    let c = f.expr.constant;
                    let iv = Interval {
                        lo: c + table.rest_lo[0] + table.cross_lo[0],
                        hi: c + table.rest_hi[0] + table.cross_hi[0],
                    };
                    value += f.transform.max_weighted(f.weight, iv);
                }
            }
        }
        (value, path)
    }
}

/// `G_k(o) = max_o' [chain_k(o, o') + local_{k+1}(o') + G_{k+1}(o')]`, with `G` zero on
/// the last block.
fn backward(local: &[Vec<f64>], chain: &[Option<Vec<f64>>]) -> Vec<Vec<f64>> {
    let nb = local.len();
    let mut ahead: Vec<Vec<f64>> = local.iter().map(|l| vec![0.0; l.len()]).collect();
    for k in (0..nb.saturating_sub(1)).rev() {
        let next_h: Vec<f64> = local[k + 1].iter().zip(&ahead[k + 1]).map(|(l, g)| l + g).collect();
        match &chain[k] {
            None => {
                let best = next_h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ahead[k].iter_mut().for_each(|g| *g = best);
            }
            Some(table) => {
                let n1 = next_h.len();
                for (o, g) in ahead[k].iter_mut().enumerate() {
                    *g = table[o * n1..(o + 1) * n1]
                        .iter()
                        .zip(&next_h)
                        .map(|(c, h)| c + h)
                        .fold(f64::NEG_INFINITY, f64::max);
                }
            }
        }
    }
    ahead
}

impl BoundTables {
    fn new(problem: &Compiled<'_>, options: &[Arc<[Box<[u16]>]>]) -> Self {
        let nb = problem.blocks.len();
        let mut block_of = vec![0; problem.vars.len()];
        for (b, r) in problem.blocks.iter().enumerate() {
            for pos in r.clone() {
                block_of[pos] = b;
            }
        }
        let roles: Vec<Role> = problem
            .features
            .iter()
            .map(|f| {
                let mut blocks: Vec<usize> = f.expr.positions().into_iter().map(|p| block_of[p]).collect();
                blocks.dedup();
                let cross_terms = f.expr.multi.iter().any(|(_, lits)| {
                    let b0 = block_of[lits[0].0];
                    lits.iter().any(|&(p, _)| block_of[p] != b0)
                });
                if blocks.len() <= 1 {
                    Role::Local(blocks.first().copied().unwrap_or(0))
                } else if f.transform == Transform::Identity && !cross_terms {
                    Role::Separable
                } else if blocks.len() == 2 && blocks[1] == blocks[0] + 1 {
                    Role::Chain(blocks[0])
                } else if blocks.len() == 2 && blocks[0] == 0 {
                    Role::Anchored(blocks[1])
                } else {
                    Role::Coupled
                }
            })
            .collect();

        let mut scratch = vec![0u16; problem.vars.len()];
        let mut local: Vec<Vec<f64>> = (0..nb).map(|b| vec![0.0; options[b].len()]).collect();
        let mut coupled: Vec<CoupledTable> = Vec::new();
        let mut chains: Vec<Vec<ChainFeature>> = (0..nb).map(|_| Vec::new()).collect();
        for (fi, role) in roles.iter().enumerate() {
            match role {
                Role::Coupled => coupled.push(CoupledTable {
                    feature: fi,
                    contrib: vec![None; nb],
                    rest_lo: vec![0.0; nb + 1],
                    rest_hi: vec![0.0; nb + 1],
                    cross: vec![Vec::new(); nb],
                    cross_lo: vec![0.0; nb + 1],
                    cross_hi: vec![0.0; nb + 1],
                }),
                Role::Chain(k) => {
                    let f = &problem.features[fi];
                    let side = |b: usize, scratch: &mut Vec<u16>| -> Vec<f64> {
                        let range = problem.blocks[b].clone();
                        options[b]
                            .iter()
                            .map(|opt| {
                                scratch[range.clone()].copy_from_slice(opt);
                                block_part(&f.expr, scratch, &|p| range.contains(&p))
                            })
                            .collect()
                    };
                    let left = side(*k, &mut scratch);
                    let right = side(*k + 1, &mut scratch);
                    let has_cross = f.expr.multi.iter().any(|(_, lits)| {
                        let b0 = block_of[lits[0].0];
                        lits.iter().any(|&(p, _)| block_of[p] != b0)
                    });
                    chains[*k].push(ChainFeature {
                        feature: fi,
                        left,
                        right,
                        has_cross,
                    });
                }
                _ => {}
            }
        }

        for b in 0..nb {
            let range = problem.blocks[b].clone();
            let inside = |pos: usize| range.contains(&pos);
            for (o, opt) in options[b].iter().enumerate() {
                scratch[range.clone()].copy_from_slice(opt);
                for (fi, role) in roles.iter().enumerate() {
                    let f = &problem.features[fi];
                    match role {
                        Role::Local(lb) if *lb == b => local[b][o] += f.value(&scratch),
                        Role::Separable => local[b][o] += f.weight * block_part(&f.expr, &scratch, &inside),
                        _ => {}
                    }
                }
            }
            for table in coupled.iter_mut() {
                let f = &problem.features[table.feature];
                if !f.expr.positions().iter().any(|&p| inside(p)) {
                    continue;
                }
                let values: Vec<f64> = options[b]
                    .iter()
                    .map(|opt| {
                        scratch[range.clone()].copy_from_slice(opt);
                        block_part(&f.expr, &scratch, &inside)
                    })
                    .collect();
                table.contrib[b] = Some(values);
            }
        }

        for table in coupled.iter_mut() {
            let f = &problem.features[table.feature];
            for (coef, lits) in &f.expr.multi {
                let blocks: Vec<usize> = lits.iter().map(|&(p, _)| block_of[p]).collect();
                let first = blocks[0];
                if blocks.iter().any(|&b| b != first) {
                    let last = *blocks.iter().max().expect("non-empty");
                    table.cross[last].push((*coef, lits.clone()));
                }
            }
            for b in (0..nb).rev() {
                let (lo, hi) = match &table.contrib[b] {
                    Some(v) => (
                        v.iter().copied().fold(f64::INFINITY, f64::min),
                        v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    ),
                    None => (0.0, 0.0),
                };
                table.rest_lo[b] = table.rest_lo[b + 1] + lo;
                table.rest_hi[b] = table.rest_hi[b + 1] + hi;
                let (clo, chi) = table.cross[b]
                    .iter()
                    .fold((0.0, 0.0), |(l, h), (c, _)| (l + c.min(0.0), h + c.max(0.0)));
                table.cross_lo[b] = table.cross_lo[b + 1] + clo;
                table.cross_hi[b] = table.cross_hi[b + 1] + chi;
            }
        }

        let mut anchored = Vec::new();
        for (fi, role) in roles.iter().enumerate() {
            let Role::Anchored(k) = *role else { continue };
            let f = &problem.features[fi];
            let (r0, rk) = (problem.blocks[0].clone(), problem.blocks[k].clone());
            let values = options[0]
                .iter()
                .map(|o0| {
                    scratch[r0.clone()].copy_from_slice(o0);
                    options[k]
                        .iter()
                        .map(|ok| {
                            scratch[rk.clone()].copy_from_slice(ok);
                            f.value(&scratch)
                        })
                        .collect()
                })
                .collect();
            anchored.push(AnchoredTable {
                feature: fi,
                block: k,
                values,
            });
        }

        // Chain tables and the backward pass.
        let mut chain: Vec<Option<Vec<f64>>> = (0..nb).map(|_| None).collect();
        for k in (0..nb.saturating_sub(1)).rev() {
            if chains[k].is_empty() {
                continue;
            }
            let (n0, n1) = (options[k].len(), options[k + 1].len());
            let mut table = vec![0.0; n0 * n1];
            let (r0, r1) = (problem.blocks[k].clone(), problem.blocks[k + 1].clone());
            for o in 0..n0 {
                scratch[r0.clone()].copy_from_slice(&options[k][o]);
                let row = &mut table[o * n1..(o + 1) * n1];
                for (o1, slot) in row.iter_mut().enumerate() {
                    let mut loaded = false;
                    for cf in &chains[k] {
                        let f = &problem.features[cf.feature];
                        let mut e = f.expr.constant + cf.left[o] + cf.right[o1];
                        if cf.has_cross {
                            if !loaded {
                                scratch[r1.clone()].copy_from_slice(&options[k + 1][o1]);
                                loaded = true;
                            }
                            e = f.expr.eval(&scratch);
                        }
                        *slot += f.weight * f.transform.apply(e);
                    }
                }
            }
            chain[k] = Some(table);
        }
        let mut tables = BoundTables {
            local,
            chain,
            ahead: Vec::new(),
            coupled,
            anchored,
            relaxations: Vec::new(),
        };
        tables.ahead = tables.conditioned(&tables.local);
        tables.relaxations = tables.lagrangian(problem);
        tables
    }

    /// `G` tables per option of block 0 (a single table without anchored features).
    fn conditioned(&self, local: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
        if self.anchored.is_empty() {
            return vec![backward(local, &self.chain)];
        }
        (0..local[0].len())
            .map(|o0| {
                let mut l = local.to_vec();
                for t in &self.anchored {
                    for (v, a) in l[t.block].iter_mut().zip(&t.values[o0]) {
                        *v += a;
                    }
                }
                backward(&l, &self.chain)
            })
            .collect()
    }

    /// Index into the conditioned tables for block 0 set to `o0`.
    fn slot(&self, o0: usize) -> usize {
        if self.anchored.is_empty() {
            0
        } else {
            o0
        }
    }

    /// Coupled hinge features that admit a linear upper bound, with their root range
    /// and concavity.
    fn linearizable(&self, problem: &Compiled<'_>) -> Vec<(usize, f64, f64)> {
        self.coupled
            .iter()
            .enumerate()
            .filter(|(_, t)| t.cross.iter().all(Vec::is_empty))
            .filter(|(_, t)| matches!(problem.features[t.feature].transform, Transform::Hinge { .. }))
            .map(|(j, t)| {
                let c = problem.features[t.feature].expr.constant;
                (j, c + t.rest_lo[0], c + t.rest_hi[0])
            })
            .collect()
    }

    /// Linear relaxations of the hinge features, grouped by convex piece.
    ///
    /// A hinge with positive weight is convex: `max(0, w (s - theta))`, the larger of two
    /// lines, so the best completion is the larger of the bounds obtained with either
    /// line. Each group fixes one line per convex hinge (past [`MAX_PIECES`] of them the
    /// chord over the root range is used instead). A hinge with negative weight is
    /// concave and lies below every line through its kink with slope in `[w, 0]`; those
    /// slopes are the multipliers of a Lagrangian relaxation, tuned per group by projected
    /// subgradient descent on the root bound. Each group keeps the tuned multipliers and
    /// the two extreme choices, since deeper nodes often sit on one side of the kink.
    fn lagrangian(&self, problem: &Compiled<'_>) -> Vec<Vec<Relaxation>> {
        let nb = self.local.len();
        let lin = self.linearizable(problem);
        if nb < 2 || lin.is_empty() {
            return Vec::new();
        }
        let hinge = |j: usize| {
            let f = &problem.features[self.coupled[j].feature];
            let Transform::Hinge { threshold } = f.transform else {
                unreachable!("filtered to hinges")
            };
            (f.weight, threshold)
        };
        let convex: Vec<usize> = (0..lin.len()).filter(|&i| hinge(lin[i].0).0 > 0.0).collect();
        let concave: Vec<usize> = (0..lin.len()).filter(|&i| hinge(lin[i].0).0 < 0.0).collect();
        let split = &convex[..convex.len().min(MAX_PIECES)];
        // (slope, intercept) for a given piece mask and concave multipliers.
        let lines = |mask: usize, betas: &[f64]| -> Vec<(usize, f64, f64)> {
            lin.iter()
                .enumerate()
                .map(|(i, &(j, lo, hi))| {
                    let (w, theta) = hinge(j);
                    let (slope, intercept) = if let Some(bit) = split.iter().position(|&c| c == i) {
                        if mask >> bit & 1 == 1 {
                            (w, -w * theta)
                        } else {
                            (0.0, 0.0)
                        }
                    } else if w > 0.0 {
                        if hi <= theta {
                            (0.0, 0.0)
                        } else if lo >= theta {
                            (w, -w * theta)
                        } else {
                            let slope = w * (hi - theta) / (hi - lo);
                            (slope, -slope * lo)
                        }
                    } else {
                        let slope = betas[i] * w;
                        (slope, -slope * theta)
                    };
                    (j, slope, intercept)
                })
                .collect()
        };
        let build = |lines: Vec<(usize, f64, f64)>, conditioned: bool| -> Relaxation {
            let mut local = self.local.clone();
            for &(j, slope, _) in &lines {
                if slope == 0.0 {
                    continue;
                }
                for (b, row) in local.iter_mut().enumerate() {
                    if let Some(contrib) = &self.coupled[j].contrib[b] {
                        for (v, c) in row.iter_mut().zip(contrib) {
                            *v += slope * c;
                        }
                    }
                }
            }
            let ahead = if conditioned {
                self.conditioned(&local)
            } else {
                vec![backward(&local, &self.chain)]
            };
            Relaxation { lines, local, ahead }
        };
        let expr_sum = |j: usize, path: &[usize]| {
            let t = &self.coupled[j];
            problem.features[t.feature].expr.constant
                + path
                    .iter()
                    .enumerate()
                    .filter_map(|(b, &o)| t.contrib[b].as_ref().map(|c| c[o]))
                    .sum::<f64>()
        };
        (0..1usize << split.len())
            .map(|mask| {
                let mut betas = vec![0.5; lin.len()];
                let mut best: Option<(f64, Vec<f64>)> = None;
                for step in 0..LAGRANGE_STEPS {
                    let relax = build(lines(mask, &betas), false);
                    let (value, path) = relax.root(self, problem);
                    if best.as_ref().is_none_or(|(v, _)| value < *v) {
                        best = Some((value, betas.clone()));
                    }
                    let mut moved = false;
                    for &i in &concave {
                        let (j, lo, hi) = lin[i];
                        let (w, theta) = hinge(j);
                        // d(bound)/d(beta) = w (s - theta).
                        let grad = w * (expr_sum(j, &path) - theta);
                        let scale = (hi - lo).max(1e-9) * w.abs();
                        let next = (betas[i] - grad / scale / (1.0 + step as f64)).clamp(0.0, 1.0);
                        moved |= (next - betas[i]).abs() > 1e-6;
                        betas[i] = next;
                    }
                    if !moved {
                        break;
                    }
                }
                let mut group = vec![build(lines(mask, &best.expect("at least one step").1), true)];
                if !concave.is_empty() {
                    for beta in [0.0, 1.0] {
                        group.push(build(lines(mask, &vec![beta; lin.len()]), true));
                    }
                }
                group
            })
            .collect()
    }

    /// Exact score gained by fixing block `b` to `o` after `prev` in block `b - 1`.
    fn gain(&self, b: usize, prev: usize, o: usize) -> f64 {
        let mut g = self.local[b][o];
        if b > 0 {
            if let Some(table) = &self.chain[b - 1] {
                g += table[prev * self.local[b].len() + o];
            }
        }
        g
    }
}

/// Sum of the expression's terms that lie entirely inside a block (constant excluded).
fn block_part(expr: &CExpr, a: &[u16], inside: &impl Fn(usize) -> bool) -> f64 {
    let mut acc = 0.0;
    for (pos, table) in &expr.unary {
        if inside(*pos) {
            acc += table[usize::from(a[*pos])];
        }
    }
    for (coef, lits) in &expr.multi {
        if lits.iter().all(|&(p, _)| inside(p)) && lits.iter().all(|&(p, idx)| a[p] == idx) {
            acc += coef;
        }
    }
    acc
}

struct Search<'p, 'a> {
    problem: &'p Compiled<'a>,
    options: &'p [Arc<[Box<[u16]>]>],
    tables: &'p BoundTables,
    a: Vec<u16>,
    nodes: u64,
    /// Option chosen for block 0 on the current path.
    first: usize,
}

/// A child of a search node with its score so far and bound.
struct Child {
    option: usize,
    acc: f64,
    bound: f64,
    sums: Vec<f64>,
}

impl Search<'_, '_> {
    fn margin(v: f64) -> f64 {
        1e-9 * v.abs().max(1.0)
    }

    /// Interval bound of the coupled features once blocks `< next` are fixed.
    fn coupled_bound(&self, next: usize, sums: &[f64]) -> f64 {
        self.interval_terms(next, sums).iter().sum()
    }

    fn interval_terms(&self, next: usize, sums: &[f64]) -> Vec<f64> {
        self.tables
            .coupled
            .iter()
            .zip(sums)
            .map(|(table, &sum)| {
                let f = &self.problem.features[table.feature];
                let iv = Interval {
                    lo: sum + table.rest_lo[next] + table.cross_lo[next],
                    hi: sum + table.rest_hi[next] + table.cross_hi[next],
                };
                f.transform.max_weighted(f.weight, iv)
            })
            .collect()
    }

    /// Best completion bound of a prefix ending with option `o` of block `b`.
    fn bound(&self, b: usize, o: usize, acc: f64, sums: &[f64]) -> f64 {
        let slot = self.tables.slot(if b == 0 { o } else { self.first });
        if self.tables.relaxations.is_empty() {
            return acc + self.tables.ahead[slot][b][o] + self.coupled_bound(b + 1, sums);
        }
        let terms = self.interval_terms(b + 1, sums);
        let base = acc + terms.iter().sum::<f64>();
        let mut relaxed = f64::NEG_INFINITY;
        for group in &self.tables.relaxations {
            let mut v = f64::INFINITY;
            for relax in group {
                let mut r = base + relax.ahead[slot][b][o];
                for &(j, slope, intercept) in &relax.lines {
                    r += intercept + slope * sums[j] - terms[j];
                }
                v = v.min(r);
            }
            relaxed = relaxed.max(v);
        }
        (base + self.tables.ahead[slot][b][o]).min(relaxed)
    }

    /// Coupled-expression partial sums after fixing block `b` to option `o`.
    fn advance(&self, b: usize, o: usize, sums: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(sums.len());
        for (table, &sum) in self.tables.coupled.iter().zip(sums) {
            let mut s = sum;
            if let Some(contrib) = &table.contrib[b] {
                s += contrib[o];
            }
            for (coef, lits) in &table.cross[b] {
                if lits.iter().all(|&(p, idx)| self.a[p] == idx) {
                    s += coef;
                }
            }
            out.push(s);
        }
        out
    }

    fn initial_sums(&self) -> Vec<f64> {
        self.tables
            .coupled
            .iter()
            .map(|t| self.problem.features[t.feature].expr.constant)
            .collect()
    }

    /// Feasible children of a node at block `b`, in option order.
    fn children(&mut self, b: usize, prev: usize, acc: f64, sums: &[f64]) -> Vec<Child> {
        let problem = self.problem;
        let range = problem.blocks[b].clone();
        let mut out = Vec::new();
        for o in 0..self.options[b].len() {
            self.nodes += 1;
            self.a[range.clone()].copy_from_slice(&self.options[b][o]);
            if !problem.cross_ok(&range, &self.a) {
                continue;
            }
            let mut acc = acc + self.tables.gain(b, prev, o);
            for t in self.tables.anchored.iter().filter(|t| t.block == b) {
                acc += problem.features[t.feature].value(&self.a);
            }
            let sums = self.advance(b, o, sums);
            let bound = self.bound(b, o, acc, &sums);
            out.push(Child {
                option: o,
                acc,
                bound,
                sums,
            });
        }
        out
    }

    fn maximize(&mut self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let sums = self.initial_sums();
        if self.problem.blocks.is_empty() {
            return self.problem.score(&self.a);
        }
        self.max_rec(0, 0, 0.0, &sums, &mut best);
        best
    }

    fn max_rec(&mut self, b: usize, prev: usize, acc: f64, sums: &[f64], best: &mut f64) {
        let mut kids = self.children(b, prev, acc, sums);
        kids.sort_by(|x, y| y.bound.total_cmp(&x.bound).then(x.option.cmp(&y.option)));
        let range = self.problem.blocks[b].clone();
        let last = b + 1 == self.problem.blocks.len();
        for kid in kids {
            // Only a strictly better leaf matters here; ties are settled by the lex pass.
            if kid.bound <= *best + 1e-3 * Self::margin(*best) {
                break;
            }
            self.a[range.clone()].copy_from_slice(&self.options[b][kid.option]);
            if b == 0 {
                self.first = kid.option;
            }
            if last {
                *best = best.max(self.problem.score(&self.a));
            } else {
                self.max_rec(b + 1, kid.option, kid.acc, &kid.sums, best);
            }
        }
    }

    fn first_at_least(&mut self, threshold: f64) -> Option<Vec<u16>> {
        if self.problem.blocks.is_empty() {
            return (self.problem.score(&self.a) >= threshold).then(|| self.a.clone());
        }
        let sums = self.initial_sums();
        self.first_rec(0, 0, 0.0, &sums, threshold).then(|| self.a.clone())
    }

    fn first_rec(&mut self, b: usize, prev: usize, acc: f64, sums: &[f64], threshold: f64) -> bool {
        let kids = self.children(b, prev, acc, sums);
        let range = self.problem.blocks[b].clone();
        let last = b + 1 == self.problem.blocks.len();
        for kid in kids {
            if kid.bound < threshold - Self::margin(threshold) {
                continue;
            }
            self.a[range.clone()].copy_from_slice(&self.options[b][kid.option]);
            if b == 0 {
                self.first = kid.option;
            }
            let found = if last {
                self.problem.score(&self.a) >= threshold
            } else {
                self.first_rec(b + 1, kid.option, kid.acc, &kid.sums, threshold)
            };
            if found {
                return true;
            }
        }
        false
    }
}
