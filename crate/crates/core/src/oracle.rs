//! Exact solution of the sparse minimax mixed-integer model at desk scale.
//!
//! Supports (monomial subsets of size `l_m`) are enumerated in lexicographic
//! order. For each support a depth-first search decides the rows in index
//! order, trying "exclude" before "keep", so exclusion sets are met in
//! lexicographic order. Internal nodes are bounded by the minimax LP over
//! the rows already decided; rows not yet decided are simply dropped, which
//! can only lower the optimum.
//!
//! Supports are searched independently (in parallel when enabled) and the
//! results reduced deterministically: smallest `gamma`, then the
//! lexicographically smallest `(support, anomalies)` pair among values within
//! [`TIE_TOL`] of it.

use std::sync::atomic::{AtomicU64, Ordering};

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::solve_with_allowances;
use crate::par::Execution;

/// Values closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-9;
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;
pub const DEFAULT_BIG_M: f64 = 1e3;
/// [`Strategy::Auto`] enumerates exhaustively up to this many binaries.
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct MilpInstance {
    pub design: DMatrix<f64>,
    pub y: Vec<f64>,
    pub l_m: usize,
    pub l_b: usize,
    pub big_m: f64,
}

impl MilpInstance {
    pub fn new(design: DMatrix<f64>, y: Vec<f64>, l_m: usize, l_b: usize, big_m: f64) -> Result<Self> {
        let inst = MilpInstance { design, y, l_m, l_b, big_m };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.design.nrows() != self.y.len() {
            return Err(Error::DimensionMismatch { expected: self.design.nrows(), found: self.y.len() });
        }
        if self.l_m < 1 || self.l_m > self.m_d() {
            return Err(Error::InvalidInstance(format!(
                "l_m = {} must lie in [1, {}]",
                self.l_m,
                self.m_d()
            )));
        }
        if self.l_b < 1 || self.l_b > self.n_points() {
            return Err(Error::InvalidInstance(format!(
                "l_b = {} must lie in [1, {}]",
                self.l_b,
                self.n_points()
            )));
        }
        if !(self.big_m > 0.0 && self.big_m.is_finite()) {
            return Err(Error::InvalidInstance("big-M must be positive and finite".into()));
        }
        if self.y.iter().chain(self.design.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite value in the instance".into()));
        }
        Ok(())
    }

    pub fn m_d(&self) -> usize {
        self.design.ncols()
    }

    pub fn n_points(&self) -> usize {
        self.y.len()
    }

    pub fn excluded_count(&self) -> usize {
        self.n_points() - self.l_b
    }

    /// Inner LP value and coefficients for a fixed support and kept mask.
    pub fn evaluate(&self, support: &[usize], kept: &[bool]) -> Result<(f64, Vec<f64>)> {
        let rows: Vec<(usize, f64)> = (0..self.n_points())
            .map(|k| (k, if kept[k] { 0.0 } else { self.big_m }))
            .collect();
        let fit = solve_with_allowances(&self.design, &self.y, support, &rows, self.big_m)?;
        Ok((fit.gamma, fit.coefficients))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    /// Monomial selection, one flag per basis column.
    pub s: Vec<bool>,
    /// Kept-point flags, one per data row.
    pub b: Vec<bool>,
    /// Coefficients over the full basis (zero off the support).
    pub c: Vec<f64>,
    pub gamma: f64,
    pub nodes: u64,
}

impl MilpSolution {
    pub fn support(&self) -> Vec<usize> {
        flags_to_indices(&self.s, true)
    }

    pub fn anomalies(&self) -> Vec<usize> {
        flags_to_indices(&self.b, false)
    }

    pub fn kept(&self) -> Vec<usize> {
        flags_to_indices(&self.b, true)
    }
}

fn flags_to_indices(flags: &[bool], want: bool) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f == want).map(|(i, _)| i).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Exhaustive when `m_d + N <= 20`, branch-and-bound otherwise.
    #[default]
    Auto,
    Exhaustive,
    BranchAndBound,
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub budget: u64,
    pub strategy: Strategy,
    pub execution: Execution,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            budget: DEFAULT_NODE_BUDGET,
            strategy: Strategy::Auto,
            execution: Execution::Parallel,
        }
    }
}

pub fn solve_milp_exact(inst: &MilpInstance, budget: u64) -> Result<MilpSolution> {
    solve_milp_with(inst, &OracleOptions { budget, ..Default::default() })
}

struct Found {
    gamma: f64,
    excluded: Vec<usize>,
    coefficients: Vec<f64>,
}

struct SupportOutcome {
    best: Option<Found>,
    /// Smallest bound among nodes left open when the budget ran out.
    open_bound: Option<f64>,
}

struct Search<'a> {
    inst: &'a MilpInstance,
    support: &'a [usize],
    bounded: bool,
    nodes: &'a AtomicU64,
    budget: u64,
    /// Bits of the best gamma found by any worker; gammas are non-negative,
    /// so integer order on the bits matches float order.
    global: &'a AtomicU64,
}

impl Search<'_> {
    fn tick(&self) -> bool {
        self.nodes.fetch_add(1, Ordering::Relaxed) < self.budget
    }

    fn global_best(&self) -> f64 {
        f64::from_bits(self.global.load(Ordering::Relaxed))
    }

    fn bound(&self, kept: &[bool], decided: usize) -> Result<f64> {
        let rows: Vec<(usize, f64)> = (0..decided)
            .map(|k| (k, if kept[k] { 0.0 } else { self.inst.big_m }))
            .collect();
        if !rows.iter().any(|r| r.1 == 0.0) {
            return Ok(0.0);
        }
        let fit = solve_with_allowances(&self.inst.design, &self.inst.y, self.support, &rows, self.inst.big_m)?;
        Ok(fit.gamma)
    }

    fn prunable(&self, bound: f64, out: &SupportOutcome) -> bool {
        if !self.bounded {
            return false;
        }
        if let Some(best) = &out.best {
            if bound >= best.gamma - TIE_TOL {
                return true;
            }
        }
        bound > self.global_best() + TIE_TOL
    }

    fn leaf(&self, kept: &[bool], out: &mut SupportOutcome) -> Result<()> {
        let (gamma, coefficients) = self.inst.evaluate(self.support, kept)?;
        let better = out.best.as_ref().is_none_or(|b| gamma < b.gamma - TIE_TOL);
        if better {
            self.global.fetch_min(gamma.to_bits(), Ordering::Relaxed);
            out.best = Some(Found { gamma, excluded: flags_to_indices(kept, false), coefficients });
        }
        Ok(())
    }

    /// Returns `false` once the budget is exhausted.
    fn dfs(
        &self,
        k: usize,
        kept: &mut Vec<bool>,
        need: usize,
        bound: f64,
        out: &mut SupportOutcome,
    ) -> Result<bool> {
        let n = kept.len();
        if need == 0 || need == n - k {
            let fill = need == 0;
            for flag in &mut kept[k..] {
                *flag = fill;
            }
            if !self.tick() {
                note_open(out, bound);
                return Ok(false);
            }
            self.leaf(kept, out)?;
            for flag in &mut kept[k..] {
                *flag = true;
            }
            return Ok(true);
        }

        // Exclude row k. The parent bound stays valid since the child only
        // adds a big-M row to the restricted problem.
        kept[k] = false;
        if !self.prunable(bound, out) && !self.dfs(k + 1, kept, need - 1, bound, out)? {
            kept[k] = true;
            return Ok(false);
        }
        kept[k] = true;

        // Keep row k.
        let child = if self.bounded {
            if !self.tick() {
                note_open(out, bound);
                return Ok(false);
            }
            self.bound(kept, k + 1)?.max(bound)
        } else {
            bound
        };
        if self.prunable(child, out) {
            return Ok(true);
        }
        self.dfs(k + 1, kept, need, child, out)
    }
}

fn note_open(out: &mut SupportOutcome, bound: f64) {
    out.open_bound = Some(out.open_bound.map_or(bound, |b| b.min(bound)));
}

pub fn solve_milp_with(inst: &MilpInstance, opts: &OracleOptions) -> Result<MilpSolution> {
    inst.validate()?;
    let (m_d, n) = (inst.m_d(), inst.n_points());
    let bounded = match opts.strategy {
        Strategy::Exhaustive => false,
        Strategy::BranchAndBound => true,
        Strategy::Auto => m_d + n > EXHAUSTIVE_LIMIT,
    };
    let support_count = binomial(m_d, inst.l_m);
    if support_count > opts.budget as u128 {
        return Err(Error::BudgetExceeded {
            budget: opts.budget,
            nodes: 0,
            incumbent: None,
            lower_bound: 0.0,
        });
    }
    let supports: Vec<Vec<usize>> = (0..m_d).combinations(inst.l_m).collect();
    let nodes = AtomicU64::new(0);
    let global = AtomicU64::new(f64::INFINITY.to_bits());

    let outcomes: Vec<Result<SupportOutcome>> = opts.execution.map(&supports, |support| {
        let search = Search {
            inst,
            support,
            bounded,
            nodes: &nodes,
            budget: opts.budget,
            global: &global,
        };
        let mut out = SupportOutcome { best: None, open_bound: None };
        let mut kept = vec![true; n];
        search.dfs(0, &mut kept, inst.excluded_count(), 0.0, &mut out)?;
        Ok(out)
    });

    let mut winner: Option<(usize, Found)> = None;
    let mut open: Option<f64> = None;
    let mut results = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        results.push(o?);
    }
    let best_gamma = results
        .iter()
        .filter_map(|r| r.best.as_ref().map(|f| f.gamma))
        .fold(f64::INFINITY, f64::min);
    for (i, r) in results.into_iter().enumerate() {
        if let Some(b) = r.open_bound {
            open = Some(open.map_or(b, |o: f64| o.min(b)));
        }
        if let Some(found) = r.best {
            if winner.is_none() && found.gamma <= best_gamma + TIE_TOL {
                winner = Some((i, found));
            }
        }
    }

    let node_count = nodes.load(Ordering::Relaxed).min(opts.budget);
    let solution = winner.map(|(i, found)| {
        let support = &supports[i];
        let mut s = vec![false; m_d];
        let mut c = vec![0.0; m_d];
        for (&j, &cj) in support.iter().zip(&found.coefficients) {
            s[j] = true;
            c[j] = cj;
        }
        let mut b = vec![true; n];
        for &k in &found.excluded {
            b[k] = false;
        }
        MilpSolution { s, b, c, gamma: found.gamma, nodes: node_count }
    });

    if let Some(open_bound) = open {
        let lower_bound = solution.as_ref().map_or(open_bound, |s| s.gamma.min(open_bound));
        return Err(Error::BudgetExceeded {
            budget: opts.budget,
            nodes: node_count,
            incumbent: solution.map(Box::new),
            lower_bound,
        });
    }
    solution.ok_or_else(|| Error::InvalidInstance("no feasible support".into()))
}

/// `binomial(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = match acc.checked_mul(n as u128 + 1 - i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// The anomalous subset of a fixed model support: the `subset_size` rows
/// whose removal minimizes the minimax error of the remaining rows.
/// Ties go to the lexicographically smallest index set.
pub fn anomalous_subset_oracle(
    design: &DMatrix<f64>,
    y: &[f64],
    support: &[usize],
    subset_size: usize,
    budget: u64,
) -> Result<Vec<usize>> {
    let n = y.len();
    if design.nrows() != n {
        return Err(Error::DimensionMismatch { expected: design.nrows(), found: n });
    }
    if subset_size >= n {
        return Err(Error::InvalidInstance(format!(
            "subset size {subset_size} must be smaller than N = {n}"
        )));
    }
    if support.iter().any(|&j| j >= design.ncols()) {
        return Err(Error::InvalidInstance("support index outside the design".into()));
    }
    let total = binomial(n, subset_size);
    if total > budget as u128 {
        return Err(Error::BudgetExceeded { budget, nodes: 0, incumbent: None, lower_bound: 0.0 });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in (0..n).combinations(subset_size) {
        let mut rows = Vec::with_capacity(n - subset_size);
        let mut it = subset.iter().peekable();
        for k in 0..n {
            if it.peek() == Some(&&k) {
                it.next();
            } else {
                rows.push((k, 0.0));
            }
        }
        let gamma = solve_with_allowances(design, y, support, &rows, f64::INFINITY)?.gamma;
        if best.as_ref().is_none_or(|(g, _)| gamma < g - TIE_TOL) {
            best = Some((gamma, subset));
        }
    }
    Ok(best.map(|b| b.1).unwrap_or_default())
}
