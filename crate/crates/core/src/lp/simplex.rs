//! Dense-tableau primal simplex with bounded variables.
//!
//! Every variable is shifted, reflected or split so that it lives in
//! `[0, u]` with `u` possibly infinite. Slack columns turn rows into
//! equalities and rows are negated to make right-hand sides non-negative.
//! Rows whose slack cannot start basic get an artificial column, which
//! phase one drives to zero and phase two then pins at zero.
//!
//! Pricing is Dantzig's rule with lowest-index tie-breaking. After a streak
//! of degenerate pivots the solver switches to Bland's rule until progress
//! resumes, which rules out cycling.

use super::{LpProblem, LpSolution, LpStatus, Sense, FEAS_TOL, OPT_TOL};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const TINY_PIVOT: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-12;
const SMALL_PIVOT_LIMIT: usize = 20;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Defaults to a bound proportional to the tableau size.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_streak: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iterations: None, degenerate_streak: 30 }
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(p, &SimplexOptions::default())
}

#[derive(Clone, Copy)]
enum ColMap {
    Shift { col: usize, lo: f64 },
    Reflect { col: usize, hi: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    ncols: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    /// Position in `basis`, or `usize::MAX` when nonbasic.
    slot: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    degenerate_streak: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

pub fn solve_lp_with(p: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    p.validate()?;
    let m = p.num_rows();

    // Column layout: structural (after standardization), slacks, artificials.
    let mut maps = Vec::with_capacity(p.num_vars());
    let mut upper = Vec::new();
    let mut cost = Vec::new();
    for j in 0..p.num_vars() {
        let (l, u, c) = (p.lower[j], p.upper[j], p.objective[j]);
        if l.is_finite() {
            maps.push(ColMap::Shift { col: upper.len(), lo: l });
            upper.push(u - l);
            cost.push(c);
        } else if u.is_finite() {
            maps.push(ColMap::Reflect { col: upper.len(), hi: u });
            upper.push(f64::INFINITY);
            cost.push(-c);
        } else {
            maps.push(ColMap::Split { pos: upper.len(), neg: upper.len() + 1 });
            upper.extend([f64::INFINITY, f64::INFINITY]);
            cost.extend([c, -c]);
        }
    }
    let n_struct = upper.len();

    // Structural rows in sparse form, with bound shifts folded into the rhs.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut rhs = p.rhs.clone();
    for &(r, c, a) in &p.entries {
        match maps[c] {
            ColMap::Shift { col, lo } => {
                rows[r].push((col, a));
                rhs[r] -= a * lo;
            }
            ColMap::Reflect { col, hi } => {
                rows[r].push((col, -a));
                rhs[r] -= a * hi;
            }
            ColMap::Split { pos, neg } => {
                rows[r].push((pos, a));
                rows[r].push((neg, -a));
            }
        }
    }

    let mut negated = vec![false; m];
    let mut slack_sign = vec![0.0; m];
    for i in 0..m {
        slack_sign[i] = match p.senses[i] {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => 0.0,
        };
        negated[i] = rhs[i] < 0.0 || (rhs[i] == 0.0 && p.senses[i] == Sense::Ge);
    }
    let mut col = n_struct;
    let mut slack_col = vec![usize::MAX; m];
    for i in 0..m {
        if slack_sign[i] != 0.0 {
            slack_col[i] = col;
            col += 1;
        }
    }
    let n_slack = col - n_struct;
    upper.extend(std::iter::repeat_n(f64::INFINITY, n_slack));
    let mut init_col = vec![usize::MAX; m];
    let mut artificials = Vec::new();
    for i in 0..m {
        let sign = if negated[i] { -slack_sign[i] } else { slack_sign[i] };
        if sign > 0.0 {
            init_col[i] = slack_col[i];
        } else {
            init_col[i] = col;
            artificials.push(col);
            upper.push(f64::INFINITY);
            col += 1;
        }
    }
    let ncols = col;

    // Transformed rows (kept sparse for the final refinement step).
    let mut a_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for i in 0..m {
        let s = if negated[i] { -1.0 } else { 1.0 };
        let mut row: Vec<(usize, f64)> = rows[i].iter().map(|&(c, a)| (c, s * a)).collect();
        if slack_col[i] != usize::MAX {
            row.push((slack_col[i], s * slack_sign[i]));
        }
        if init_col[i] != slack_col[i] {
            row.push((init_col[i], 1.0));
        }
        if negated[i] {
            rhs[i] = -rhs[i];
        }
        a_rows.push(row);
    }

    let mut t = vec![0.0; m * ncols];
    for (i, row) in a_rows.iter().enumerate() {
        for &(c, a) in row {
            t[i * ncols + c] += a;
        }
    }
    let mut slot = vec![usize::MAX; ncols];
    for (i, &c) in init_col.iter().enumerate() {
        slot[c] = i;
    }
    let max_iterations = opts.max_iterations.unwrap_or(10_000 + 50 * (m + ncols));
    let mut tab = Tableau {
        m,
        ncols,
        t,
        beta: rhs.clone(),
        basis: init_col.clone(),
        slot,
        upper,
        at_upper: vec![false; ncols],
        d: vec![0.0; ncols],
        iterations: 0,
        max_iterations,
        degenerate_streak: opts.degenerate_streak,
    };

    let scale = 1.0 + rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
    if !artificials.is_empty() {
        let mut c1 = vec![0.0; ncols];
        for &a in &artificials {
            c1[a] = 1.0;
        }
        tab.price(&c1);
        match tab.run()? {
            Outcome::Optimal => {}
            Outcome::Unbounded => unreachable!("phase one is bounded below by zero"),
        }
        let infeas: f64 = artificials
            .iter()
            .map(|&a| match tab.slot[a] {
                usize::MAX => 0.0,
                r => tab.beta[r].max(0.0),
            })
            .sum();
        if infeas > FEAS_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; p.num_vars()],
                objective: f64::NAN,
                iterations: tab.iterations,
                duals: Vec::new(),
            });
        }
        for &a in &artificials {
            tab.upper[a] = 0.0;
            tab.at_upper[a] = false;
        }
    }

    let mut c2 = vec![0.0; ncols];
    c2[..n_struct].copy_from_slice(&cost);
    tab.price(&c2);
    if let Outcome::Unbounded = tab.run()? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; p.num_vars()],
            objective: f64::NEG_INFINITY,
            iterations: tab.iterations,
            duals: Vec::new(),
        });
    }

    let mut xs = tab.values();
    tab.refine(&a_rows, &rhs, &init_col, &mut xs);

    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            ColMap::Shift { col, lo } => lo + xs[col],
            ColMap::Reflect { col, hi } => hi - xs[col],
            ColMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect();
    let duals = (0..m)
        .map(|i| {
            let y = -tab.d[init_col[i]];
            if negated[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    let viol = p.max_violation(&x);
    if viol > 1e-6 * scale {
        return Err(Error::NumericBreakdown { threshold: TINY_PIVOT });
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: p.objective_value(&x),
        x,
        iterations: tab.iterations,
        duals,
    })
}

impl Tableau {
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.ncols..(i + 1) * self.ncols]
    }

    fn price(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (dj, &a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.ncols)
            .map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 })
            .collect();
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.beta[i];
        }
        x
    }

    /// One step of iterative refinement on the basic values: `x_B += B^-1 r`.
    /// The inverse basis sits in the columns of the initial identity basis.
    fn refine(&self, a_rows: &[Vec<(usize, f64)>], rhs: &[f64], init_col: &[usize], x: &mut [f64]) {
        let resid: Vec<f64> = a_rows
            .iter()
            .zip(rhs)
            .map(|(row, &b)| b - row.iter().map(|&(c, a)| a * x[c]).sum::<f64>())
            .collect();
        for i in 0..self.m {
            let row = self.row(i);
            let delta: f64 = init_col.iter().zip(&resid).map(|(&c, &r)| row[c] * r).sum();
            x[self.basis[i]] += delta;
        }
    }

    fn entering(&self, bland: bool, rejected: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.slot[j] != usize::MAX || self.upper[j] <= 0.0 || rejected.contains(&j) {
                continue;
            }
            let dj = self.d[j];
            let (dir, score) = if !self.at_upper[j] && dj < -OPT_TOL {
                (1.0, -dj)
            } else if self.at_upper[j] && dj > OPT_TOL {
                (-1.0, dj)
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self) -> Result<Outcome> {
        let mut degenerate = 0usize;
        let mut small_pivots = 0usize;
        let mut rejected: Vec<usize> = Vec::new();
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::IterationLimit(self.max_iterations));
            }
            let bland = degenerate >= self.degenerate_streak;
            let Some((j, dir)) = self.entering(bland, &rejected) else {
                if rejected.is_empty() {
                    return Ok(Outcome::Optimal);
                }
                return Err(Error::NumericBreakdown { threshold: TINY_PIVOT });
            };

            // Ratio test. `None` as the leaving row means a bound flip.
            let mut step = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            let mut tiny_block = false;
            for i in 0..self.m {
                let a = dir * self.t[i * self.ncols + j];
                let b = self.basis[i];
                let (lim, to_upper) = if a > PIVOT_TOL {
                    (self.beta[i].max(0.0) / a, false)
                } else if a < -PIVOT_TOL && self.upper[b].is_finite() {
                    ((self.upper[b] - self.beta[i]).max(0.0) / -a, true)
                } else {
                    if a.abs() > TINY_PIVOT && (a > 0.0 || self.upper[b].is_finite()) {
                        tiny_block = true;
                    }
                    continue;
                };
                let better = match leave {
                    _ if lim < step - RATIO_TIE => true,
                    None => false,
                    Some((r, _)) if lim <= step + RATIO_TIE => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            a.abs() > leave_mag
                        }
                    }
                    _ => false,
                };
                if better {
                    step = lim.min(step);
                    leave = Some((i, to_upper));
                    leave_mag = a.abs();
                }
            }

            if step.is_infinite() {
                if tiny_block {
                    small_pivots += 1;
                    if small_pivots > SMALL_PIVOT_LIMIT {
                        return Err(Error::NumericBreakdown { threshold: TINY_PIVOT });
                    }
                    rejected.push(j);
                    continue;
                }
                return Ok(Outcome::Unbounded);
            }
            small_pivots = 0;
            rejected.clear();
            self.iterations += 1;

            if step > 0.0 {
                for i in 0..self.m {
                    let a = self.t[i * self.ncols + j];
                    if a != 0.0 {
                        self.beta[i] -= dir * a * step;
                    }
                }
            }
            if step <= RATIO_TIE {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some((r, to_upper)) => {
                    let entering_value =
                        if dir > 0.0 { step } else { self.upper[j] - step };
                    let out = self.basis[r];
                    self.at_upper[out] = to_upper;
                    self.slot[out] = usize::MAX;
                    self.beta[r] = entering_value;
                    self.pivot(r, j);
                    self.basis[r] = j;
                    self.slot[j] = r;
                    self.at_upper[j] = false;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.t[r * nc + j];
        let inv = 1.0 / p;
        let mut nz: Vec<usize> = Vec::new();
        for c in 0..nc {
            let v = &mut self.t[r * nc + c];
            if *v != 0.0 {
                *v *= inv;
                nz.push(c);
            }
        }
        self.t[r * nc + j] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        let prow: &[f64] = prow;
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for &c in &nz {
                    row[c] -= f * prow[c];
                }
                row[j] = 0.0;
            }
        };
        before.chunks_exact_mut(nc).for_each(eliminate);
        after.chunks_exact_mut(nc).for_each(eliminate);
        let f = self.d[j];
        if f != 0.0 {
            for &c in &nz {
                self.d[c] -= f * prow[c];
            }
            self.d[j] = 0.0;
        }
    }
}
