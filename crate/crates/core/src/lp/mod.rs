//! Linear programming: problem representation, a dense bounded-variable
//! primal simplex, the minimax regression builders and a least-squares solver.

mod chebyshev;
mod lstsq;
mod mps;
mod simplex;

pub use chebyshev::{
    build_chebyshev_lp, build_fixed_support_lp, solve_chebyshev, solve_fixed_support, ChebyshevFit,
};
pub(crate) use chebyshev::solve_with_allowances;
pub use lstsq::solve_least_squares;
pub use mps::write_mps;
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility tolerance for an optimal solution.
pub const FEAS_TOL: f64 = 1e-8;
/// Reduced-cost tolerance for declaring optimality.
pub const OPT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

/// `min c'x` subject to sparse rows `a_i'x (<=|=|>=) b_i` and `l <= x <= u`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `(row, col, coeff)` triplets; duplicates are summed.
    pub entries: Vec<(usize, usize, f64)>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_variable(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let row = self.rhs.len();
        self.entries
            .extend(coeffs.iter().filter(|(_, a)| *a != 0.0).map(|&(c, a)| (row, c, a)));
        self.senses.push(sense);
        self.rhs.push(rhs);
        row
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::MalformedLp("bound vectors do not match the variable count".into()));
        }
        if self.senses.len() != self.rhs.len() {
            return Err(Error::MalformedLp("every row needs a sense and a right-hand side".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::MalformedLp(format!("variable {j} has bounds [{l}, {u}]")));
            }
            if !self.objective[j].is_finite() {
                return Err(Error::MalformedLp(format!("variable {j} has a non-finite cost")));
            }
        }
        for &(r, c, a) in &self.entries {
            if r >= self.num_rows() || c >= n {
                return Err(Error::MalformedLp(format!("entry ({r}, {c}) out of range")));
            }
            if !a.is_finite() {
                return Err(Error::MalformedLp(format!("entry ({r}, {c}) is not finite")));
            }
        }
        if let Some(i) = self.rhs.iter().position(|b| !b.is_finite()) {
            return Err(Error::MalformedLp(format!("row {i} has a non-finite right-hand side")));
        }
        Ok(())
    }

    /// `a_i'x` for every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for &(r, c, a) in &self.entries {
            act[r] += a * x[c];
        }
        act
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let act = self.row_activity(x);
        let rows = act.iter().zip(&self.senses).zip(&self.rhs).map(|((&v, s), &b)| match s {
            Sense::Le => v - b,
            Sense::Ge => b - v,
            Sense::Eq => (v - b).abs(),
        });
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Sensitivity of the optimal objective to each right-hand side.
    /// Empty unless the status is optimal.
    pub duals: Vec<f64>,
}

impl LpSolution {
    /// Turns a non-optimal status into an error.
    pub fn into_optimal(self) -> Result<LpSolution> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            other => Err(Error::LpStatus(other.as_str())),
        }
    }
}
