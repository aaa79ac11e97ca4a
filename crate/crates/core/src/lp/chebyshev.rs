//! Minimax (Chebyshev) regression LPs.
//!
//! [`build_chebyshev_lp`] is the plain form: minimize `gamma` subject to
//! `|y_k - a_k . c| <= gamma` on the kept rows. [`build_fixed_support_lp`]
//! is the inner problem of the mixed-integer model for a fixed support and
//! kept set: excluded rows stay in the model with a big-M allowance and the
//! coefficients are boxed by the same constant.
//!
//! Both are solved through their dual by default. The dual has one equality
//! row per coefficient instead of two rows per data point, which is far
//! smaller for tall design matrices. The coefficients are read off the
//! dual's row sensitivities and then verified against the primal objective;
//! any disagreement falls back to the primal LP.

use nalgebra::DMatrix;

use super::{solve_lp, LpProblem, Sense};
use crate::error::{Error, Result};

const INF: f64 = f64::INFINITY;
const DUAL_AGREEMENT: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevFit {
    pub coefficients: Vec<f64>,
    pub gamma: f64,
}

fn check_shapes(design: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if design.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: design.nrows(), found: y.len() });
    }
    Ok(())
}

/// Variables `c_0..c_{m-1}` (free) followed by `gamma >= 0`; two rows per
/// kept point.
pub fn build_chebyshev_lp(design: &DMatrix<f64>, y: &[f64], keep: &[usize]) -> Result<LpProblem> {
    check_shapes(design, y)?;
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let m = design.ncols();
    let mut p = LpProblem::new();
    for _ in 0..m {
        p.add_variable(0.0, -INF, INF);
    }
    let g = p.add_variable(1.0, 0.0, INF);
    for &k in keep {
        if k >= y.len() {
            return Err(Error::InvalidInstance(format!("kept row {k} out of range")));
        }
        let mut row: Vec<(usize, f64)> = (0..m).map(|j| (j, design[(k, j)])).collect();
        row.push((g, -1.0));
        p.add_constraint(&row, Sense::Le, y[k]);
        for e in row.iter_mut().take(m) {
            e.1 = -e.1;
        }
        p.add_constraint(&row, Sense::Le, -y[k]);
    }
    Ok(p)
}

/// The mixed-integer inner LP for a fixed support (`columns`) and kept mask.
/// Excluded rows satisfy `|r_k| <= gamma + big_m`; coefficients satisfy
/// `|c_j| <= big_m`. Variables are the selected coefficients then `gamma`.
pub fn build_fixed_support_lp(
    design: &DMatrix<f64>,
    y: &[f64],
    columns: &[usize],
    kept: &[bool],
    big_m: f64,
) -> Result<LpProblem> {
    check_shapes(design, y)?;
    check_mask(kept, y.len())?;
    let rows: Vec<(usize, f64)> =
        (0..y.len()).map(|k| (k, if kept[k] { 0.0 } else { big_m })).collect();
    Ok(allowance_lp(design, y, columns, &rows, big_m))
}

/// `min gamma` s.t. `|y_k - a_k . c| <= gamma + h_k` for each `(k, h_k)` and
/// `|c_j| <= bound` (which may be infinite).
fn allowance_lp(
    design: &DMatrix<f64>,
    y: &[f64],
    columns: &[usize],
    rows: &[(usize, f64)],
    bound: f64,
) -> LpProblem {
    let mut p = LpProblem::new();
    for _ in columns {
        p.add_variable(0.0, -bound, bound);
    }
    let g = p.add_variable(1.0, 0.0, INF);
    for &(k, h) in rows {
        let mut row: Vec<(usize, f64)> =
            columns.iter().enumerate().map(|(i, &j)| (i, design[(k, j)])).collect();
        row.push((g, -1.0));
        p.add_constraint(&row, Sense::Le, y[k] + h);
        for e in row.iter_mut().take(columns.len()) {
            e.1 = -e.1;
        }
        p.add_constraint(&row, Sense::Le, -y[k] + h);
    }
    p
}

fn check_mask(kept: &[bool], n: usize) -> Result<()> {
    if kept.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: kept.len() });
    }
    if !kept.iter().any(|&k| k) {
        return Err(Error::EmptyKeepSet);
    }
    Ok(())
}

/// Solves the plain minimax LP over the kept rows, using all columns.
pub fn solve_chebyshev(design: &DMatrix<f64>, y: &[f64], keep: &[usize]) -> Result<ChebyshevFit> {
    check_shapes(design, y)?;
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    if let Some(&k) = keep.iter().find(|&&k| k >= y.len()) {
        return Err(Error::InvalidInstance(format!("kept row {k} out of range")));
    }
    let columns: Vec<usize> = (0..design.ncols()).collect();
    let rows: Vec<(usize, f64)> = keep.iter().map(|&k| (k, 0.0)).collect();
    if let Some(fit) = dual_route(design, y, &columns, &rows, INF)? {
        return Ok(fit);
    }
    let sol = solve_lp(&build_chebyshev_lp(design, y, keep)?)?.into_optimal()?;
    let m = design.ncols();
    Ok(ChebyshevFit { coefficients: sol.x[..m].to_vec(), gamma: sol.x[m].max(0.0) })
}

/// Solves the fixed-support inner LP. With `big_m = None` excluded rows are
/// dropped and the coefficients are free.
pub fn solve_fixed_support(
    design: &DMatrix<f64>,
    y: &[f64],
    columns: &[usize],
    kept: &[bool],
    big_m: Option<f64>,
) -> Result<ChebyshevFit> {
    check_shapes(design, y)?;
    check_mask(kept, y.len())?;
    if let Some(&j) = columns.iter().find(|&&j| j >= design.ncols()) {
        return Err(Error::InvalidInstance(format!("column {j} out of range")));
    }
    let (rows, bound): (Vec<(usize, f64)>, f64) = match big_m {
        Some(mv) => {
            if !(mv > 0.0) {
                return Err(Error::InvalidInstance("big-M must be positive".into()));
            }
            ((0..y.len()).map(|k| (k, if kept[k] { 0.0 } else { mv })).collect(), mv)
        }
        None => ((0..y.len()).filter(|&k| kept[k]).map(|k| (k, 0.0)).collect(), INF),
    };
    solve_with_allowances(design, y, columns, &rows, bound)
}

/// Minimax fit over an explicit row list, each row with its own allowance
/// `h_k`, and coefficients boxed by `bound` (possibly infinite).
pub(crate) fn solve_with_allowances(
    design: &DMatrix<f64>,
    y: &[f64],
    columns: &[usize],
    rows: &[(usize, f64)],
    bound: f64,
) -> Result<ChebyshevFit> {
    if rows.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    if let Some(fit) = dual_route(design, y, columns, rows, bound)? {
        return Ok(fit);
    }
    let sol = solve_lp(&allowance_lp(design, y, columns, rows, bound))?.into_optimal()?;
    let m = columns.len();
    Ok(ChebyshevFit { coefficients: sol.x[..m].to_vec(), gamma: sol.x[m].max(0.0) })
}

/// `max(0, max_k |y_k - a_k . c| - h_k)` over the listed rows.
fn attained_gamma(design: &DMatrix<f64>, y: &[f64], columns: &[usize], rows: &[(usize, f64)], c: &[f64]) -> f64 {
    rows.iter()
        .map(|&(k, h)| {
            let fit: f64 = columns.iter().zip(c).map(|(&j, &cj)| design[(k, j)] * cj).sum();
            (y[k] - fit).abs() - h
        })
        .fold(0.0, f64::max)
}

/// Dual of `min gamma s.t. |y_k - a_k . c| <= gamma + h_k, |c_j| <= bound`:
///
/// `max sum u_k (y_k - h_k) - w_k (y_k + h_k) - bound * sum (p_j + q_j)`
/// subject to `sum_k a_kj (u_k - w_k) + p_j - q_j = 0`, `sum (u + w) <= 1`.
///
/// Returns `None` when the recovered primal point fails verification.
fn dual_route(
    design: &DMatrix<f64>,
    y: &[f64],
    columns: &[usize],
    rows: &[(usize, f64)],
    bound: f64,
) -> Result<Option<ChebyshevFit>> {
    let m = columns.len();
    let mut p = LpProblem::new();
    let mut eq: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut total = Vec::with_capacity(2 * rows.len());
    for &(k, h) in rows {
        let u = p.add_variable(-(y[k] - h), 0.0, INF);
        let w = p.add_variable(y[k] + h, 0.0, INF);
        total.extend([(u, 1.0), (w, 1.0)]);
        for (i, &j) in columns.iter().enumerate() {
            let a = design[(k, j)];
            if a != 0.0 {
                eq[i].push((u, a));
                eq[i].push((w, -a));
            }
        }
    }
    if bound.is_finite() {
        for row in eq.iter_mut() {
            let pv = p.add_variable(bound, 0.0, INF);
            let qv = p.add_variable(bound, 0.0, INF);
            row.push((pv, 1.0));
            row.push((qv, -1.0));
        }
    }
    for row in &eq {
        p.add_constraint(row, Sense::Eq, 0.0);
    }
    p.add_constraint(&total, Sense::Le, 1.0);

    let sol = match solve_lp(&p) {
        Ok(s) => s,
        Err(Error::NumericBreakdown { .. } | Error::IterationLimit(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let Ok(sol) = sol.into_optimal() else { return Ok(None) };
    let c: Vec<f64> = sol.duals[..m].iter().map(|d| -d).collect();
    if bound.is_finite() && c.iter().any(|v| v.abs() > bound * (1.0 + 1e-9)) {
        return Ok(None);
    }
    let c: Vec<f64> = c.into_iter().map(|v| v.clamp(-bound, bound)).collect();
    let gamma = attained_gamma(design, y, columns, rows, &c);
    let dual_value = -sol.objective;
    if (gamma - dual_value).abs() > DUAL_AGREEMENT * (1.0 + gamma.abs()) {
        return Ok(None);
    }
    Ok(Some(ChebyshevFit { coefficients: c, gamma }))
}
