//! Two-step fit: solve the linear-based relaxation, map its optimum back to
//! selection coordinates, round to a support and kept set, then recover the
//! coefficients with an LP over that discrete choice.
//!
//! An optional exchange refinement follows the recovery. It repeatedly
//! applies the best single swap (a kept row at the error bound against an
//! excluded row, or a selected monomial against an unselected one) while
//! that strictly lowers the recovery error. Every candidate is scored with
//! the same fixed-support LP as the exact search, so the result is always a
//! feasible point of the mixed-integer model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorKind, Result};
use crate::fractional::{map_inverse, FpModel, VPinning};
use crate::lp::solve_with_allowances;
use crate::oracle::{MilpInstance, DEFAULT_BIG_M};
use crate::par::Execution;
use crate::poly::{design_matrix_with, enumerate_basis, Dataset, SparseModel};
use crate::relaxation::{
    solve_linear_relaxation_with, RelaxationOptions, RelaxationSolution, DEFAULT_CUT_LIMIT,
    DEFAULT_INTEGRALITY_TOL, QUAD_TOL,
};

/// Improvement a swap must achieve to be applied.
const SWAP_TOL: f64 = 1e-9;
/// Residual slack for counting a kept row as active.
const ACTIVE_TOL: f64 = 1e-9;
const MAX_REFINE_ROUNDS: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryScope {
    /// Excluded rows keep only a big-M allowance.
    #[default]
    KeptOnly,
    /// Every row is fitted, anomalous or not.
    AllPoints,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMode {
    /// Top-`l_m` / top-`l_b` rounding of the relaxed selection.
    #[default]
    Rounded,
    /// The recovery LP with the relaxed selection values used directly as
    /// multipliers: `|c_j| <= M s_j`, `|r_k| <= gamma + M (1 - b_k)`.
    Fractional,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    None,
    #[default]
    Exchange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TscrrConfig {
    pub degree: u32,
    pub l_m: usize,
    pub l_b: usize,
    pub big_m: f64,
    /// `None` selects the default for the instance size.
    pub rho: Option<f64>,
    pub scope: RecoveryScope,
    pub mode: RecoveryMode,
    pub refinement: Refinement,
    pub pinning: VPinning,
    pub integrality_tol: f64,
    pub cut_limit: usize,
    pub execution: Execution,
}

impl TscrrConfig {
    pub fn new(degree: u32, l_m: usize, l_b: usize) -> Self {
        TscrrConfig {
            degree,
            l_m,
            l_b,
            big_m: DEFAULT_BIG_M,
            rho: None,
            scope: RecoveryScope::default(),
            mode: RecoveryMode::default(),
            refinement: Refinement::default(),
            pinning: VPinning::default(),
            integrality_tol: DEFAULT_INTEGRALITY_TOL,
            cut_limit: DEFAULT_CUT_LIMIT,
            execution: Execution::default(),
        }
    }

    fn relaxation_options(&self) -> RelaxationOptions {
        RelaxationOptions {
            cut_limit: self.cut_limit,
            quad_tol: QUAD_TOL,
            integrality_tol: self.integrality_tol,
        }
    }
}

/// Outcome of the two-step fit on a bare instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFit {
    pub relaxation: RelaxationSolution,
    pub rho: f64,
    /// Relaxed selection values after the inverse mapping.
    pub s_star: Vec<f64>,
    pub b_star: Vec<f64>,
    /// Rounded selections before refinement.
    pub rounded_s: Vec<bool>,
    pub rounded_b: Vec<bool>,
    /// Final selections after refinement.
    pub s: Vec<bool>,
    pub b: Vec<bool>,
    /// Coefficients over the full basis (zero off the support).
    pub coefficients: Vec<f64>,
    pub recovery_gamma: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub refinement_swaps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TscrrResult {
    pub model: SparseModel,
    pub fit: InstanceFit,
}

impl TscrrResult {
    pub fn recovery_gamma(&self) -> f64 {
        self.fit.recovery_gamma
    }

    pub fn lower_bound(&self) -> f64 {
        self.fit.lower_bound
    }

    pub fn gap(&self) -> f64 {
        self.fit.gap
    }
}

/// Indices of the `count` largest values; ties go to the lowest index.
/// The result is ascending.
pub fn top_indices(values: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order.truncate(count);
    order.sort_unstable();
    order
}

fn mask(len: usize, on: &[usize]) -> Vec<bool> {
    let mut m = vec![false; len];
    for &i in on {
        m[i] = true;
    }
    m
}

fn indices(flags: &[bool], want: bool) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f == want).map(|(i, _)| i).collect()
}

struct Recovery<'a> {
    inst: &'a MilpInstance,
    scope: RecoveryScope,
}

impl Recovery<'_> {
    fn allowances(&self, kept: &[bool]) -> Vec<(usize, f64)> {
        let m = self.inst.big_m;
        (0..self.inst.n_points())
            .map(|k| match self.scope {
                RecoveryScope::KeptOnly => (k, if kept[k] { 0.0 } else { m }),
                RecoveryScope::AllPoints => (k, 0.0),
            })
            .collect()
    }

    fn solve(&self, support: &[usize], kept: &[bool]) -> Result<(f64, Vec<f64>)> {
        let fit = solve_with_allowances(
            &self.inst.design,
            &self.inst.y,
            support,
            &self.allowances(kept),
            self.inst.big_m,
        )?;
        Ok((fit.gamma, fit.coefficients))
    }
}

#[derive(Clone)]
enum Swap {
    Row { out: usize, into: usize },
    Column { out: usize, into: usize },
}

struct State {
    support: Vec<usize>,
    kept: Vec<bool>,
    gamma: f64,
    coefs: Vec<f64>,
}

fn refine(rec: &Recovery, mut st: State, lower_bound: f64, exec: Execution) -> Result<(State, usize)> {
    let inst = rec.inst;
    let mut swaps = 0;
    for _ in 0..MAX_REFINE_ROUNDS {
        if st.gamma - lower_bound <= SWAP_TOL {
            break;
        }
        let mut moves = Vec::new();
        if rec.scope == RecoveryScope::KeptOnly {
            let excluded = indices(&st.kept, false);
            for k in indices(&st.kept, true) {
                let fit: f64 =
                    st.support.iter().zip(&st.coefs).map(|(&j, &c)| inst.design[(k, j)] * c).sum();
                if (inst.y[k] - fit).abs() >= st.gamma - ACTIVE_TOL {
                    moves.extend(excluded.iter().map(|&e| Swap::Row { out: k, into: e }));
                }
            }
        }
        let unselected: Vec<usize> = (0..inst.m_d()).filter(|j| !st.support.contains(j)).collect();
        for &j in &st.support {
            moves.extend(unselected.iter().map(|&u| Swap::Column { out: j, into: u }));
        }
        let scored = exec.map(&moves, |mv| {
            let (support, kept) = apply(&st, mv);
            rec.solve(&support, &kept)
        });
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for (i, r) in scored.into_iter().enumerate() {
            let (g, coefs) = match r {
                Ok(v) => v,
                Err(e) if e.kind() == ErrorKind::Solver => continue,
                Err(e) => return Err(e),
            };
            if best.as_ref().is_none_or(|b| g < b.1) {
                best = Some((i, g, coefs));
            }
        }
        match best {
            Some((i, gamma, coefs)) if gamma < st.gamma - SWAP_TOL => {
                let (support, kept) = apply(&st, &moves[i]);
                st = State { support, kept, gamma, coefs };
                swaps += 1;
            }
            _ => break,
        }
    }
    Ok((st, swaps))
}

fn apply(st: &State, mv: &Swap) -> (Vec<usize>, Vec<bool>) {
    let mut support = st.support.clone();
    let mut kept = st.kept.clone();
    match *mv {
        Swap::Row { out, into } => {
            kept[out] = false;
            kept[into] = true;
        }
        Swap::Column { out, into } => {
            support.retain(|&j| j != out);
            support.push(into);
            support.sort_unstable();
        }
    }
    (support, kept)
}

/// Runs the two-step fit on a prepared instance.
pub fn fit_instance(inst: &MilpInstance, cfg: &TscrrConfig) -> Result<InstanceFit> {
    let model = FpModel::new(inst.clone(), cfg.rho, cfg.pinning)?;
    let relaxation = solve_linear_relaxation_with(&model, &cfg.relaxation_options())?;
    let relaxed = map_inverse(&relaxation.point, model.rho)?;
    let lower_bound = relaxation.objective;
    let (m_d, n) = (inst.m_d(), inst.n_points());
    let rounded_s = mask(m_d, &top_indices(&relaxed.s, inst.l_m));
    let rounded_b = mask(n, &top_indices(&relaxed.b, inst.l_b));
    let rec = Recovery { inst, scope: cfg.scope };

    let (s, b, coefficients, recovery_gamma, swaps) = match cfg.mode {
        RecoveryMode::Rounded => {
            let support = indices(&rounded_s, true);
            let (gamma, coefs) = rec.solve(&support, &rounded_b)?;
            let mut st = State { support, kept: rounded_b.clone(), gamma, coefs };
            let mut swaps = 0;
            if cfg.refinement == Refinement::Exchange {
                (st, swaps) = refine(&rec, st, lower_bound, cfg.execution)?;
            }
            let mut full = vec![0.0; m_d];
            for (&j, &c) in st.support.iter().zip(&st.coefs) {
                full[j] = c;
            }
            (mask(m_d, &st.support), st.kept, full, st.gamma, swaps)
        }
        RecoveryMode::Fractional => {
            let (gamma, full) = fractional_recovery(inst, cfg.scope, &relaxed.s, &relaxed.b)?;
            (rounded_s.clone(), rounded_b.clone(), full, gamma, 0)
        }
    };
    Ok(InstanceFit {
        rho: model.rho,
        s_star: relaxed.s,
        b_star: relaxed.b,
        rounded_s,
        rounded_b,
        s,
        b,
        coefficients,
        recovery_gamma,
        lower_bound,
        gap: recovery_gamma - lower_bound,
        refinement_swaps: swaps,
        relaxation,
    })
}

/// `|c_j| <= M s_j` is handled by the substitution `c_j = s_j c'_j` with
/// `|c'_j| <= M`, which scales design column `j` by `s_j`.
fn fractional_recovery(
    inst: &MilpInstance,
    scope: RecoveryScope,
    s: &[f64],
    b: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let support: Vec<usize> = (0..inst.m_d()).filter(|&j| s[j] > 0.0).collect();
    if support.is_empty() {
        return Err(Error::InvalidInstance("relaxed selection is identically zero".into()));
    }
    let scaled = DMatrix::from_fn(inst.n_points(), inst.m_d(), |k, j| inst.design[(k, j)] * s[j].max(0.0));
    let rows: Vec<(usize, f64)> = (0..inst.n_points())
        .map(|k| match scope {
            RecoveryScope::KeptOnly => (k, inst.big_m * (1.0 - b[k]).clamp(0.0, 1.0)),
            RecoveryScope::AllPoints => (k, 0.0),
        })
        .collect();
    let fit = solve_with_allowances(&scaled, &inst.y, &support, &rows, inst.big_m)?;
    let mut full = vec![0.0; inst.m_d()];
    for (&j, &c) in support.iter().zip(&fit.coefficients) {
        full[j] = s[j] * c;
    }
    Ok((fit.gamma, full))
}

/// Builds the instance for `data` (already normalized) under `cfg`.
pub fn build_instance(data: &Dataset, cfg: &TscrrConfig) -> Result<(MilpInstance, crate::poly::MonomialBasis)> {
    let basis = enumerate_basis(data.dim(), cfg.degree)?;
    let design = design_matrix_with(data, &basis, cfg.execution)?;
    let inst = MilpInstance::new(design, data.targets().to_vec(), cfg.l_m, cfg.l_b, cfg.big_m)?;
    Ok((inst, basis))
}

pub fn fit_tscrr(data: &Dataset, cfg: &TscrrConfig) -> Result<TscrrResult> {
    let (inst, basis) = build_instance(data, cfg)?;
    let fit = fit_instance(&inst, cfg)?;
    let selected = match cfg.mode {
        RecoveryMode::Rounded => indices(&fit.s, true),
        RecoveryMode::Fractional => (0..basis.len()).filter(|&j| fit.s_star[j] > 0.0).collect(),
    };
    let model = SparseModel {
        coefficients: selected.iter().map(|&j| fit.coefficients[j]).collect(),
        selected,
        gamma: fit.recovery_gamma,
        anomalies: indices(&fit.b, false),
        normalization: data.normalization.clone(),
        basis,
    };
    model.validate()?;
    Ok(TscrrResult { model, fit })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub index: usize,
    pub residual: f64,
    pub anomalous: bool,
}

/// `|y_k - prediction|` for every row of `data`, flagged by the fit.
pub fn residual_profile(result: &TscrrResult, data: &Dataset) -> Result<Vec<PointResidual>> {
    if data.len() != result.fit.b.len() {
        return Err(Error::DimensionMismatch { expected: result.fit.b.len(), found: data.len() });
    }
    (0..data.len())
        .map(|k| {
            Ok(PointResidual {
                index: k,
                residual: (data.targets()[k] - result.model.predict(data.row(k))?).abs(),
                anomalous: !result.fit.b[k],
            })
        })
        .collect()
}
