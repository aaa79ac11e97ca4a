//! Linear-based convex relaxation of the fractional model, tightness
//! certificates against the semidefinite and second-order-cone relaxations,
//! and the exactness test.
//!
//! The relaxation drops the nonconvex sphere constraint in favour of the
//! linear cut `sum(s_hat) + sum(b_hat) + v_hat >= 1`. With `v_hat` pinned the
//! objective `gamma_hat / v_hat` is linear, so everything except the convex
//! ellipsoid constraint is an LP. The ellipsoid is enforced by
//! supporting-hyperplane cuts added at the current LP optimum.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::{map_inverse, FpModel, FpPoint, PSD_TOL};
use crate::lp::{solve_lp, LpProblem, LpStatus, Sense};

pub const DEFAULT_CUT_LIMIT: usize = 500;
pub const QUAD_TOL: f64 = 1e-7;
pub const DEFAULT_INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct RelaxationOptions {
    pub cut_limit: usize,
    pub quad_tol: f64,
    pub integrality_tol: f64,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        RelaxationOptions {
            cut_limit: DEFAULT_CUT_LIMIT,
            quad_tol: QUAD_TOL,
            integrality_tol: DEFAULT_INTEGRALITY_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutIteration {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    /// `| |z|^2 - sum(z) |` with `z = (s_hat, b_hat, v_hat)`.
    pub literal_residual: f64,
    /// Largest distance of an inverse-mapped selection entry from {0, 1}.
    pub integrality_gap: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSolution {
    pub point: FpPoint,
    /// `gamma_hat / v_hat`, a lower bound on the mixed-integer optimum.
    pub objective: f64,
    pub cuts: usize,
    /// Violation of the ellipsoid constraint at termination.
    pub quad_residual: f64,
    pub exactness: ExactnessReport,
    pub lp_iterations: usize,
    pub trace: Vec<CutIteration>,
}

impl RelaxationSolution {
    pub fn write_trace_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "iteration,objective,residual")?;
        for t in &self.trace {
            writeln!(out, "{},{},{}", t.iteration, t.objective, t.residual)?;
        }
        Ok(())
    }
}

struct Layout {
    m_d: usize,
    n: usize,
}

impl Layout {
    fn c(&self, j: usize) -> usize {
        j
    }
    fn s(&self, j: usize) -> usize {
        self.m_d + j
    }
    fn b(&self, k: usize) -> usize {
        2 * self.m_d + k
    }
    fn gamma(&self) -> usize {
        2 * self.m_d + self.n
    }
}

fn build_base_lp(model: &FpModel) -> (LpProblem, Layout) {
    let inst = &model.instance;
    let (m_d, n) = (inst.m_d(), inst.n_points());
    let lay = Layout { m_d, n };
    let v = model.v_const;
    let kappa = model.kappa();
    let kinv = 1.0 / kappa;
    let big_m = inst.big_m;
    let cap = kappa * v;

    let mut p = LpProblem::new();
    for _ in 0..m_d {
        p.add_variable(0.0, f64::NEG_INFINITY, f64::INFINITY);
    }
    for _ in 0..m_d {
        p.add_variable(0.0, 0.0, cap);
    }
    for _ in 0..n {
        p.add_variable(0.0, 0.0, cap);
    }
    p.add_variable(1.0, 0.0, f64::INFINITY);

    for k in 0..n {
        let mut row: Vec<(usize, f64)> = (0..m_d).map(|j| (lay.c(j), -inst.design[(k, j)])).collect();
        row.push((lay.b(k), kinv * big_m));
        row.push((lay.gamma(), -1.0));
        p.add_constraint(&row, Sense::Le, big_m * v - inst.y[k] * v);
        for e in row.iter_mut().take(m_d) {
            e.1 = -e.1;
        }
        p.add_constraint(&row, Sense::Le, big_m * v + inst.y[k] * v);
    }
    for j in 0..m_d {
        p.add_constraint(&[(lay.c(j), 1.0), (lay.s(j), -kinv * big_m)], Sense::Le, 0.0);
        p.add_constraint(&[(lay.c(j), -1.0), (lay.s(j), -kinv * big_m)], Sense::Le, 0.0);
    }
    let keep: Vec<(usize, f64)> = (0..n).map(|k| (lay.b(k), 1.0)).collect();
    p.add_constraint(&keep, Sense::Eq, inst.l_b as f64 * cap);
    let sel: Vec<(usize, f64)> = (0..m_d).map(|j| (lay.s(j), 1.0)).collect();
    p.add_constraint(&sel, Sense::Eq, inst.l_m as f64 * cap);
    let all: Vec<(usize, f64)> = (0..m_d).map(|j| (lay.s(j), 1.0)).chain(keep).collect();
    p.add_constraint(&all, Sense::Ge, 1.0 - v);
    (p, lay)
}

fn point_from(x: &[f64], lay: &Layout, v: f64) -> FpPoint {
    FpPoint {
        c_hat: (0..lay.m_d).map(|j| x[lay.c(j)]).collect(),
        s_hat: (0..lay.m_d).map(|j| x[lay.s(j)].max(0.0)).collect(),
        b_hat: (0..lay.n).map(|k| x[lay.b(k)].max(0.0)).collect(),
        gamma_hat: x[lay.gamma()].max(0.0),
        v_hat: v,
    }
}

/// The relaxation LP before any ellipsoid cuts. Variables are `c_hat`,
/// `s_hat`, `b_hat` and `gamma_hat` in that order; the objective is
/// `gamma_hat`, so divide by `v_hat` for the bound.
pub fn relaxation_lp(model: &FpModel) -> LpProblem {
    build_base_lp(model).0
}

pub fn solve_linear_relaxation(model: &FpModel) -> Result<RelaxationSolution> {
    solve_linear_relaxation_with(model, &RelaxationOptions::default())
}

pub fn solve_linear_relaxation_with(model: &FpModel, opts: &RelaxationOptions) -> Result<RelaxationSolution> {
    let (mut p, lay) = build_base_lp(model);
    let v = model.v_const;
    let rho = model.rho;
    let a = (rho - 1.0) / rho;
    let beta = v / (rho.sqrt() * (rho - 1.0).sqrt());
    let mut trace = Vec::new();
    let mut lp_iterations = 0;
    let mut cuts = 0;
    loop {
        let sol = solve_lp(&p)?;
        lp_iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::LpStatus("infeasible")),
            LpStatus::Unbounded => return Err(Error::LpStatus("unbounded")),
        }
        let point = point_from(&sol.x, &lay, v);
        let residual = model.ellipsoid_value(&point) - 1.0;
        let objective = point.objective();
        trace.push(CutIteration { iteration: cuts, objective, residual });
        if residual <= opts.quad_tol {
            let exactness = check_exactness_point(&point, rho, opts.integrality_tol)?;
            return Ok(RelaxationSolution {
                point,
                objective,
                cuts,
                quad_residual: residual.max(0.0),
                exactness,
                lp_iterations,
                trace,
            });
        }
        if cuts >= opts.cut_limit {
            return Err(Error::CutLimit { limit: opts.cut_limit, residual });
        }
        // Supporting hyperplane of the ellipsoid at w0 = (s_hat, b_hat):
        // grad . w <= 1 - g(w0) + grad . w0, scaled to a unit gradient.
        let w0: Vec<f64> = point.s_hat.iter().chain(&point.b_hat).copied().collect();
        let grad: Vec<f64> = w0.iter().map(|w| 2.0 * a * w + beta).collect();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let rhs = 1.0 - (residual + 1.0) + grad.iter().zip(&w0).map(|(g, w)| g * w).sum::<f64>();
        let row: Vec<(usize, f64)> = grad
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let col = if i < lay.m_d { lay.s(i) } else { lay.b(i - lay.m_d) };
                (col, g / norm)
            })
            .collect();
        p.add_constraint(&row, Sense::Le, rhs / norm);
        cuts += 1;
    }
}

pub fn check_linear_relaxation_feasible(
    model: &FpModel,
    q: &FpPoint,
) -> Result<crate::fractional::ResidualReport> {
    model.check_relaxation_feasible(q)
}

fn check_exactness_point(q: &FpPoint, rho: f64, tol: f64) -> Result<ExactnessReport> {
    let z = q.z();
    let literal_residual = (z.iter().map(|v| v * v).sum::<f64>() - z.iter().sum::<f64>()).abs();
    let p = map_inverse(q, rho)?;
    let integrality_gap = p
        .s
        .iter()
        .chain(&p.b)
        .map(|v| v.abs().min((1.0 - v).abs()))
        .fold(0.0, f64::max);
    Ok(ExactnessReport { literal_residual, integrality_gap, certified: integrality_gap <= tol })
}

pub fn check_exactness(sol: &RelaxationSolution, rho: f64, tol: f64) -> Result<ExactnessReport> {
    check_exactness_point(&sol.point, rho, tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateCase {
    /// `|z|^2 >= 1`: the rank-one lift `z z'`.
    RankOne,
    /// `(z e' + e z') / 2`, valid when its gap to `z z'` is PSD.
    Symmetrized,
    /// `z z' + ((1 - |z|^2) / K) I`, always PSD with unit trace.
    DiagonalLift,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdcCertificate {
    pub chi: DMatrix<f64>,
    pub trace: f64,
    /// Smallest eigenvalue of `chi - z z'`.
    pub min_eigenvalue: f64,
    pub case: CertificateCase,
    /// Smallest eigenvalue of the symmetrized candidate, when it was tried.
    pub symmetrized_min_eigenvalue: Option<f64>,
}

impl SdcCertificate {
    pub fn is_valid(&self) -> bool {
        self.trace >= 1.0 - PSD_TOL && self.min_eigenvalue >= -PSD_TOL
    }
}

/// Feasibility slack accepted when checking the certificate precondition.
pub const CERTIFICATE_FEAS_TOL: f64 = 1e-7;

/// A lifted matrix witnessing that `q` is feasible for the semidefinite
/// relaxation (without the rank constraint).
pub fn build_sdc_certificate(model: &FpModel, q: &FpPoint) -> Result<SdcCertificate> {
    let report = model.check_relaxation_feasible(q)?;
    if !report.feasible(CERTIFICATE_FEAS_TOL) {
        let (name, value) = report.worst();
        return Err(Error::Precondition(format!(
            "point violates the linear relaxation ({name}: {value:e})"
        )));
    }
    Ok(sdc_certificate_for(&q.z()))
}

/// The certificate construction for a bare vector `z`.
pub fn sdc_certificate_for(z: &[f64]) -> SdcCertificate {
    let k = z.len();
    let zv = nalgebra::DVector::from_column_slice(z);
    let zz = &zv * zv.transpose();
    let norm2 = zv.norm_squared();
    let min_eig = |m: &DMatrix<f64>| m.clone().symmetric_eigenvalues().min();
    if norm2 >= 1.0 {
        return SdcCertificate {
            trace: zz.trace(),
            min_eigenvalue: 0.0,
            chi: zz,
            case: CertificateCase::RankOne,
            symmetrized_min_eigenvalue: None,
        };
    }
    let e = nalgebra::DVector::from_element(k, 1.0);
    let sym = (&zv * e.transpose() + &e * zv.transpose()) * 0.5;
    let sym_min = min_eig(&(&sym - &zz));
    if sym_min >= -PSD_TOL && sym.trace() >= 1.0 - PSD_TOL {
        return SdcCertificate {
            trace: sym.trace(),
            min_eigenvalue: sym_min,
            chi: sym,
            case: CertificateCase::Symmetrized,
            symmetrized_min_eigenvalue: Some(sym_min),
        };
    }
    let lift = (1.0 - norm2) / k as f64;
    let chi = &zz + DMatrix::identity(k, k) * lift;
    SdcCertificate {
        trace: chi.trace(),
        min_eigenvalue: min_eig(&(&chi - &zz)),
        chi,
        case: CertificateCase::DiagonalLift,
        symmetrized_min_eigenvalue: Some(sym_min),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SocReport {
    /// Smallest `M_ii M_jj - M_ij^2` over all pairs `i != j`.
    pub worst: f64,
    pub pair: Option<(usize, usize)>,
}

/// 2x2-minor residuals of `M = chi - z z'`.
pub fn soc_constraint_residuals(q: &FpPoint, chi: &DMatrix<f64>) -> Result<SocReport> {
    let z = q.z();
    if chi.nrows() != z.len() || chi.ncols() != z.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: chi.nrows() });
    }
    let gap = DMatrix::from_fn(z.len(), z.len(), |i, j| chi[(i, j)] - z[i] * z[j]);
    Ok(soc_minor_residuals(&gap))
}

pub fn soc_minor_residuals(m: &DMatrix<f64>) -> SocReport {
    let mut worst = f64::INFINITY;
    let mut pair = None;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i == j {
                continue;
            }
            let r = m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(i, j)];
            if r < worst {
                worst = r;
                pair = Some((i, j));
            }
        }
    }
    SocReport { worst: if pair.is_some() { worst } else { 0.0 }, pair }
}
