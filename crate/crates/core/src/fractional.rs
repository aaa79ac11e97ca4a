//! The fractional rescaling between the binary-selection model and its
//! fractional form, feasibility checks for both, and the convexity test for
//! the single quadratic constraint.
//!
//! Coordinates: a selection-model point is `(c, s, b, gamma)` with
//! `s in [0,1]^m_d`, `b in [0,1]^N`. The rescaled point is
//! `(c_hat, s_hat, b_hat, gamma_hat, v_hat)`. Throughout, `kappa` denotes
//! `sqrt(rho) / sqrt(rho - 1)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::MilpInstance;

/// Inverse mapping refuses `v_hat` at or below this.
pub const V_HAT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcqpPoint {
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpPoint {
    pub c_hat: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub gamma_hat: f64,
    pub v_hat: f64,
}

impl FpPoint {
    /// The stacked vector `(s_hat, b_hat, v_hat)`.
    pub fn z(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.s_hat.len() + self.b_hat.len() + 1);
        z.extend_from_slice(&self.s_hat);
        z.extend_from_slice(&self.b_hat);
        z.push(self.v_hat);
        z
    }

    pub fn objective(&self) -> f64 {
        self.gamma_hat / self.v_hat
    }
}

pub fn kappa(rho: f64) -> f64 {
    rho.sqrt() / (rho - 1.0).sqrt()
}

/// Smallest `rho` for which the quadratic constraint is convex.
pub fn convexity_rho_bound(m_d: usize, n: usize) -> f64 {
    1.0 + ((m_d + n) as f64).sqrt() / 2.0
}

pub fn default_rho(m_d: usize, n: usize) -> f64 {
    (1.0 + ((m_d + n) as f64).sqrt()).max(2.0)
}

pub fn map_forward(p: &QcqpPoint, rho: f64) -> FpPoint {
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    let r1 = (rho - 1.0).sqrt();
    let denom =
        ((rho - 1.0) * (sq(&p.s) + sq(&p.b) + 1.0) + sum(&p.s) + sum(&p.b)).sqrt();
    let f = r1 / denom;
    let g = rho.sqrt() / denom;
    FpPoint {
        c_hat: p.c.iter().map(|v| f * v).collect(),
        s_hat: p.s.iter().map(|v| g * v).collect(),
        b_hat: p.b.iter().map(|v| g * v).collect(),
        gamma_hat: f * p.gamma,
        v_hat: f,
    }
}

pub fn map_inverse(q: &FpPoint, rho: f64) -> Result<QcqpPoint> {
    if !(q.v_hat > V_HAT_FLOOR) {
        return Err(Error::DivisionHazard(q.v_hat));
    }
    let v = q.v_hat;
    let g = (rho - 1.0).sqrt() / (rho.sqrt() * v);
    Ok(QcqpPoint {
        c: q.c_hat.iter().map(|x| x / v).collect(),
        s: q.s_hat.iter().map(|x| g * x).collect(),
        b: q.b_hat.iter().map(|x| g * x).collect(),
        gamma: q.gamma_hat / v,
    })
}

/// Worst violation per constraint family; non-positive means satisfied.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<(&'static str, f64)>,
}

impl ResidualReport {
    fn push(&mut self, name: &'static str, value: f64) {
        self.entries.push((name, value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    pub fn worst(&self) -> (&'static str, f64) {
        self.entries
            .iter()
            .copied()
            .fold(("none", f64::NEG_INFINITY), |acc, e| if e.1 > acc.1 { e } else { acc })
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.1 <= tol)
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, f64::max)
}

fn residual(design: &DMatrix<f64>, y: &[f64], c: &[f64], k: usize, scale: f64) -> f64 {
    let fit: f64 = (0..design.ncols()).map(|j| design[(k, j)] * c[j]).sum();
    y[k] * scale - fit
}

fn check_dims(inst: &MilpInstance, c: usize, s: usize, b: usize) -> Result<()> {
    for (expected, found) in [(inst.m_d(), c), (inst.m_d(), s), (inst.n_points(), b)] {
        if expected != found {
            return Err(Error::DimensionMismatch { expected, found });
        }
    }
    Ok(())
}

/// Residuals of the binary-selection QCQP at `p`. Families: `big_m_rows`,
/// `coefficient_box`, `keep_count`, `support_count`, `binarity`, `bounds`.
pub fn check_qcqp_feasible(inst: &MilpInstance, p: &QcqpPoint) -> Result<ResidualReport> {
    check_dims(inst, p.c.len(), p.s.len(), p.b.len())?;
    let m = inst.big_m;
    let mut r = ResidualReport::default();
    r.push(
        "big_m_rows",
        max_of((0..inst.n_points()).map(|k| {
            -m * (1.0 - p.b[k]) + residual(&inst.design, &inst.y, &p.c, k, 1.0).abs() - p.gamma
        })),
    );
    r.push("coefficient_box", max_of(p.c.iter().zip(&p.s).map(|(c, s)| c.abs() - m * s)));
    r.push("keep_count", (p.b.iter().sum::<f64>() - inst.l_b as f64).abs());
    r.push("support_count", (p.s.iter().sum::<f64>() - inst.l_m as f64).abs());
    let lin: f64 = p.s.iter().chain(&p.b).sum();
    let quad: f64 = p.s.iter().chain(&p.b).map(|v| v * v).sum();
    r.push("binarity", lin - quad);
    r.push(
        "bounds",
        max_of(p.s.iter().chain(&p.b).map(|v| (-v).max(v - 1.0)).chain([-p.gamma])),
    );
    Ok(r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VPinning {
    /// The value the mapping produces at every feasible binary point.
    #[default]
    Consistent,
    /// Uses `m_d + N + 1` in place of `l_m + l_b + 1`.
    Printed,
}

/// The fractional model: the instance data plus `rho` and the pinned `v_hat`.
#[derive(Clone, Debug, PartialEq)]
pub struct FpModel {
    pub instance: MilpInstance,
    pub rho: f64,
    pub v_const: f64,
    pub pinning: VPinning,
}

impl FpModel {
    /// `rho = None` selects [`default_rho`].
    pub fn new(instance: MilpInstance, rho: Option<f64>, pinning: VPinning) -> Result<Self> {
        instance.validate()?;
        let (m_d, n) = (instance.m_d(), instance.n_points());
        let rho = rho.unwrap_or_else(|| default_rho(m_d, n));
        let bound = convexity_rho_bound(m_d, n);
        if !(rho.is_finite() && rho > 1.0 && rho >= bound) {
            return Err(Error::Precondition(format!(
                "rho = {rho} is below the convexity bound {bound}"
            )));
        }
        let count = match pinning {
            VPinning::Consistent => instance.l_m + instance.l_b + 1,
            VPinning::Printed => m_d + n + 1,
        } as f64;
        let v_const = (rho - 1.0).sqrt() / (rho * count - 1.0).sqrt();
        Ok(FpModel { instance, rho, v_const, pinning })
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.rho)
    }

    fn common_residuals(&self, q: &FpPoint, r: &mut ResidualReport) -> Result<()> {
        let inst = &self.instance;
        check_dims(inst, q.c_hat.len(), q.s_hat.len(), q.b_hat.len())?;
        let m = inst.big_m;
        let kappa = self.kappa();
        let kinv = 1.0 / kappa;
        let v = q.v_hat;
        r.push(
            "big_m_rows",
            max_of((0..inst.n_points()).map(|k| {
                -m * v + kinv * m * q.b_hat[k] + residual(&inst.design, &inst.y, &q.c_hat, k, v).abs()
                    - q.gamma_hat
            })),
        );
        r.push(
            "coefficient_box",
            max_of(q.c_hat.iter().zip(&q.s_hat).map(|(c, s)| c.abs() - kinv * m * s)),
        );
        r.push("support_box", max_of(q.s_hat.iter().map(|s| (-s).max(s - kappa * v))));
        r.push("keep_box", max_of(q.b_hat.iter().map(|b| (-b).max(b - kappa * v))));
        r.push("keep_count", (q.b_hat.iter().sum::<f64>() - inst.l_b as f64 * kappa * v).abs());
        r.push("support_count", (q.s_hat.iter().sum::<f64>() - inst.l_m as f64 * kappa * v).abs());
        r.push("v_pinned", (v - self.v_const).abs());
        r.push("gamma_sign", -q.gamma_hat);
        r.push("ellipsoid", self.ellipsoid_value(q) - 1.0);
        Ok(())
    }

    /// Left-hand side of the convex quadratic constraint (`<= 1`).
    pub fn ellipsoid_value(&self, q: &FpPoint) -> f64 {
        let rho = self.rho;
        let sq: f64 = q.s_hat.iter().chain(&q.b_hat).map(|v| v * v).sum();
        let lin: f64 = q.s_hat.iter().chain(&q.b_hat).sum();
        (rho - 1.0) / rho * sq + q.v_hat / (rho.sqrt() * (rho - 1.0).sqrt()) * lin + q.v_hat * q.v_hat
    }

    /// Residuals of the full fractional model, including the nonconvex
    /// `sphere` constraint `|s_hat|^2 + |b_hat|^2 + v_hat^2 >= 1`.
    pub fn check_fp_feasible(&self, q: &FpPoint) -> Result<ResidualReport> {
        let mut r = ResidualReport::default();
        self.common_residuals(q, &mut r)?;
        let norm: f64 = q.z().iter().map(|v| v * v).sum();
        r.push("sphere", 1.0 - norm);
        Ok(r)
    }

    /// Residuals of the linear-based relaxation: the sphere constraint is
    /// replaced by `sum(s_hat) + sum(b_hat) + v_hat >= 1`.
    pub fn check_relaxation_feasible(&self, q: &FpPoint) -> Result<ResidualReport> {
        let mut r = ResidualReport::default();
        self.common_residuals(q, &mut r)?;
        r.push("linear_cut", 1.0 - q.z().iter().sum::<f64>());
        Ok(r)
    }
}

pub fn check_fp_feasible(model: &FpModel, q: &FpPoint) -> Result<ResidualReport> {
    model.check_fp_feasible(q)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    pub schur: f64,
    pub is_convex: bool,
}

/// Tolerance for accepting a matrix as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

/// Hessian-type matrix of the quadratic constraint, order `K + 1` with
/// `K = m_d + N`: `a I_K` bordered by `beta e` and a unit corner.
pub fn convexity_matrix(m_d: usize, n: usize, rho: f64) -> DMatrix<f64> {
    let k = m_d + n;
    let a = (rho - 1.0) / rho;
    let beta = 1.0 / (2.0 * rho.sqrt() * (rho - 1.0).sqrt());
    DMatrix::from_fn(k + 1, k + 1, |i, j| match (i == k, j == k) {
        (true, true) => 1.0,
        (true, false) | (false, true) => beta,
        (false, false) if i == j => a,
        _ => 0.0,
    })
}

pub fn theorem1_psd_check(m_d: usize, n: usize, rho: f64) -> ConvexityReport {
    let min_eigenvalue = convexity_matrix(m_d, n, rho).symmetric_eigenvalues().min();
    let schur = 1.0 - (m_d + n) as f64 / (4.0 * (rho - 1.0).powi(2));
    ConvexityReport { min_eigenvalue, schur, is_convex: min_eigenvalue >= -PSD_TOL }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{solve_milp_exact, DEFAULT_BIG_M, DEFAULT_NODE_BUDGET};
    use proptest::prelude::*;

    fn worked_point() -> QcqpPoint {
        QcqpPoint { c: vec![0.5, 0.0], s: vec![1.0, 0.0], b: vec![1.0], gamma: 0.2 }
    }

    fn tiny_instance() -> MilpInstance {
        let x = [0.0, 1.0, 2.0, 3.0, 2.0];
        let design = DMatrix::from_fn(5, 2, |k, j| if j == 0 { 1.0 } else { x[k] });
        MilpInstance::new(design, vec![0.0, 1.0, 2.0, 3.0, 10.0], 1, 4, DEFAULT_BIG_M).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn zero_point_maps_to_unit_last_coordinate() {
        let p = QcqpPoint { c: vec![0.0; 2], s: vec![0.0; 2], b: vec![0.0; 3], gamma: 0.0 };
        for rho in [1.5, 2.0, 100.0] {
            let q = map_forward(&p, rho);
            assert!(close(q.v_hat, 1.0));
            assert!(q.z()[..5].iter().all(|&v| v == 0.0));
            assert_eq!(map_inverse(&q, rho).unwrap(), p);
        }
    }

    #[test]
    fn hand_evaluated_mapping() {
        let q = map_forward(&worked_point(), 5.0);
        let d = 14f64.sqrt();
        assert!(close(q.c_hat[0], 1.0 / d) && q.c_hat[1] == 0.0);
        assert!(close(q.s_hat[0], 5f64.sqrt() / d) && q.s_hat[1] == 0.0);
        assert!(close(q.b_hat[0], 5f64.sqrt() / d));
        assert!(close(q.gamma_hat, 0.4 / d));
        assert!(close(q.v_hat, 2.0 / d));
        let norm: f64 = q.z().iter().map(|v| v * v).sum();
        assert!(close(norm, 1.0));
        let back = map_inverse(&q, 5.0).unwrap();
        let p = worked_point();
        for (a, b) in back.c.iter().chain(&back.s).chain(&back.b).zip(p.c.iter().chain(&p.s).chain(&p.b)) {
            assert!(close(*a, *b));
        }
        assert!(close(back.gamma, 0.2));
    }

    #[test]
    fn inverse_rejects_vanishing_v() {
        let mut q = map_forward(&worked_point(), 5.0);
        q.v_hat = 0.0;
        assert!(matches!(map_inverse(&q, 5.0), Err(Error::DivisionHazard(_))));
    }

    #[test]
    fn qcqp_residuals() {
        let inst = tiny_instance();
        let sol = solve_milp_exact(&inst, DEFAULT_NODE_BUDGET).unwrap();
        let as_f = |v: &[bool]| v.iter().map(|&f| f as u8 as f64).collect::<Vec<_>>();
        let p = QcqpPoint { c: sol.c.clone(), s: as_f(&sol.s), b: as_f(&sol.b), gamma: sol.gamma };
        assert!(check_qcqp_feasible(&inst, &p).unwrap().feasible(1e-9));

        let half = QcqpPoint { s: vec![0.5, 0.5], ..p.clone() };
        let r = check_qcqp_feasible(&inst, &half).unwrap();
        assert!(r.get("binarity").unwrap() > 0.0);

        let short = QcqpPoint { b: vec![1.0, 1.0, 1.0, 0.0, 0.0], ..p };
        let r = check_qcqp_feasible(&inst, &short).unwrap();
        assert!(close(r.get("keep_count").unwrap(), 1.0));
    }

    #[test]
    fn fp_residuals() {
        let inst = tiny_instance();
        let sol = solve_milp_exact(&inst, DEFAULT_NODE_BUDGET).unwrap();
        let model = FpModel::new(inst, None, VPinning::Consistent).unwrap();
        let as_f = |v: &[bool]| v.iter().map(|&f| f as u8 as f64).collect::<Vec<_>>();
        let p = QcqpPoint { c: sol.c.clone(), s: as_f(&sol.s), b: as_f(&sol.b), gamma: sol.gamma };
        let q = map_forward(&p, model.rho);
        let r = model.check_fp_feasible(&q).unwrap();
        assert!(r.feasible(1e-9), "{r:?}");
        assert!(r.get("ellipsoid").unwrap().abs() < 1e-10);
        assert!(r.get("sphere").unwrap().abs() < 1e-10);

        let mut shrunk = q.clone();
        shrunk.s_hat.iter_mut().chain(shrunk.b_hat.iter_mut()).for_each(|v| *v /= 2.0);
        shrunk.v_hat /= 2.0;
        let r = model.check_fp_feasible(&shrunk).unwrap();
        assert!((r.get("sphere").unwrap() - 0.75).abs() < 1e-12);
        assert!(r.get("v_pinned").unwrap() > 0.0);

        let printed = FpModel::new(tiny_instance(), Some(model.rho), VPinning::Printed).unwrap();
        assert!(printed.check_fp_feasible(&q).unwrap().get("v_pinned").unwrap() > 1e-3);
    }

    #[test]
    fn relaxation_cut_residual() {
        let model = FpModel::new(tiny_instance(), None, VPinning::Consistent).unwrap();
        let q = FpPoint {
            c_hat: vec![0.0; 2],
            s_hat: vec![0.1, 0.1],
            b_hat: vec![0.05; 5],
            gamma_hat: 0.0,
            v_hat: 0.05,
        };
        let r = model.check_relaxation_feasible(&q).unwrap();
        assert!((r.get("linear_cut").unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rho_below_bound_is_rejected() {
        assert!(matches!(
            FpModel::new(tiny_instance(), Some(1.5), VPinning::Consistent),
            Err(Error::Precondition(_))
        ));
    }

    /// Eigenvalues of the bordered matrix in closed form: `a` with
    /// multiplicity `K - 1` plus the two of `[[a, sqrt(K) beta], [sqrt(K) beta, 1]]`.
    fn closed_form_min_eigenvalue(k: usize, rho: f64) -> f64 {
        let a = (rho - 1.0) / rho;
        let beta = 1.0 / (2.0 * rho.sqrt() * (rho - 1.0).sqrt());
        let off = (k as f64).sqrt() * beta;
        let mean = (a + 1.0) / 2.0;
        let rad = (((a - 1.0) / 2.0).powi(2) + off * off).sqrt();
        let small = mean - rad;
        if k > 1 {
            small.min(a)
        } else {
            small
        }
    }

    #[test]
    fn convexity_examples() {
        let r = theorem1_psd_check(2, 2, 2.0);
        assert!(r.schur.abs() < 1e-15);
        assert!(r.is_convex && r.min_eigenvalue.abs() < 1e-9);

        let k = 9;
        let r = theorem1_psd_check(4, 5, 1.0 + 0.4 * (k as f64).sqrt());
        assert!(r.min_eigenvalue < 0.0 && !r.is_convex && r.schur < 0.0);

        let k = 400;
        let rho = 10.0 * convexity_rho_bound(200, 200);
        let r = theorem1_psd_check(200, 200, rho);
        assert!(r.min_eigenvalue > 0.1 && r.schur > 0.99);
        assert!((r.min_eigenvalue - closed_form_min_eigenvalue(k, rho)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn mapping_round_trip(
            c in proptest::collection::vec(-100.0f64..100.0, 3),
            s in proptest::collection::vec(0.0f64..1.0, 3),
            b in proptest::collection::vec(0.0f64..1.0, 4),
            gamma in 0.0f64..10.0,
            rho_idx in 0usize..3,
        ) {
            let rho = [2.0, 10.0, 1000.0][rho_idx];
            let p = QcqpPoint { c, s, b, gamma };
            let q = map_forward(&p, rho);
            let back = map_inverse(&q, rho).unwrap();
            for (x, y) in back.c.iter().chain(&back.s).chain(&back.b).zip(p.c.iter().chain(&p.s).chain(&p.b)) {
                prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
            }
            prop_assert!((back.gamma - p.gamma).abs() <= 1e-10);
            // Objective preservation.
            prop_assert!((q.objective() - p.gamma).abs() <= 1e-10 * (1.0 + p.gamma));
        }

        #[test]
        fn eigenvalue_matches_closed_form(m_d in 1usize..30, n in 1usize..30, scale in 0.3f64..3.0) {
            let rho = 1.0 + scale * ((m_d + n) as f64).sqrt();
            let r = theorem1_psd_check(m_d, n, rho);
            prop_assert!((r.min_eigenvalue - closed_form_min_eigenvalue(m_d + n, rho)).abs() < 1e-9);
        }
    }
}
