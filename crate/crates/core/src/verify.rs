//! Randomized property suite over the whole pipeline, seeded and
//! deterministic. Each property reports a pass flag, its case count and the
//! worst observed quantity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fractional::{
    check_qcqp_feasible, convexity_rho_bound, map_forward, map_inverse, theorem1_psd_check, FpModel, FpPoint,
    QcqpPoint, VPinning, PSD_TOL,
};
use crate::oracle::{solve_milp_with, MilpInstance, MilpSolution, OracleOptions};
use crate::par::Execution;
use crate::poly::basis_size;
use crate::relaxation::{build_sdc_certificate, soc_constraint_residuals, solve_linear_relaxation};
use crate::synth::{outlier_synthetic, random_instance, unconstrained, InstanceShape, OUTLIER_ROWS};
use crate::tscrr::{fit_instance, fit_tscrr, TscrrConfig};

pub const SANDWICH_SLACK: f64 = 1e-7;
pub const ROUND_TRIP_TOL: f64 = 1e-10;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const OBJECTIVE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Selection point of an oracle solution.
pub fn qcqp_point(sol: &MilpSolution) -> QcqpPoint {
    let f = |v: &[bool]| v.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    QcqpPoint { c: sol.c.clone(), s: f(&sol.s), b: f(&sol.b), gamma: sol.gamma }
}

pub fn basis_counts() -> PropertyResult {
    let got = (basis_size(3, 4), basis_size(53, 2));
    PropertyResult {
        name: "basis-counts",
        passed: got == (35, 1485),
        cases: 2,
        detail: format!("m(3,4)={} m(53,2)={}", got.0, got.1),
    }
}

fn random_qcqp_point(rng: &mut impl Rng) -> QcqpPoint {
    let (m, n) = (rng.random_range(1..=12), rng.random_range(1..=40));
    QcqpPoint {
        c: (0..m).map(|_| rng.random_range(-5.0..5.0)).collect(),
        s: (0..m).map(|_| rng.random::<f64>()).collect(),
        b: (0..n).map(|_| rng.random::<f64>()).collect(),
        gamma: rng.random_range(0.0..5.0),
    }
}

fn max_abs_diff(a: &QcqpPoint, b: &QcqpPoint) -> f64 {
    let pairs = a.c.iter().zip(&b.c).chain(a.s.iter().zip(&b.s)).chain(a.b.iter().zip(&b.b));
    pairs.map(|(x, y)| (x - y).abs()).fold((a.gamma - b.gamma).abs(), f64::max)
}

pub fn mapping_round_trip(seed: u64, points: usize) -> Result<PropertyResult> {
    let mut rng = rng_for(seed, 1);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..points {
        let p = random_qcqp_point(&mut rng);
        for rho in [2.0, 10.0, 1e3] {
            worst = worst.max(max_abs_diff(&p, &map_inverse(&map_forward(&p, rho), rho)?));
            cases += 1;
        }
    }
    Ok(PropertyResult {
        name: "mapping-round-trip",
        passed: worst <= ROUND_TRIP_TOL,
        cases,
        detail: format!("max error {worst:e}"),
    })
}

pub fn convexity(seed: u64, pairs: usize) -> PropertyResult {
    let mut rng = rng_for(seed, 2);
    let mut worst_at_bound = f64::INFINITY;
    let mut missed_negative = 0;
    for _ in 0..pairs {
        let total = rng.random_range(2..=60);
        let m_d = rng.random_range(1..total);
        let n = total - m_d;
        worst_at_bound = worst_at_bound.min(theorem1_psd_check(m_d, n, convexity_rho_bound(m_d, n)).min_eigenvalue);
        let below = 1.0 + 0.4 * (total as f64).sqrt();
        if theorem1_psd_check(m_d, n, below).min_eigenvalue >= 0.0 {
            missed_negative += 1;
        }
    }
    PropertyResult {
        name: "convexity-threshold",
        passed: worst_at_bound >= -PSD_TOL && missed_negative == 0,
        cases: pairs,
        detail: format!("min eigenvalue at bound {worst_at_bound:e}, non-negative below bound {missed_negative}"),
    }
}

/// Random desk-scale instances with their exact solutions, in seed order.
pub fn solved_instances(seed: u64, count: usize, exec: Execution) -> Result<Vec<(MilpInstance, MilpSolution)>> {
    let shape = InstanceShape::default();
    let opts = OracleOptions { execution: Execution::Sequential, ..Default::default() };
    exec.map_range(count, |i| {
        let inst = random_instance(&mut rng_for(seed, 100 + i as u64), &shape)?;
        let sol = solve_milp_with(&inst, &opts)?;
        Ok((inst, sol))
    })
    .into_iter()
    .collect()
}

pub fn equivalence(seed: u64, count: usize, exec: Execution) -> Result<PropertyResult> {
    let solved = solved_instances(seed, count, exec)?;
    let rows = exec.map(&solved, |(inst, sol)| -> Result<(f64, f64, f64)> {
        let model = FpModel::new(inst.clone(), None, VPinning::Consistent)?;
        let p = qcqp_point(sol);
        let q = map_forward(&p, model.rho);
        let fp = model.check_fp_feasible(&q)?.worst().1;
        let back = check_qcqp_feasible(inst, &map_inverse(&q, model.rho)?)?.worst().1;
        Ok((fp, back, (q.objective() - p.gamma).abs()))
    });
    let (mut fp, mut back, mut obj) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for r in rows {
        let (a, b, c) = r?;
        fp = fp.max(a);
        back = back.max(b);
        obj = obj.max(c);
    }
    Ok(PropertyResult {
        name: "fractional-equivalence",
        passed: fp <= RESIDUAL_TOL && back <= RESIDUAL_TOL && obj <= OBJECTIVE_TOL,
        cases: count,
        detail: format!("fp residual {fp:e}, selection residual {back:e}, objective drift {obj:e}"),
    })
}

pub fn sandwich(seed: u64, count: usize, exec: Execution) -> Result<PropertyResult> {
    let solved = solved_instances(seed, count, exec)?;
    let fits = exec.map(&solved, |(inst, sol)| -> Result<(f64, f64)> {
        let fit = fit_instance(inst, &TscrrConfig::new(0, inst.l_m, inst.l_b))?;
        Ok((fit.lower_bound - sol.gamma, sol.gamma - fit.recovery_gamma))
    });
    let (mut low, mut high) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for f in fits {
        let (a, b) = f?;
        low = low.max(a);
        high = high.max(b);
    }
    Ok(PropertyResult {
        name: "bound-sandwich",
        passed: low <= SANDWICH_SLACK && high <= SANDWICH_SLACK,
        cases: count,
        detail: format!("bound over exact {low:e}, exact over recovery {high:e}"),
    })
}

/// Relaxation-feasible points: relaxation optima, mapped exact solutions and
/// midpoints of the two (the feasible set is convex).
pub fn relaxation_feasible_points(seed: u64, count: usize, exec: Execution) -> Result<Vec<(FpModel, FpPoint)>> {
    let per_instance = 3;
    let solved = solved_instances(seed, count.div_ceil(per_instance), exec)?;
    let groups = exec.map(&solved, |(inst, sol)| -> Result<Vec<(FpModel, FpPoint)>> {
        let model = FpModel::new(inst.clone(), None, VPinning::Consistent)?;
        let relaxed = solve_linear_relaxation(&model)?.point;
        let mapped = map_forward(&qcqp_point(sol), model.rho);
        let mid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let midpoint = FpPoint {
            c_hat: mid(&relaxed.c_hat, &mapped.c_hat),
            s_hat: mid(&relaxed.s_hat, &mapped.s_hat),
            b_hat: mid(&relaxed.b_hat, &mapped.b_hat),
            gamma_hat: 0.5 * (relaxed.gamma_hat + mapped.gamma_hat),
            v_hat: 0.5 * (relaxed.v_hat + mapped.v_hat),
        };
        Ok(vec![(model.clone(), relaxed), (model.clone(), mapped), (model, midpoint)])
    });
    let mut out = Vec::with_capacity(count);
    for g in groups {
        out.extend(g?);
    }
    out.truncate(count);
    Ok(out)
}

pub fn certificates(seed: u64, count: usize, exec: Execution) -> Result<PropertyResult> {
    let points = relaxation_feasible_points(seed, count, exec)?;
    let checks = exec.map(&points, |(model, q)| -> Result<(f64, f64, f64)> {
        let cert = build_sdc_certificate(model, q)?;
        let soc = soc_constraint_residuals(q, &cert.chi)?;
        Ok((cert.trace, cert.min_eigenvalue, soc.worst))
    });
    let (mut trace, mut eig, mut soc) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for c in checks {
        let (t, e, s) = c?;
        trace = trace.min(t);
        eig = eig.min(e);
        soc = soc.min(s);
    }
    Ok(PropertyResult {
        name: "lifted-certificates",
        passed: trace >= 1.0 - PSD_TOL && eig >= -PSD_TOL && soc >= -PSD_TOL,
        cases: points.len(),
        detail: format!("min trace {trace:.12}, min eigenvalue {eig:e}, min minor {soc:e}"),
    })
}

pub fn exactness(seed: u64, count: usize, exec: Execution) -> Result<PropertyResult> {
    let solved = solved_instances(seed, count, exec)?;
    let opts = OracleOptions { execution: Execution::Sequential, ..Default::default() };
    let variants: Vec<MilpInstance> =
        solved.iter().flat_map(|(inst, _)| [inst.clone(), unconstrained(inst)]).collect();
    let outcomes = exec.map(&variants, |inst| -> Result<Option<f64>> {
        let fit = fit_instance(inst, &TscrrConfig::new(0, inst.l_m, inst.l_b))?;
        if !fit.relaxation.exactness.certified {
            return Ok(None);
        }
        let exact = solve_milp_with(inst, &opts)?;
        Ok(Some((fit.recovery_gamma - exact.gamma).abs()))
    });
    let mut certified = 0;
    let mut worst: f64 = 0.0;
    for o in outcomes {
        if let Some(d) = o? {
            certified += 1;
            worst = worst.max(d);
        }
    }
    Ok(PropertyResult {
        name: "certified-exactness",
        passed: certified > 0 && worst <= SANDWICH_SLACK,
        cases: variants.len(),
        detail: format!("{certified} certified, max deviation {worst:e}"),
    })
}

pub fn outlier_recovery() -> Result<PropertyResult> {
    let res = fit_tscrr(&outlier_synthetic(), &TscrrConfig::new(2, 3, 18))?;
    let terms = res.model.terms();
    let passed = terms == ["1", "x1", "x2^2"] && res.model.anomalies == OUTLIER_ROWS && res.recovery_gamma() <= 1e-6;
    Ok(PropertyResult {
        name: "outlier-recovery",
        passed,
        cases: 1,
        detail: format!("terms [{}], anomalies {:?}, gamma {:e}", terms.join(", "), res.model.anomalies, res.recovery_gamma()),
    })
}

/// The full suite with the default case counts.
pub fn run_suite(seed: u64, exec: Execution) -> Result<Vec<PropertyResult>> {
    Ok(vec![
        basis_counts(),
        mapping_round_trip(seed, 10_000)?,
        convexity(seed, 50),
        equivalence(seed, 100, exec)?,
        sandwich(seed, 50, exec)?,
        certificates(seed, 200, exec)?,
        exactness(seed, 50, exec)?,
        outlier_recovery()?,
    ])
}
