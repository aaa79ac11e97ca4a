//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tscrr_core::fractional::{
    check_qcqp_feasible, convexity_rho_bound, map_forward, map_inverse, theorem1_psd_check, FpModel, FpPoint,
    QcqpPoint, VPinning,
};
use tscrr_core::harness::{ingest_csv, run_benchmark, BenchConfig, BenchReport};
use tscrr_core::oracle::{solve_milp_exact, MilpInstance, MilpSolution, DEFAULT_NODE_BUDGET};
use tscrr_core::poly::enumerate_basis;
use tscrr_core::relaxation::{build_sdc_certificate, soc_constraint_residuals, solve_linear_relaxation};
use tscrr_core::synth::{random_instance, unconstrained, InstanceShape, OUTLIER_ROWS};
use tscrr_core::tscrr::{fit_instance, fit_tscrr, TscrrConfig};
use tscrr_core::{Execution, Result};

struct Outcome {
    passed: bool,
    detail: String,
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(20_240_601);
    r.set_stream(stream);
    r
}

fn binary_point(sol: &MilpSolution) -> QcqpPoint {
    let f = |v: &[bool]| v.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    QcqpPoint { c: sol.c.clone(), s: f(&sol.s), b: f(&sol.b), gamma: sol.gamma }
}

fn small_instances(stream: u64, count: usize) -> Result<Vec<MilpInstance>> {
    let mut r = rng(stream);
    let shape = InstanceShape { max_dim: 3, max_degree: 2, max_points: 10, max_basis: 10, max_excluded: 2 };
    (0..count).map(|_| random_instance(&mut r, &shape)).collect()
}

fn c1() -> Result<Outcome> {
    let a = enumerate_basis(3, 4)?.len();
    let b = enumerate_basis(53, 2)?.len();
    Ok(Outcome { passed: a == 35 && b == 1485, detail: format!("m(3,4) = {a}, m(53,2) = {b}") })
}

fn c2() -> Result<Outcome> {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (m, n) = (r.random_range(1..=10), r.random_range(1..=30));
        let p = QcqpPoint {
            c: (0..m).map(|_| r.random_range(-10.0..10.0)).collect(),
            s: (0..m).map(|_| r.random::<f64>()).collect(),
            b: (0..n).map(|_| r.random::<f64>()).collect(),
            gamma: r.random_range(0.0..10.0),
        };
        for rho in [2.0, 10.0, 1e3] {
            let back = map_inverse(&map_forward(&p, rho), rho)?;
            let diffs = p.c.iter().zip(&back.c).chain(p.s.iter().zip(&back.s)).chain(p.b.iter().zip(&back.b));
            worst = diffs.map(|(x, y)| (x - y).abs()).fold(worst.max((p.gamma - back.gamma).abs()), f64::max);
        }
    }
    Ok(Outcome { passed: worst <= 1e-10, detail: format!("max component error {worst:e} over 30000 round trips") })
}

/// Smallest eigenvalue of the quadratic-constraint matrix, assembled here
/// from its definition.
fn block_matrix_min_eig(m_d: usize, n: usize, rho: f64) -> f64 {
    let k = m_d + n;
    let a = (rho - 1.0) / rho;
    let beta = 1.0 / (2.0 * rho.sqrt() * (rho - 1.0).sqrt());
    let mat = DMatrix::from_fn(k + 1, k + 1, |i, j| match (i == k, j == k) {
        (true, true) => 1.0,
        (true, false) | (false, true) => beta,
        _ if i == j => a,
        _ => 0.0,
    });
    mat.symmetric_eigenvalues().min()
}

fn c3() -> Result<Outcome> {
    let mut r = rng(3);
    let (mut worst_at_bound, mut misses, mut disagreement) = (f64::INFINITY, 0, 0.0f64);
    for _ in 0..50 {
        let total = r.random_range(2..=60);
        let m_d = r.random_range(1..total);
        let n = total - m_d;
        let at = convexity_rho_bound(m_d, n);
        let own = block_matrix_min_eig(m_d, n, at);
        disagreement = disagreement.max((own - theorem1_psd_check(m_d, n, at).min_eigenvalue).abs());
        worst_at_bound = worst_at_bound.min(own);
        let below = 1.0 + 0.4 * (total as f64).sqrt();
        if block_matrix_min_eig(m_d, n, below) >= 0.0 || theorem1_psd_check(m_d, n, below).is_convex {
            misses += 1;
        }
    }
    Ok(Outcome {
        passed: worst_at_bound >= -1e-9 && misses == 0 && disagreement <= 1e-12,
        detail: format!("min eigenvalue at bound {worst_at_bound:e}, below-bound pairs without a negative eigenvalue {misses}"),
    })
}

fn c4() -> Result<Outcome> {
    let instances = small_instances(4, 100)?;
    let (mut fp_worst, mut back_worst, mut obj_worst) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for inst in &instances {
        let sol = solve_milp_exact(inst, DEFAULT_NODE_BUDGET)?;
        let model = FpModel::new(inst.clone(), None, VPinning::Consistent)?;
        let p = binary_point(&sol);
        let q = map_forward(&p, model.rho);
        fp_worst = fp_worst.max(model.check_fp_feasible(&q)?.worst().1);
        obj_worst = obj_worst.max((q.objective() - p.gamma).abs());
        // An FP-feasible point assembled directly in rescaled coordinates.
        let kappa = model.kappa();
        let v = model.v_const;
        let built = FpPoint {
            c_hat: p.c.iter().map(|c| c * v).collect(),
            s_hat: p.s.iter().map(|s| s * kappa * v).collect(),
            b_hat: p.b.iter().map(|b| b * kappa * v).collect(),
            gamma_hat: p.gamma * v,
            v_hat: v,
        };
        fp_worst = fp_worst.max(model.check_fp_feasible(&built)?.worst().1);
        for point in [&q, &built] {
            let back = map_inverse(point, model.rho)?;
            back_worst = back_worst.max(check_qcqp_feasible(inst, &back)?.worst().1);
            obj_worst = obj_worst.max((back.gamma - point.objective()).abs());
        }
    }
    Ok(Outcome {
        passed: fp_worst <= 1e-8 && back_worst <= 1e-8 && obj_worst <= 1e-10,
        detail: format!("fractional residual {fp_worst:e}, selection residual {back_worst:e}, objective drift {obj_worst:e}"),
    })
}

fn c5() -> Result<Outcome> {
    let (mut below, mut above) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for inst in small_instances(5, 50)? {
        let exact = solve_milp_exact(&inst, DEFAULT_NODE_BUDGET)?;
        let fit = fit_instance(&inst, &TscrrConfig::new(0, inst.l_m, inst.l_b))?;
        below = below.max(fit.lower_bound - exact.gamma);
        above = above.max(exact.gamma - fit.recovery_gamma);
    }
    Ok(Outcome {
        passed: below <= 1e-7 && above <= 1e-7,
        detail: format!("max(bound - exact) {below:e}, max(exact - recovery) {above:e}"),
    })
}

fn c6() -> Result<Outcome> {
    let mut points = Vec::new();
    for inst in small_instances(6, 67)? {
        let exact = solve_milp_exact(&inst, DEFAULT_NODE_BUDGET)?;
        let model = FpModel::new(inst, None, VPinning::Consistent)?;
        let relaxed = solve_linear_relaxation(&model)?.point;
        let mapped = map_forward(&binary_point(&exact), model.rho);
        let t = 0.3;
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let blend = FpPoint {
            c_hat: mix(&relaxed.c_hat, &mapped.c_hat),
            s_hat: mix(&relaxed.s_hat, &mapped.s_hat),
            b_hat: mix(&relaxed.b_hat, &mapped.b_hat),
            gamma_hat: t * relaxed.gamma_hat + (1.0 - t) * mapped.gamma_hat,
            v_hat: t * relaxed.v_hat + (1.0 - t) * mapped.v_hat,
        };
        points.extend([(model.clone(), relaxed), (model.clone(), mapped), (model, blend)]);
    }
    points.truncate(200);
    let (mut trace, mut eig, mut soc) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut cases = std::collections::BTreeMap::new();
    for (model, q) in &points {
        let cert = build_sdc_certificate(model, q)?;
        *cases.entry(format!("{:?}", cert.case)).or_insert(0) += 1;
        let gap = DMatrix::from_fn(cert.chi.nrows(), cert.chi.ncols(), |i, j| {
            let z = q.z();
            cert.chi[(i, j)] - z[i] * z[j]
        });
        trace = trace.min(cert.chi.trace());
        eig = eig.min(gap.symmetric_eigenvalues().min());
        soc = soc.min(soc_constraint_residuals(q, &cert.chi)?.worst);
    }
    Ok(Outcome {
        passed: points.len() == 200 && trace >= 1.0 - 1e-9 && eig >= -1e-9 && soc >= -1e-9,
        detail: format!(
            "{} points {cases:?}, min trace {trace:.12}, min eigenvalue {eig:e}, min 2x2 minor {soc:e}",
            points.len()
        ),
    })
}

fn c7() -> Result<Outcome> {
    let mut certified = 0;
    let mut worst: f64 = 0.0;
    let mut total = 0;
    for inst in small_instances(7, 40)? {
        for variant in [inst.clone(), unconstrained(&inst)] {
            total += 1;
            let fit = fit_instance(&variant, &TscrrConfig::new(0, variant.l_m, variant.l_b))?;
            if fit.relaxation.exactness.certified {
                certified += 1;
                let exact = solve_milp_exact(&variant, DEFAULT_NODE_BUDGET)?;
                worst = worst.max((fit.recovery_gamma - exact.gamma).abs());
            }
        }
    }
    Ok(Outcome {
        passed: certified > 0 && worst <= 1e-7,
        detail: format!("{certified} of {total} certified, max |recovery - exact| {worst:e}"),
    })
}

fn c8() -> Result<Outcome> {
    let data = ingest_csv(&data_dir().join("outlier_synthetic.csv"), "y", &[])?.dataset;
    let cfg = TscrrConfig::new(2, 3, 18);
    let res = fit_tscrr(&data, &cfg)?;
    let (inst, _) = tscrr_core::tscrr::build_instance(&data, &cfg)?;
    let exact = solve_milp_exact(&inst, DEFAULT_NODE_BUDGET)?;
    let terms = res.model.terms();
    let passed = terms == ["1", "x1", "x2^2"]
        && res.model.anomalies == OUTLIER_ROWS
        && res.recovery_gamma() <= 1e-6
        && exact.support() == res.model.selected
        && exact.anomalies() == res.model.anomalies
        && exact.gamma <= 1e-6;
    Ok(Outcome {
        passed,
        detail: format!(
            "terms [{}], anomalies {:?}, recovery gamma {:e}, exact gamma {:e}",
            terms.join(", "),
            res.model.anomalies,
            res.recovery_gamma(),
            exact.gamma
        ),
    })
}

fn series_report() -> Result<BenchReport> {
    let cfg = BenchConfig::parse(
        r#"
        [dataset.series]
        path = "series.csv"
        features = ["x1", "x2", "x3"]
        degree = 2
        lm = 4
        anomalies = 10
        splits = ["odd-even", "head-tail"]
        "#,
        &data_dir(),
    )?;
    run_benchmark(&cfg, Execution::Parallel)
}

fn c9() -> Result<Outcome> {
    let report = series_report()?;
    let mse = |model: &str, split: &str| {
        report.rows.iter().find(|r| r.model == model && r.split == split).map(|r| r.mse).unwrap_or(f64::NAN)
    };
    let (t_ex, p_ex) = (mse("tscrr", "extrapolation"), mse("polynomial", "extrapolation"));
    let (p_in, l_in) = (mse("polynomial", "interpolation"), mse("linear", "interpolation"));
    Ok(Outcome {
        passed: report.failures.is_empty() && t_ex < p_ex && p_in <= l_in,
        detail: format!(
            "extrapolation mse tscrr {t_ex:e} vs polynomial {p_ex:e}; interpolation mse polynomial {p_in:e} vs linear {l_in:e}"
        ),
    })
}

fn c10() -> Result<Outcome> {
    let report = run_benchmark(&BenchConfig::from_path(&data_dir().join("bench.toml"))?, Execution::Parallel)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let mut checked = 0;
    let mut bad = 0;
    for rec in reader.records() {
        let rec = rec?;
        let job = report.jobs.iter().find(|j| j.dataset == rec[0] && j.split == rec[2]).expect("job for every row");
        let mse: f64 = rec[4].parse().expect("mse");
        let sse: f64 = rec[5].parse().expect("sse");
        if sse != mse * job.test_count as f64 {
            bad += 1;
        }
        checked += 1;
    }
    for r in &report.rows {
        let job = report.jobs.iter().find(|j| j.dataset == r.dataset && j.split == r.split).expect("job");
        if r.sse != r.mse * job.test_count as f64 {
            bad += 1;
        }
    }
    Ok(Outcome {
        passed: checked == report.rows.len() && checked > 0 && bad == 0 && report.failures.is_empty(),
        detail: format!("{checked} emitted rows, {bad} violations"),
    })
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "basis counts", c1, Some(Duration::from_secs(1))),
        (2, "mapping bijection", c2, Some(Duration::from_secs(5))),
        (3, "convexity threshold", c3, Some(Duration::from_secs(10))),
        (4, "fractional equivalence", c4, Some(Duration::from_secs(30))),
        (5, "bound sandwich", c5, Some(Duration::from_secs(120))),
        (6, "lifted certificates", c6, Some(Duration::from_secs(30))),
        (7, "certified exactness", c7, Some(Duration::from_secs(60))),
        (8, "anomaly recovery", c8, Some(Duration::from_secs(10))),
        (9, "experiment orderings", c9, Some(Duration::from_secs(120))),
        (10, "metrics identity", c10, None),
    ];
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(o) => (o.passed && limit.is_none_or(|l| elapsed <= l), o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = match limit {
            Some(l) => format!("{:.2}s of {}s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        println!("criterion {id:>2} {name}: {} ({detail}; {timing})", if passed { "PASS" } else { "FAIL" });
        failed += usize::from(!passed);
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
