//! Cross-module properties on random desk-scale instances.

use proptest::prelude::*;

use tscrr_core::fractional::{map_forward, FpModel, QcqpPoint, VPinning};
use tscrr_core::lp::write_mps;
use tscrr_core::oracle::{solve_milp_exact, DEFAULT_NODE_BUDGET};
use tscrr_core::relaxation::{relaxation_lp, solve_linear_relaxation};
use tscrr_core::synth::{outlier_synthetic, seeded_instance, InstanceShape};
use tscrr_core::tscrr::{fit_instance, fit_tscrr, RecoveryScope, Refinement, TscrrConfig};
use tscrr_core::Execution;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bound_exact_recovery_sandwich(seed in any::<u64>()) {
        let inst = seeded_instance(seed, &InstanceShape::default()).unwrap();
        let exact = solve_milp_exact(&inst, DEFAULT_NODE_BUDGET).unwrap();
        let fit = fit_instance(&inst, &TscrrConfig::new(0, inst.l_m, inst.l_b)).unwrap();
        prop_assert!(fit.lower_bound <= exact.gamma + 1e-7);
        prop_assert!(exact.gamma <= fit.recovery_gamma + 1e-7);
        prop_assert!(fit.gap >= -1e-7);
        prop_assert_eq!(fit.s.iter().filter(|&&f| f).count(), inst.l_m);
        prop_assert_eq!(fit.b.iter().filter(|&&f| f).count(), inst.l_b);
    }

    #[test]
    fn exact_solutions_map_into_the_relaxation(seed in any::<u64>()) {
        let inst = seeded_instance(seed, &InstanceShape::default()).unwrap();
        let exact = solve_milp_exact(&inst, DEFAULT_NODE_BUDGET).unwrap();
        let model = FpModel::new(inst, None, VPinning::Consistent).unwrap();
        let f = |v: &[bool]| v.iter().map(|&x| x as u8 as f64).collect();
        let p = QcqpPoint { c: exact.c.clone(), s: f(&exact.s), b: f(&exact.b), gamma: exact.gamma };
        let q = map_forward(&p, model.rho);
        prop_assert!(model.check_relaxation_feasible(&q).unwrap().feasible(1e-9));
        let relaxed = solve_linear_relaxation(&model).unwrap();
        prop_assert!(relaxed.objective <= q.objective() + 1e-7);
    }

    #[test]
    fn execution_mode_does_not_change_the_fit(seed in any::<u64>()) {
        let inst = seeded_instance(seed, &InstanceShape::default()).unwrap();
        let mut cfg = TscrrConfig::new(0, inst.l_m, inst.l_b);
        let par = fit_instance(&inst, &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        prop_assert_eq!(par, fit_instance(&inst, &cfg).unwrap());
    }
}

/// For the same rounded support and kept set, fitting every row only adds
/// constraints.
#[test]
fn all_points_recovery_is_never_better_than_kept_only() {
    for seed in 0..20 {
        let inst = seeded_instance(seed, &InstanceShape::default()).unwrap();
        let mut cfg = TscrrConfig::new(0, inst.l_m, inst.l_b);
        cfg.refinement = Refinement::None;
        let kept = fit_instance(&inst, &cfg).unwrap();
        cfg.scope = RecoveryScope::AllPoints;
        let all = fit_instance(&inst, &cfg).unwrap();
        assert_eq!(all.s, kept.s);
        assert!(all.recovery_gamma >= kept.recovery_gamma - 1e-9, "seed {seed}");
    }
}

#[test]
fn relaxation_lp_exports_to_mps() {
    let (inst, _) = tscrr_core::tscrr::build_instance(&outlier_synthetic(), &TscrrConfig::new(2, 3, 18)).unwrap();
    let model = FpModel::new(inst, None, VPinning::Consistent).unwrap();
    let lp = relaxation_lp(&model);
    let mut buf = Vec::new();
    write_mps(&lp, "RELAX", &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows = text.lines().skip_while(|l| *l != "ROWS").skip(2).take_while(|l| *l != "COLUMNS").count();
    assert_eq!(rows, lp.num_rows());
    assert!(text.ends_with("ENDATA\n"));
}

#[test]
fn printed_pinning_still_bounds_the_exact_optimum() {
    let data = outlier_synthetic();
    let mut cfg = TscrrConfig::new(2, 3, 18);
    cfg.pinning = VPinning::Printed;
    let res = fit_tscrr(&data, &cfg).unwrap();
    assert!(res.lower_bound() <= res.recovery_gamma() + 1e-7);
}
