mod common;

use wpfl_core::model::{check_feasibility, total_completion_time, ConstraintKind, Mode};
use wpfl_core::oracle::{pinned_allocation, single_device_search};
use wpfl_core::{run, RunOptions};

#[test]
fn pinned_points_are_feasible_and_tight() {
    let instance = common::instance(1, Mode::Fdma, 0);
    let d = &instance.devices[0];
    let a = pinned_allocation(&instance, 0.3, 0.5 * (d.f_min + d.f_max), 0.5 * d.p_max);
    let report = check_feasibility(&instance, &a, 1e-9);
    assert!(report.feasible, "{:?}", report.worst());
    let eps = 1e-6;
    for c in &report.checks {
        if matches!(c.kind, ConstraintKind::LocalTime | ConstraintKind::Upload | ConstraintKind::SensingData) {
            assert!(c.slack <= eps * c.scale, "{:?}", c);
        }
    }
}

#[test]
fn oracle_needs_exactly_one_device() {
    assert!(single_device_search(&common::instance(2, Mode::Fdma, 0)).is_err());
}

#[test]
fn solver_matches_the_oracle_on_one_device() {
    for mode in [Mode::Fdma, Mode::Noma] {
        for seed in 0..5 {
            let instance = common::instance(1, mode, seed);
            let best = single_device_search(&instance).unwrap().unwrap();
            assert!(check_feasibility(&instance, &best.allocation, 1e-9).feasible);
            assert_eq!(total_completion_time(&best.allocation, &instance.learning).unwrap(), best.objective);
            let found = run(&instance, &RunOptions::default()).unwrap().final_objective();
            let gap = (found - best.objective).abs() / best.objective;
            assert!(gap <= 0.02, "{mode} seed {seed}: {found} vs {}", best.objective);
        }
    }
}
