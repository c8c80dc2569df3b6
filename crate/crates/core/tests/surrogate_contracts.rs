mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use wpfl_core::contracts::{check_contracts, Kind};
use wpfl_core::model::{check_feasibility, Mode};
use wpfl_core::sca::{init_feasible, resource_program, Frozen};
use wpfl_solver::{solve, SolverOptions};

#[test]
fn every_kind_is_tight_and_bounds_in_the_right_direction() {
    for (i, kind) in Kind::ALL.into_iter().enumerate() {
        let report = check_contracts(kind, 1000, 1000, 100 + i as u64);
        assert!(report.holds(1e-9), "{}: {report:?}", kind.name());
    }
}

#[test]
fn reports_are_reproducible() {
    let a = check_contracts(Kind::NomaRateLower, 50, 50, 9);
    let b = check_contracts(Kind::NomaRateLower, 50, 50, 9);
    assert_eq!(a, b);
}

// Optima of randomly tilted copies of the resource program, and convex
// combinations of them, all satisfy the convex rows; each must be feasible for
// the exact problem.
fn inner_approximation_holds(mode: Mode, seed: u64) {
    let instance = common::instance(6, mode, seed);
    let anchor = init_feasible(&instance).unwrap();
    let rp = resource_program(&instance, &anchor, &Frozen::none()).unwrap();
    let base = rp.program.objective.value(&rp.start).abs();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut corners = vec![rp.start.clone()];
    for _ in 0..6 {
        let mut tilted = rp.program.clone();
        let mut objective = tilted.objective.clone();
        for (j, v) in rp.program.variables.iter().enumerate() {
            // durations stay untilted so the program remains bounded
            if !v.name.starts_with("tau") {
                objective = objective.linear(j, rng.random_range(-0.5..0.5) * base / v.scale);
            }
        }
        tilted.set_objective(objective);
        corners.push(solve(&tilted, &rp.start, &SolverOptions::default()).unwrap().point);
    }
    let mut inside = 0;
    for _ in 0..200 {
        let w: Vec<f64> = corners.iter().map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        let total: f64 = w.iter().sum();
        let x: Vec<f64> = (0..rp.start.len())
            .map(|j| corners.iter().zip(&w).map(|(c, wi)| c[j] * wi).sum::<f64>() / total)
            .collect();
        if !rp.program.in_box(&x) || !rp.program.in_domain(&x) {
            continue;
        }
        if rp.program.max_violation(&x).is_some_and(|(_, v)| v > 0.0) {
            continue;
        }
        inside += 1;
        let report = check_feasibility(&instance, &rp.allocation(&x), 1e-9);
        assert!(report.feasible, "{mode} seed {seed}: {:?}", report.worst());
    }
    assert!(inside >= 10, "only {inside} sampled points satisfied the convex rows");
}

#[test]
fn fdma_resource_rows_are_an_inner_approximation() {
    for seed in 0..3 {
        inner_approximation_holds(Mode::Fdma, seed);
    }
}

#[test]
fn noma_resource_rows_are_an_inner_approximation() {
    for seed in 0..3 {
        inner_approximation_holds(Mode::Noma, seed);
    }
}
