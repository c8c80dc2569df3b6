mod common;

use wpfl_core::benchmarks::FIXED_ETA;
use wpfl_core::model::{check_feasibility, Mode};
use wpfl_core::sca::Trace;
use wpfl_core::{run, run_benchmark, RunOptions, Scheme};

fn every_allocation(trace: &Trace) -> impl Iterator<Item = &wpfl_core::Allocation> {
    std::iter::once(&trace.initial).chain(trace.iterations.iter().map(|r| &r.allocation))
}

#[test]
fn frozen_values_never_move() {
    let instance = common::instance(8, Mode::Fdma, 3);
    let opts = RunOptions::default();
    for scheme in [Scheme::Ftd, Scheme::Fla, Scheme::Ppt, Scheme::Eba] {
        let frozen = scheme.frozen(&instance);
        let trace = run_benchmark(&instance, scheme, &opts).unwrap();
        assert!(trace.iteration_count() > 1, "{scheme}");
        for a in every_allocation(&trace) {
            if let Some(t) = frozen.tau_s {
                assert_eq!(a.tau_s.to_bits(), t.to_bits(), "{scheme}");
            }
            if let Some(e) = frozen.eta {
                assert_eq!(a.eta.to_bits(), e.to_bits(), "{scheme}");
            }
            if let Some(p) = &frozen.beam_power {
                assert_eq!(&a.beam_power, p, "{scheme}");
            }
            if let Some(b) = &frozen.bandwidth {
                assert_eq!(a.bandwidth.as_ref(), Some(b), "{scheme}");
            }
        }
    }
}

#[test]
fn fixed_accuracy_scheme_keeps_a_quarter() {
    let instance = common::instance(10, Mode::Fdma, 0);
    let trace = run_benchmark(&instance, Scheme::Fla, &RunOptions::default()).unwrap();
    assert!(every_allocation(&trace).all(|a| a.eta == FIXED_ETA));
    assert!(trace.iterations.iter().all(|r| r.accuracy.is_none()));
}

#[test]
fn scheme_rules_match_their_definitions() {
    let instance = common::instance(5, Mode::Fdma, 1);
    let sys = &instance.system;
    let slowest = instance.devices.iter().map(|d| sys.d0 / d.r).fold(0.0, f64::max);
    assert_eq!(Scheme::Ftd.frozen(&instance).tau_s, Some(slowest));
    let beams = Scheme::Ppt.frozen(&instance).beam_power.unwrap();
    let total: f64 = instance.devices.iter().map(|d| d.h).sum();
    for (p, d) in beams.iter().zip(&instance.devices) {
        assert!((p - sys.p0 * d.h / total).abs() <= 1e-12 * sys.p0);
    }
    assert_eq!(Scheme::Eba.frozen(&instance).bandwidth, Some(vec![sys.b / 5.0; 5]));
    assert_eq!(Scheme::S2fl.frozen(&instance), Default::default());
}

#[test]
fn equal_bandwidth_with_one_device_is_the_full_scheme() {
    for seed in 0..3 {
        let instance = common::instance(1, Mode::Fdma, seed);
        let a = run_benchmark(&instance, Scheme::Eba, &RunOptions::default()).unwrap();
        let b = run_benchmark(&instance, Scheme::S2fl, &RunOptions::default()).unwrap();
        assert_eq!(a.final_objective(), b.final_objective(), "seed {seed}");
    }
}

#[test]
fn noma_scheme_runs_on_the_shared_uplink() {
    let instance = common::instance(6, Mode::Fdma, 2);
    let trace = run_benchmark(&instance, Scheme::S2flNoma, &RunOptions::default()).unwrap();
    assert_eq!(trace.mode, Mode::Noma);
    assert!(trace.final_allocation().bandwidth.is_none());
    let noma = instance.with_mode(Mode::Noma);
    assert_eq!(trace.final_objective(), run(&noma, &RunOptions::default()).unwrap().final_objective());
    for r in &trace.iterations {
        assert!(check_feasibility(&noma, &r.allocation, 1e-6).feasible);
    }
}

#[test]
fn schemes_follow_the_instance_uplink() {
    let instance = common::instance(6, Mode::Noma, 1);
    for scheme in [Scheme::S2fl, Scheme::Ftd, Scheme::Eba] {
        let trace = run_benchmark(&instance, scheme, &RunOptions::default()).unwrap();
        assert_eq!(trace.mode, Mode::Noma, "{scheme}");
    }
    let eba = run_benchmark(&instance, Scheme::Eba, &RunOptions::default()).unwrap();
    let full = run_benchmark(&instance, Scheme::S2fl, &RunOptions::default()).unwrap();
    assert_eq!(eba.final_objective(), full.final_objective());
}

#[test]
fn benchmark_traces_descend_and_stay_feasible() {
    let instance = common::instance(10, Mode::Fdma, 4);
    for scheme in Scheme::ALL {
        let trace = run_benchmark(&instance, scheme, &RunOptions::default()).unwrap();
        let target = scheme.uplink().map_or_else(|| instance.clone(), |m| instance.with_mode(m));
        for w in trace.objectives().windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{scheme}");
        }
        for r in &trace.iterations {
            assert!(check_feasibility(&target, &r.allocation, 1e-6).feasible, "{scheme} iteration {}", r.k);
        }
    }
}

#[test]
fn full_scheme_is_no_worse_than_its_restrictions() {
    let instance = common::instance(10, Mode::Fdma, 0);
    let opts = RunOptions::default();
    let best = run_benchmark(&instance, Scheme::S2fl, &opts).unwrap().final_objective();
    for scheme in [Scheme::Ftd, Scheme::Fla, Scheme::Ppt, Scheme::Eba] {
        let other = run_benchmark(&instance, scheme, &opts).unwrap().final_objective();
        assert!(best <= other * 1.01, "{scheme}: {best} vs {other}");
    }
}
