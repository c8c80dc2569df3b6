mod common;

use proptest::prelude::*;
use wpfl_core::model::{achievable_rate, check_feasibility, fdma_rate, ConstraintKind, Mode};
use wpfl_core::sca::init_feasible;

proptest! {
    #[test]
    fn fdma_rate_is_jointly_concave(
        b1 in 1e3f64..1e6, b2 in 1e3f64..1e6, p1 in 1e-5f64..1e-1, p2 in 1e-5f64..1e-1, h in 1e-6f64..1e-3,
    ) {
        let n0 = 1e-14;
        let mid = fdma_rate(0.5 * (b1 + b2), 0.5 * (p1 + p2), h, n0);
        let chord = 0.5 * (fdma_rate(b1, p1, h, n0) + fdma_rate(b2, p2, h, n0));
        prop_assert!(mid >= chord * (1.0 - 1e-12));
    }

    #[test]
    fn fdma_rate_grows_with_bandwidth(b in 1e3f64..1e6, p in 1e-5f64..1e-1, h in 1e-6f64..1e-3) {
        prop_assert!(fdma_rate(1.5 * b, p, h, 1e-14) > fdma_rate(b, p, h, 1e-14));
    }
}

#[test]
fn fdma_rate_vanishes_with_bandwidth() {
    let (p, h, n0) = (0.01, 1e-4, 1e-14);
    let mut last = f64::INFINITY;
    for k in 1..12 {
        let r = fdma_rate(10f64.powi(-k), p, h, n0);
        assert!(r < last);
        last = r;
    }
    assert!(last < 1e-9);
    assert_eq!(fdma_rate(0.0, p, h, n0), 0.0);
}

#[test]
fn noma_rate_drops_as_later_devices_transmit_louder() {
    let inst = common::instance(4, Mode::Noma, 3);
    let base = init_feasible(&inst).unwrap();
    for k in 1..4 {
        let mut louder = base.clone();
        louder.tx_power[k] *= 2.0;
        for n in 0..k {
            assert!(achievable_rate(&inst, &louder, n).unwrap() < achievable_rate(&inst, &base, n).unwrap());
        }
        // earlier devices are already decoded and do not interfere
        for n in k + 1..4 {
            assert_eq!(achievable_rate(&inst, &louder, n).unwrap(), achievable_rate(&inst, &base, n).unwrap());
        }
    }
}

#[test]
fn single_user_noma_matches_full_band_fdma() {
    let noma = common::instance(1, Mode::Noma, 5);
    let fdma = common::instance(1, Mode::Fdma, 5);
    let a = init_feasible(&fdma).unwrap();
    let mut b = a.clone();
    b.bandwidth = None;
    let r_f = achievable_rate(&fdma, &a, 0).unwrap();
    let r_n = achievable_rate(&noma, &b, 0).unwrap();
    assert!((r_f - r_n).abs() <= 1e-12 * r_f);
}

#[test]
fn feasibility_report_names_broken_constraints() {
    let inst = common::instance(5, Mode::Fdma, 1);
    let a = init_feasible(&inst).unwrap();
    assert!(check_feasibility(&inst, &a, 1e-9).feasible);

    let mut short = a.clone();
    short.tau_c *= 0.5;
    let rep = check_feasibility(&inst, &short, 1e-9);
    assert!(!rep.feasible);
    assert!(rep.violations().any(|c| c.kind == ConstraintKind::Upload));

    let mut dark = a.clone();
    dark.tau_h *= 0.5;
    let rep = check_feasibility(&inst, &dark, 1e-9);
    assert!(rep.violations().all(|c| c.kind == ConstraintKind::EnergyBalance));
    assert!(rep.violations().count() > 0);

    let mut greedy = a.clone();
    greedy.beam_power[0] += inst.system.p0;
    let rep = check_feasibility(&inst, &greedy, 1e-9);
    assert!(rep.violations().any(|c| c.kind == ConstraintKind::BeamBudget));
}
