//! Exhaustive search for single-device instances.
//!
//! With one device the full beam power, the full band and the shortest
//! sensing time are always optimal, and every time variable is pinned at
//! equality by `(eta, f, p)`. The search grids those three coordinates and
//! then polishes the best grid point by a shrinking pattern search.

use crate::model::{check_feasibility, total_completion_time, Allocation, Mode, ModelError, ProblemInstance};
use crate::sca::{ETA_MAX, ETA_MIN};

/// Points per coordinate of the coarse grid.
pub const GRID: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub allocation: Allocation,
    pub evaluations: usize,
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// Allocation fixed by `(eta, f, p)` on a one-device instance.
pub fn pinned_allocation(instance: &ProblemInstance, eta: f64, f: f64, p: f64) -> Allocation {
    let sys = &instance.system;
    let d = &instance.devices[0];
    let tau_s = sys.d0 / d.r;
    let eta_loc = instance.learning.local_rounds(eta);
    let rate = sys.b * (1.0 + d.h * p / (sys.n0 * sys.b)).log2();
    let tau_c = sys.s_model / rate;
    let tau_l = eta_loc * d.c * d.r * tau_s / f;
    let spend = (d.q_r + d.q_s) * d.r * tau_s + eta_loc * d.zeta * d.c * d.r * tau_s * f * f + p * tau_c;
    Allocation {
        beam_power: vec![sys.p0],
        tx_power: vec![p],
        cpu_freq: vec![f],
        bandwidth: (sys.mode == Mode::Fdma).then(|| vec![sys.b]),
        tau_h: spend / (sys.phi * sys.p0 * d.h),
        tau_s,
        tau_l,
        tau_c,
        eta,
    }
}

/// Best completion time of a one-device instance; `None` when no pinned
/// point is feasible (only possible under a finite source energy cap).
pub fn single_device_search(instance: &ProblemInstance) -> Result<Option<OracleResult>, ModelError> {
    instance.validate()?;
    if instance.n() != 1 {
        return Err(ModelError::InvalidInstance(format!("the oracle needs one device, got {}", instance.n())));
    }
    let d = &instance.devices[0];
    let lo = [logit(ETA_MIN), d.f_min.ln(), (d.p_max * 1e-6).ln()];
    let hi = [logit(ETA_MAX), d.f_max.ln(), d.p_max.ln()];
    let mut evaluations = 0usize;
    let mut eval = |y: &[f64; 3]| -> f64 {
        evaluations += 1;
        let a = pinned_allocation(instance, sigmoid(y[0]), y[1].exp(), y[2].exp());
        match total_completion_time(&a, &instance.learning) {
            Ok(t) if t.is_finite() && check_feasibility(instance, &a, 1e-9).feasible => t,
            _ => f64::INFINITY,
        }
    };

    let at = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (GRID - 1) as f64;
    let mut best = ([0.0; 3], f64::INFINITY);
    for i in 0..GRID {
        for j in 0..GRID {
            for l in 0..GRID {
                let y = [at(0, i), at(1, j), at(2, l)];
                let v = eval(&y);
                if v < best.1 {
                    best = (y, v);
                }
            }
        }
    }
    if !best.1.is_finite() {
        return Ok(None);
    }

    let mut step: [f64; 3] = std::array::from_fn(|k| (hi[k] - lo[k]) / (GRID - 1) as f64);
    while step.iter().any(|s| *s > 1e-10) {
        let mut moved = false;
        for k in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut y = best.0;
                y[k] = (y[k] + sign * step[k]).clamp(lo[k], hi[k]);
                let v = eval(&y);
                if v < best.1 {
                    best = (y, v);
                    moved = true;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    let (y, objective) = best;
    let allocation = pinned_allocation(instance, sigmoid(y[0]), y[1].exp(), y[2].exp());
    Ok(Some(OracleResult { objective, allocation, evaluations }))
}
