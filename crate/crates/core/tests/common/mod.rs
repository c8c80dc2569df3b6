#![allow(dead_code)]

use wpfl_core::channel::{sample_instance, ChannelConfig, DeviceRanges};
use wpfl_core::model::{dbm_to_watts, derive_learning_constants, LearningParams, Mode, ProblemInstance, SystemParams};

pub fn learning() -> LearningParams {
    derive_learning_constants(4.0, 2.0, 0.25, 1.0 / 3.0, 1e-3).unwrap()
}

pub fn system(n: usize, mode: Mode) -> SystemParams {
    SystemParams {
        n,
        p0: dbm_to_watts(42.0),
        b: 5e5,
        n0: 1e-14,
        phi: 0.9,
        s_model: 28.1e3,
        d0: 1e5,
        e_max: f64::INFINITY,
        mode,
    }
}

pub fn instance(n: usize, mode: Mode, seed: u64) -> ProblemInstance {
    sample_instance(&system(n, mode), &learning(), &DeviceRanges::default(), &ChannelConfig::default(), seed).unwrap()
}
