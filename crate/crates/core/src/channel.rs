//! Seeded network realizations with Rician energy-beam channels.
//!
//! Each device draws from its own ChaCha20 stream: the generator is seeded
//! with the instance seed and switched to stream `device + 1`. Within a
//! stream the draw order is distance, workload, sensing rate, sensing energy,
//! reward energy, then `Na` complex normal NLoS entries (real part first).

use crate::model::{DeviceParams, LearningParams, ModelError, ProblemInstance, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

/// Smallest admissible device distance, m.
pub const MIN_DISTANCE: f64 = 1e-3;

/// Version tag written into serialized instances.
pub const INSTANCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub k_rician: f64,
    /// Antennas per energy beam.
    pub na: usize,
    /// Device distance range, m.
    pub dist_range: [f64; 2],
    /// Average fading power is `fading_coef * distance^(-path_loss_exp)`.
    pub fading_coef: f64,
    pub path_loss_exp: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { k_rician: 3.0, na: 4, dist_range: [1.0, 5.0], fading_coef: 5e-4, path_loss_exp: 2.0 }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidInstance(m));
        if !(self.k_rician >= 0.0) {
            return bad(format!("Rician factor must be nonnegative, got {}", self.k_rician));
        }
        if self.na == 0 {
            return bad("at least one antenna per beam".into());
        }
        let [lo, hi] = self.dist_range;
        if !(lo >= MIN_DISTANCE && lo <= hi && hi.is_finite()) {
            return bad(format!("distance range [{lo}, {hi}] is invalid"));
        }
        if !(self.fading_coef > 0.0 && self.path_loss_exp.is_finite()) {
            return bad("fading coefficient must be positive".into());
        }
        Ok(())
    }

    pub fn mean_fading_power(&self, distance: f64) -> f64 {
        self.fading_coef * distance.powf(-self.path_loss_exp)
    }
}

/// Ranges the per-device parameters are drawn from, plus the fixed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceRanges {
    pub c: [f64; 2],
    pub r: [f64; 2],
    pub q_s: [f64; 2],
    pub q_r: [f64; 2],
    pub f_min: f64,
    pub f_max: f64,
    pub p_max: f64,
    pub zeta: f64,
}

impl Default for DeviceRanges {
    fn default() -> Self {
        Self {
            c: [10.0, 20.0],
            r: [1e6, 5e6],
            q_s: [1e-12, 1e-11],
            q_r: [1e-12, 1e-11],
            f_min: 1e8,
            f_max: 2e9,
            p_max: 0.01,
            zeta: 1e-28,
        }
    }
}

impl DeviceRanges {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, [lo, hi]) in [("C", self.c), ("r", self.r), ("q_s", self.q_s), ("q_r", self.q_r)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(ModelError::InvalidInstance(format!("range for {name} is [{lo}, {hi}]")));
            }
        }
        if !(self.f_min > 0.0 && self.f_min <= self.f_max && self.p_max > 0.0 && self.zeta > 0.0) {
            return Err(ModelError::InvalidInstance("fixed device parameters must be positive".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        // still consume a draw so the stream layout does not depend on the ranges
        let _: f64 = rng.random();
        return lo;
    }
    Uniform::new_inclusive(lo, hi).expect("validated range").sample(rng)
}

/// Squared Euclidean norm of a complex vector given as `(re, im)` pairs.
pub fn effective_gain(g: &[(f64, f64)]) -> f64 {
    g.iter().map(|(re, im)| re * re + im * im).sum()
}

/// Draws one Rician channel vector with mean power `g_bar` per unit-norm LoS.
pub fn sample_channel(rng: &mut impl Rng, g_bar: f64, cfg: &ChannelConfig) -> Vec<(f64, f64)> {
    let k = cfg.k_rician;
    let na = cfg.na as f64;
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("positive std");
    let (los_w, nlos_w) = if k.is_infinite() {
        (g_bar.sqrt(), 0.0)
    } else {
        ((k * g_bar / (k + 1.0)).sqrt(), (g_bar / (k + 1.0)).sqrt())
    };
    let los = 1.0 / na.sqrt();
    (0..cfg.na)
        .map(|_| {
            let re = normal.sample(rng);
            let im = normal.sample(rng);
            (los_w * los + nlos_w * re, nlos_w * im)
        })
        .collect()
}

/// Samples a network realization; identical for identical arguments.
///
/// `system.n` fixes the device count. NOMA instances come out in decoding
/// order; `DeviceParams::index` keeps the draw order.
pub fn sample_instance(
    system: &SystemParams,
    learning: &LearningParams,
    ranges: &DeviceRanges,
    channel: &ChannelConfig,
    seed: u64,
) -> Result<ProblemInstance, ModelError> {
    channel.validate()?;
    ranges.validate()?;
    let mut devices = Vec::with_capacity(system.n);
    for index in 0..system.n {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index as u64 + 1);
        let distance = uniform(&mut rng, channel.dist_range);
        let c = uniform(&mut rng, ranges.c);
        let r = uniform(&mut rng, ranges.r);
        let q_s = uniform(&mut rng, ranges.q_s);
        let q_r = uniform(&mut rng, ranges.q_r);
        let g_bar = channel.mean_fading_power(distance);
        let mut h = 0.0;
        // an exactly zero gain has probability zero; redraw if it happens
        while h <= 0.0 {
            h = effective_gain(&sample_channel(&mut rng, g_bar, channel));
        }
        devices.push(DeviceParams {
            index,
            r,
            q_s,
            q_r,
            c,
            zeta: ranges.zeta,
            f_min: ranges.f_min,
            f_max: ranges.f_max,
            p_max: ranges.p_max,
            h,
        });
    }
    let instance = ProblemInstance { system: system.clone(), learning: *learning, devices, seed }.with_mode(system.mode);
    instance.validate()?;
    Ok(instance)
}

#[derive(Serialize, Deserialize)]
struct VersionedInstance {
    version: u32,
    instance: ProblemInstance,
}

pub fn instance_to_json(instance: &ProblemInstance) -> String {
    let doc = VersionedInstance { version: INSTANCE_FORMAT_VERSION, instance: instance.clone() };
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}

pub fn instance_from_json(text: &str) -> Result<ProblemInstance, ModelError> {
    let doc: VersionedInstance =
        serde_json::from_str(text).map_err(|e| ModelError::InvalidInstance(format!("bad instance JSON: {e}")))?;
    if doc.version != INSTANCE_FORMAT_VERSION {
        return Err(ModelError::InvalidInstance(format!(
            "instance format version {} is not supported (expected {INSTANCE_FORMAT_VERSION})",
            doc.version
        )));
    }
    doc.instance.validate()?;
    Ok(doc.instance)
}
