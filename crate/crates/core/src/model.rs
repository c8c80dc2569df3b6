//! Physical and learning model of one harvest/sense/train/upload round.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("learning parameters violate `{0}`")]
    InvalidLearning(&'static str),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("eta = 1 makes the number of global rounds unbounded")]
    Unbounded,
    #[error("device index {index} out of range for {n} devices")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("allocation has {got} entries in `{field}`, instance has {expected} devices")]
    DimensionMismatch { field: &'static str, expected: usize, got: usize },
}

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Learning constants plus the derived round scales `a` and `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    /// Lipschitz constant of the local loss.
    pub l: f64,
    /// Strong-convexity constant.
    pub gamma: f64,
    /// Local step size.
    pub delta: f64,
    /// Hyper-learning parameter.
    pub xi: f64,
    /// Target global accuracy.
    pub eps0: f64,
    /// Global-round scale.
    pub a: f64,
    /// Local-round scale.
    pub nu: f64,
}

/// Validates the learning constants and derives `a` and `nu`.
///
/// `eps0 = 1` is accepted and gives `a = 0`, i.e. no global rounds are needed.
pub fn derive_learning_constants(
    l: f64,
    gamma: f64,
    delta: f64,
    xi: f64,
    eps0: f64,
) -> Result<LearningParams, ModelError> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(ModelError::InvalidLearning("L > 0"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ModelError::InvalidLearning("gamma > 0"));
    }
    if !(delta > 0.0) {
        return Err(ModelError::InvalidLearning("delta > 0"));
    }
    if !(delta < 2.0 / l) {
        return Err(ModelError::InvalidLearning("delta < 2/L"));
    }
    if !(xi > 0.0) {
        return Err(ModelError::InvalidLearning("xi > 0"));
    }
    if !(xi < gamma / l) {
        return Err(ModelError::InvalidLearning("xi < gamma/L"));
    }
    if !(eps0 > 0.0 && eps0 <= 1.0) {
        return Err(ModelError::InvalidLearning("0 < eps0 < 1"));
    }
    let a = -2.0 * l * l * eps0.ln() / (gamma * gamma * xi);
    let nu = 2.0 / ((2.0 - l * delta) * delta * gamma * std::f64::consts::LN_2);
    Ok(LearningParams { l, gamma, delta, xi, eps0, a: a.max(0.0), nu })
}

impl LearningParams {
    pub fn local_rounds(&self, eta: f64) -> f64 {
        self.nu * (1.0 / eta).ln()
    }

    pub fn global_rounds(&self, eta: f64) -> Result<f64, ModelError> {
        if self.a == 0.0 {
            return Ok(0.0);
        }
        if eta >= 1.0 {
            return Err(ModelError::Unbounded);
        }
        Ok(self.a / (1.0 - eta))
    }
}

/// `(eta_loc, eta_glo)` at local accuracy `eta`, kept real-valued.
pub fn round_counts(learning: &LearningParams, eta: f64) -> Result<(f64, f64), ModelError> {
    Ok((learning.local_rounds(eta), learning.global_rounds(eta)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub index: usize,
    /// Sensing rate in bit/s.
    pub r: f64,
    /// Sensing energy in J/bit.
    pub q_s: f64,
    /// Participation reward energy in J/bit.
    pub q_r: f64,
    /// CPU cycles per bit.
    pub c: f64,
    /// Energy per cycle is `zeta * f^2`.
    pub zeta: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub p_max: f64,
    /// Effective power gain `|g|^2`.
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fdma,
    Noma,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fdma => "fdma",
            Mode::Noma => "noma",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    /// Access-point power budget, W.
    pub p0: f64,
    /// System bandwidth, Hz.
    pub b: f64,
    /// Noise power density, W/Hz.
    pub n0: f64,
    /// Harvesting efficiency.
    pub phi: f64,
    /// Model update size, bits.
    pub s_model: f64,
    /// Sensed data per round, bits.
    pub d0: f64,
    /// Source energy cap per round, J. Serialized as `null` when unbounded.
    #[serde(with = "infinite_as_null")]
    pub e_max: f64,
    pub mode: Mode,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub system: SystemParams,
    pub learning: LearningParams,
    /// In NOMA mode this is the decoding order, strongest gain first.
    pub devices: Vec<DeviceParams>,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.devices.len()
    }

    /// The same network over another uplink. NOMA devices are kept in
    /// decoding order (strongest gain first), FDMA devices in draw order.
    pub fn with_mode(&self, mode: Mode) -> ProblemInstance {
        let mut out = self.clone();
        out.system.mode = mode;
        match mode {
            Mode::Noma => out.devices.sort_by(|a, b| b.h.total_cmp(&a.h).then(a.index.cmp(&b.index))),
            Mode::Fdma => out.devices.sort_by_key(|d| d.index),
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let s = &self.system;
        let bad = |m: String| Err(ModelError::InvalidInstance(m));
        if s.n == 0 {
            return bad("N must be at least 1".into());
        }
        if self.devices.len() != s.n {
            return bad(format!("{} devices for N = {}", self.devices.len(), s.n));
        }
        for (name, v) in [("P0", s.p0), ("B", s.b), ("n0", s.n0), ("s", s.s_model), ("D0", s.d0)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(s.phi > 0.0 && s.phi < 1.0) {
            return bad(format!("phi must lie in (0, 1), got {}", s.phi));
        }
        if !(s.e_max >= 0.0) {
            return bad(format!("E_max must be nonnegative, got {}", s.e_max));
        }
        for d in &self.devices {
            let fields = [("r", d.r), ("q_s", d.q_s), ("q_r", d.q_r), ("C", d.c), ("zeta", d.zeta)];
            for (name, v) in fields.into_iter().chain([("f_min", d.f_min), ("p_max", d.p_max), ("h", d.h)]) {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("device {}: {name} must be positive, got {v}", d.index));
                }
            }
            if !(d.f_min <= d.f_max && d.f_max.is_finite()) {
                return bad(format!("device {}: f_min > f_max", d.index));
            }
        }
        if s.mode == Mode::Noma && self.devices.windows(2).any(|w| w[0].h < w[1].h) {
            return bad("NOMA devices must be sorted by non-increasing gain".into());
        }
        Ok(())
    }
}

/// One decision point. `bandwidth` is `None` in NOMA mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Energy beam power per device, W.
    pub beam_power: Vec<f64>,
    /// Uplink transmit power, W.
    pub tx_power: Vec<f64>,
    /// CPU frequency, cycles/s.
    pub cpu_freq: Vec<f64>,
    pub bandwidth: Option<Vec<f64>>,
    pub tau_h: f64,
    pub tau_s: f64,
    pub tau_l: f64,
    pub tau_c: f64,
    pub eta: f64,
}

impl Allocation {
    pub fn round_time(&self) -> f64 {
        self.tau_h + self.tau_s + self.tau_l + self.tau_c
    }

    fn check_dims(&self, n: usize, mode: Mode) -> Result<(), ModelError> {
        for (field, v) in [("beam_power", &self.beam_power), ("tx_power", &self.tx_power), ("cpu_freq", &self.cpu_freq)] {
            if v.len() != n {
                return Err(ModelError::DimensionMismatch { field, expected: n, got: v.len() });
            }
        }
        match (&self.bandwidth, mode) {
            (Some(b), Mode::Fdma) if b.len() != n => {
                Err(ModelError::DimensionMismatch { field: "bandwidth", expected: n, got: b.len() })
            }
            (None, Mode::Fdma) => Err(ModelError::DimensionMismatch { field: "bandwidth", expected: n, got: 0 }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub harvested: Vec<f64>,
    pub reward: Vec<f64>,
    pub sensing: Vec<f64>,
    pub local: Vec<f64>,
    pub transmit: Vec<f64>,
}

impl EnergyBreakdown {
    pub fn consumed(&self, n: usize) -> f64 {
        self.reward[n] + self.sensing[n] + self.local[n] + self.transmit[n]
    }

    /// Harvested minus consumed energy of device `n`.
    pub fn slack(&self, n: usize) -> f64 {
        self.harvested[n] - self.consumed(n)
    }
}

/// Per-device energies of one round.
pub fn energy_breakdown(instance: &ProblemInstance, alloc: &Allocation) -> EnergyBreakdown {
    let phi = instance.system.phi;
    let eta_loc = instance.learning.local_rounds(alloc.eta);
    let mut e = EnergyBreakdown {
        harvested: Vec::with_capacity(instance.n()),
        reward: Vec::with_capacity(instance.n()),
        sensing: Vec::with_capacity(instance.n()),
        local: Vec::with_capacity(instance.n()),
        transmit: Vec::with_capacity(instance.n()),
    };
    for (n, d) in instance.devices.iter().enumerate() {
        let data = d.r * alloc.tau_s;
        let f = alloc.cpu_freq[n];
        e.harvested.push(phi * alloc.tau_h * alloc.beam_power[n] * d.h);
        e.reward.push(d.q_r * data);
        e.sensing.push(d.q_s * data);
        // no data means no training work, whatever eta says
        e.local.push(if data == 0.0 { 0.0 } else { eta_loc * d.zeta * d.c * data * f * f });
        e.transmit.push(alloc.tx_power[n] * alloc.tau_c);
    }
    e
}

/// Uplink rate of device `n` in bit/s.
pub fn achievable_rate(instance: &ProblemInstance, alloc: &Allocation, n: usize) -> Result<f64, ModelError> {
    let count = instance.n();
    if n >= count {
        return Err(ModelError::IndexOutOfRange { index: n, n: count });
    }
    let s = &instance.system;
    let h = instance.devices[n].h;
    let p = alloc.tx_power[n];
    if p <= 0.0 {
        return Ok(0.0);
    }
    Ok(match s.mode {
        Mode::Fdma => {
            let b = alloc
                .bandwidth
                .as_ref()
                .ok_or(ModelError::DimensionMismatch { field: "bandwidth", expected: count, got: 0 })?[n];
            fdma_rate(b, p, h, s.n0)
        }
        Mode::Noma => {
            let interference: f64 =
                instance.devices[n + 1..].iter().zip(&alloc.tx_power[n + 1..]).map(|(d, pk)| pk * d.h).sum();
            s.b * (1.0 + h * p / (s.n0 * s.b + interference)).log2()
        }
    })
}

/// `b log2(1 + h p / (n0 b))`, extended by 0 at `b = 0`.
pub fn fdma_rate(b: f64, p: f64, h: f64, n0: f64) -> f64 {
    if b <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    b * (h * p / (n0 * b)).ln_1p() / std::f64::consts::LN_2
}

/// `eta_glo * (tau_h + tau_s + tau_l + tau_c)`.
pub fn total_completion_time(alloc: &Allocation, learning: &LearningParams) -> Result<f64, ModelError> {
    let rounds = learning.global_rounds(alloc.eta)?;
    Ok(rounds * alloc.round_time())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Harvested energy covers reward, sensing, training and upload.
    EnergyBalance,
    /// Local training finishes within `tau_l`.
    LocalTime,
    /// The model update is delivered within `tau_c`.
    Upload,
    /// Source energy per round stays below `E_max`.
    SourceEnergy,
    /// Every device senses at least `D0` bits.
    SensingData,
    TxPower,
    BeamBudget,
    Bandwidth,
    CpuRange,
    Accuracy,
    NonNegative,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One constraint evaluated as `slack >= 0`; `scale` is the magnitude the
/// relative tolerance is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    pub device: Option<usize>,
    pub slack: f64,
    pub scale: f64,
}

impl ConstraintCheck {
    pub fn satisfied(&self, tol_rel: f64) -> bool {
        self.slack >= -tol_rel * self.scale
    }

    pub fn relative_violation(&self) -> f64 {
        (-self.slack / self.scale).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
    pub tol_rel: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn violations(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(move |c| !c.satisfied(self.tol_rel))
    }

    /// Check with the largest relative violation.
    pub fn worst(&self) -> Option<&ConstraintCheck> {
        self.checks.iter().max_by(|a, b| a.relative_violation().total_cmp(&b.relative_violation()))
    }

    pub fn max_relative_violation(&self) -> f64 {
        self.worst().map_or(0.0, |c| c.relative_violation())
    }
}

/// Evaluates every constraint of the exact problem for the instance's mode.
///
/// A dimension mismatch is reported as a violated `NonNegative` check rather
/// than an error.
pub fn check_feasibility(instance: &ProblemInstance, alloc: &Allocation, tol_rel: f64) -> FeasibilityReport {
    let sys = &instance.system;
    let n_dev = instance.n();
    if alloc.check_dims(n_dev, sys.mode).is_err() {
        let check = ConstraintCheck { kind: ConstraintKind::NonNegative, device: None, slack: f64::NEG_INFINITY, scale: 1.0 };
        return FeasibilityReport { checks: vec![check], tol_rel, feasible: false };
    }
    let mut checks = Vec::new();
    let mut push = |kind, device, lhs: f64, rhs: f64| {
        // lhs <= rhs
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        let slack = if lhs.is_nan() || rhs.is_nan() { f64::NEG_INFINITY } else { rhs - lhs };
        checks.push(ConstraintCheck { kind, device, slack, scale });
    };

    for (kind, v) in [(ConstraintKind::NonNegative, alloc.tau_h), (ConstraintKind::NonNegative, alloc.tau_l), (ConstraintKind::NonNegative, alloc.tau_c)] {
        push(kind, None, -v, 0.0);
    }
    // eta must be strictly positive; NaN marks the bound as violated at any tolerance
    push(ConstraintKind::Accuracy, None, if alloc.eta > 0.0 { -alloc.eta } else { f64::NAN }, 0.0);
    push(ConstraintKind::Accuracy, None, alloc.eta, 1.0);

    let energy = energy_breakdown(instance, alloc);
    let eta_loc = instance.learning.local_rounds(alloc.eta);
    for (n, d) in instance.devices.iter().enumerate() {
        let consumed = energy.consumed(n);
        push(ConstraintKind::EnergyBalance, Some(n), consumed, energy.harvested[n]);
        let f = alloc.cpu_freq[n];
        let work = eta_loc * d.c * d.r * alloc.tau_s;
        let train_time = if work == 0.0 { 0.0 } else { work / f };
        push(ConstraintKind::LocalTime, Some(n), train_time, alloc.tau_l);
        let rate = achievable_rate(instance, alloc, n).unwrap_or(0.0);
        push(ConstraintKind::Upload, Some(n), sys.s_model, alloc.tau_c * rate);
        push(ConstraintKind::SensingData, Some(n), sys.d0, d.r * alloc.tau_s);
        push(ConstraintKind::TxPower, Some(n), -alloc.tx_power[n], 0.0);
        push(ConstraintKind::TxPower, Some(n), alloc.tx_power[n], d.p_max);
        push(ConstraintKind::BeamBudget, Some(n), -alloc.beam_power[n], 0.0);
        push(ConstraintKind::CpuRange, Some(n), d.f_min, f);
        push(ConstraintKind::CpuRange, Some(n), f, d.f_max);
    }
    let total_beam: f64 = alloc.beam_power.iter().sum();
    push(ConstraintKind::BeamBudget, None, total_beam, sys.p0);
    if sys.e_max.is_finite() {
        push(ConstraintKind::SourceEnergy, None, total_beam * alloc.tau_h, sys.e_max);
    }
    if let (Mode::Fdma, Some(b)) = (sys.mode, &alloc.bandwidth) {
        for (n, &bn) in b.iter().enumerate() {
            push(ConstraintKind::Bandwidth, Some(n), -bn, 0.0);
        }
        push(ConstraintKind::Bandwidth, None, b.iter().sum(), sys.b);
    }
    let feasible = checks.iter().all(|c| c.satisfied(tol_rel));
    FeasibilityReport { checks, tol_rel, feasible }
}
