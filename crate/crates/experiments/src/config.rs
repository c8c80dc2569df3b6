//! Experiment configuration files.

use crate::ExperimentError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use wpfl_core::model::{dbm_to_watts, derive_learning_constants, LearningParams, Mode, SystemParams};
use wpfl_core::{ChannelConfig, DeviceRanges, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "P0_dBm")]
    P0Dbm,
    #[serde(rename = "Na")]
    Na,
    #[serde(rename = "D0")]
    D0,
    #[serde(rename = "B")]
    B,
    #[serde(rename = "eps0")]
    Eps0,
    #[serde(rename = "N")]
    N,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::P0Dbm => "P0_dBm",
            SweepVariable::Na => "Na",
            SweepVariable::D0 => "D0",
            SweepVariable::B => "B",
            SweepVariable::Eps0 => "eps0",
            SweepVariable::N => "N",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::P0Dbm, Self::Na, Self::D0, Self::B, Self::Eps0, Self::N].into_iter().find(|v| v.name() == s)
    }

    fn integral(self) -> bool {
        matches!(self, SweepVariable::Na | SweepVariable::N)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// System parameters as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub p0_dbm: f64,
    /// Hz.
    pub b: f64,
    /// W/Hz.
    pub n0: f64,
    pub phi: f64,
    /// Bits.
    pub s_model: f64,
    /// Bits.
    pub d0: f64,
    /// J; `null` or absent for no cap.
    pub e_max: Option<f64>,
    pub mode: Mode,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            n: 10,
            p0_dbm: 42.0,
            b: 5e5,
            n0: 1e-14,
            phi: 0.9,
            s_model: 28.1e3,
            d0: 1e5,
            e_max: None,
            mode: Mode::Fdma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSpec {
    pub l: f64,
    pub gamma: f64,
    pub delta: f64,
    pub xi: f64,
    pub eps0: f64,
}

impl Default for LearningSpec {
    fn default() -> Self {
        Self { l: 4.0, gamma: 2.0, delta: 0.25, xi: 1.0 / 3.0, eps0: 1e-3 }
    }
}

impl LearningSpec {
    pub fn derive(&self) -> Result<LearningParams, ExperimentError> {
        derive_learning_constants(self.l, self.gamma, self.delta, self.xi, self.eps0)
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

/// Everything a grid point does not override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseParams {
    pub system: SystemSpec,
    pub learning: LearningSpec,
    pub channel: ChannelConfig,
    pub devices: DeviceRanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

/// Relative change of the completion time that ends a run, and its
/// iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { eps: 1e-3, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub base: BaseParams,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub stop: StopRule,
}

fn default_realizations() -> usize {
    20
}

/// Parameters of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointParams {
    pub system: SystemParams,
    pub learning: LearningParams,
    pub channel: ChannelConfig,
    pub devices: DeviceRanges,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// A config sweeping `variable` over `grid` with default base parameters.
    pub fn sweep_of(variable: SweepVariable, grid: Vec<f64>, schemes: Vec<Scheme>, realizations: usize) -> Self {
        Self {
            base: BaseParams::default(),
            sweep: Sweep { variable, grid },
            schemes,
            realizations,
            seed_base: 0,
            output: None,
            stop: StopRule::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let grid = &self.sweep.grid;
        if grid.is_empty() {
            return bad("the sweep grid is empty".into());
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return bad("the sweep grid holds a non-finite value".into());
        }
        let rising = grid.windows(2).all(|w| w[0] < w[1]);
        let falling = grid.windows(2).all(|w| w[0] > w[1]);
        if !(rising || falling) {
            return bad(format!("the {} grid must be strictly monotone", self.sweep.variable));
        }
        if self.sweep.variable.integral() && grid.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return bad(format!("{} takes positive integer values", self.sweep.variable));
        }
        if self.schemes.is_empty() {
            return bad("no schemes to run".into());
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return bad("a scheme is listed twice".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if !(self.stop.eps > 0.0) || self.stop.max_iter == 0 {
            return bad("the stop rule needs eps > 0 and max_iter >= 1".into());
        }
        for &v in grid {
            self.point(v)?;
        }
        Ok(())
    }

    /// Base parameters with the sweep variable set to `value`, validated.
    pub fn point(&self, value: f64) -> Result<PointParams, ExperimentError> {
        let s = &self.base.system;
        let mut learning = self.base.learning;
        let mut channel = self.base.channel.clone();
        let mut system = SystemParams {
            n: s.n,
            p0: dbm_to_watts(s.p0_dbm),
            b: s.b,
            n0: s.n0,
            phi: s.phi,
            s_model: s.s_model,
            d0: s.d0,
            e_max: s.e_max.unwrap_or(f64::INFINITY),
            mode: s.mode,
        };
        match self.sweep.variable {
            SweepVariable::P0Dbm => system.p0 = dbm_to_watts(value),
            SweepVariable::Na => channel.na = value as usize,
            SweepVariable::D0 => system.d0 = value,
            SweepVariable::B => system.b = value,
            SweepVariable::Eps0 => learning.eps0 = value,
            SweepVariable::N => system.n = value as usize,
        }
        let at = |e: String| ExperimentError::Config(format!("{} = {value}: {e}", self.sweep.variable));
        let learning = learning.derive().map_err(|e| at(e.to_string()))?;
        channel.validate().map_err(|e| at(e.to_string()))?;
        self.base.devices.validate().map_err(|e| at(e.to_string()))?;
        if system.n == 0 {
            return Err(at("N must be at least 1".into()));
        }
        for (name, v) in [("P0", system.p0), ("B", system.b), ("n0", system.n0), ("s", system.s_model), ("D0", system.d0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(at(format!("{name} must be positive and finite")));
            }
        }
        if !(system.phi > 0.0 && system.phi < 1.0) {
            return Err(at("phi must lie in (0, 1)".into()));
        }
        if !(system.e_max >= 0.0) {
            return Err(at("E_max must be nonnegative".into()));
        }
        Ok(PointParams { system, learning, channel, devices: self.base.devices.clone() })
    }
}
