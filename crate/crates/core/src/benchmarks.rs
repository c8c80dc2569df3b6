//! Comparison schemes obtained by freezing part of the decision.

use crate::model::{Mode, ProblemInstance};
use crate::sca::{run_frozen, Frozen, RunOptions, ScaError, Trace};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Local accuracy used by the fixed-accuracy scheme.
pub const FIXED_ETA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Everything optimized.
    #[serde(rename = "S2FL")]
    S2fl,
    /// Everything optimized over a NOMA uplink.
    #[serde(rename = "S2FL-NOMA")]
    S2flNoma,
    /// Sensing time preset to the slowest device's requirement.
    #[serde(rename = "FTD")]
    Ftd,
    /// Local accuracy fixed at [`FIXED_ETA`].
    #[serde(rename = "FLA")]
    Fla,
    /// Beam power split in proportion to the channel gains.
    #[serde(rename = "PPT")]
    Ppt,
    /// Bandwidth split equally.
    #[serde(rename = "EBA")]
    Eba,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [Scheme::S2fl, Scheme::S2flNoma, Scheme::Ftd, Scheme::Fla, Scheme::Ppt, Scheme::Eba];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::S2fl => "S2FL",
            Scheme::S2flNoma => "S2FL-NOMA",
            Scheme::Ftd => "FTD",
            Scheme::Fla => "FLA",
            Scheme::Ppt => "PPT",
            Scheme::Eba => "EBA",
        }
    }

    /// Uplink the scheme insists on; the others run on the instance's uplink.
    pub fn uplink(self) -> Option<Mode> {
        match self {
            Scheme::S2flNoma => Some(Mode::Noma),
            _ => None,
        }
    }

    /// Frozen values for `instance`.
    pub fn frozen(self, instance: &ProblemInstance) -> Frozen {
        let sys = &instance.system;
        let mut frozen = Frozen::none();
        match self {
            Scheme::S2fl | Scheme::S2flNoma => {}
            Scheme::Ftd => {
                frozen.tau_s = Some(instance.devices.iter().map(|d| sys.d0 / d.r).fold(0.0, f64::max));
            }
            Scheme::Fla => frozen.eta = Some(FIXED_ETA),
            Scheme::Ppt => {
                let total: f64 = instance.devices.iter().map(|d| d.h).sum();
                frozen.beam_power = Some(instance.devices.iter().map(|d| sys.p0 * d.h / total).collect());
            }
            Scheme::Eba => {
                if sys.mode == Mode::Fdma {
                    frozen.bandwidth = Some(vec![sys.b / instance.n() as f64; instance.n()]);
                }
            }
        }
        frozen
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme `{s}` (expected one of S2FL, S2FL-NOMA, FTD, FLA, PPT, EBA)"))
    }
}

/// Runs `scheme` on the network of `instance`, switched to the scheme's
/// uplink if it has one, with the scheme's variables frozen.
pub fn run_benchmark(instance: &ProblemInstance, scheme: Scheme, opts: &RunOptions) -> Result<Trace, ScaError> {
    let instance = match scheme.uplink() {
        Some(mode) => instance.with_mode(mode),
        None => instance.clone(),
    };
    run_frozen(&instance, &scheme.frozen(&instance), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_tags_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.tag().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("fla".parse::<Scheme>().unwrap(), Scheme::Fla);
        assert!("GLA".parse::<Scheme>().is_err());
        for s in Scheme::ALL {
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.tag()));
        }
    }
}
