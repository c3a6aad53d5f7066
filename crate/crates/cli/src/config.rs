//! Run configuration in laboratory units (ns, GHz) and its conversion to the
//! internal units of `noon-core` (ns, rad/ns).

use std::f64::consts::PI;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use noon_core::model::SystemParams;
use noon_core::noise::NoiseParams;
use noon_core::protocol::{reference_params, NoonTarget};

use crate::ConfigError;

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub measurement: MeasurementConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Photon number of the target NOON state.
    pub n: Option<usize>,
    /// `1/g` in ns.
    pub g_inv_ns: f64,
    /// Storage-cavity detuning of the `|1> ↔ |2>` transition in units of `g`.
    pub detuning_ratio: f64,
    /// Coupling-cavity frequency `ω/2π` in GHz.
    pub omega0_ghz: f64,
    /// Duration of a `0 ↔ 1` π-pulse in ns.
    pub t_rabi_ns: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { n: None, g_inv_ns: 20.0, detuning_ratio: 20.0, omega0_ghz: 6.0, t_rabi_ns: 10.0 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub t1_ns: Option<f64>,
    pub t2_ns: Option<f64>,
    /// Photon loss rates of C1, C2, CC in 1/ns.
    pub cavity_loss_per_ns: [f64; 3],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    /// Relative NOON phase; the phase reported by the simulation when unset.
    pub phi: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementConfig {
    pub sigma: f64,
    /// Displacement disc radius; `N` when unset.
    pub radius: Option<f64>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub kappa: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self { sigma: 0.0, radius: None, count: None, seed: None, kappa: noon_core::estimation::DEFAULT_KAPPA }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("config {}: {e}", path.display())).into())
    }

    pub fn n(&self) -> anyhow::Result<usize> {
        match self.system.n {
            Some(0) => Err(ConfigError("invalid N: photon number must be at least 1".into()).into()),
            Some(n) => Ok(n),
            None => Err(ConfigError("photon number N is required (--N or system.n)".into()).into()),
        }
    }

    pub fn g(&self) -> f64 {
        1.0 / self.system.g_inv_ns
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        self.measurement
            .seed
            .ok_or_else(|| ConfigError("--seed is required for stochastic commands".into()).into())
    }

    pub fn radius(&self, n: usize) -> f64 {
        self.measurement.radius.unwrap_or(n as f64)
    }

    pub fn system_params(&self) -> anyhow::Result<SystemParams> {
        let s = &self.system;
        for (name, v) in [("g_inv_ns", s.g_inv_ns), ("t_rabi_ns", s.t_rabi_ns), ("detuning_ratio", s.detuning_ratio)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError(format!("{name} must be positive and finite")).into());
            }
        }
        let omega0 = 2.0 * PI * s.omega0_ghz;
        let mut params = reference_params(self.n()?, self.g(), s.detuning_ratio, omega0, s.t_rabi_ns)?;
        if let Some(t2) = self.noise.t2_ns {
            params.t2 = t2;
        }
        Ok(params)
    }

    pub fn noise_params(&self) -> anyhow::Result<NoiseParams> {
        let n = &self.noise;
        let noise = NoiseParams { t1: [n.t1_ns; 2], t2: [n.t2_ns; 2], cavity_loss: n.cavity_loss_per_ns };
        noise.validate()?;
        Ok(noise)
    }

    pub fn target(&self, reported_phi: f64) -> anyhow::Result<NoonTarget> {
        Ok(NoonTarget::new(self.n()?, self.target.phi.unwrap_or(reported_phi))?)
    }

    /// SHA-256 of the canonical JSON form, tagged with the command name.
    pub fn digest(&self, command: &str) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(json.as_bytes());
        format!("{:x}", h.finalize())
    }
}
