//! Run configuration file (TOML).
//!
//! Every section is optional and falls back to the built-in defaults, so an
//! empty file describes the default system. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actuation::ActuatorLimits;
use crate::baselines::PdGains;
use crate::error::{Error, Result};
use crate::experiments::{EpisodeConfig, McConfig, Setup};
use crate::kinematics::SpacecraftModel;
use crate::ntsmc::disturbance::DisturbanceConfig;
use crate::ntsmc::GainsConfig;
use crate::reference::ScenarioConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSection {
    pub dt: f64,
    pub horizon: f64,
    pub divergence_speed: f64,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self { dt: 1e-3, horizon: 120.0, divergence_speed: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Default output directory when `--out` is not given.
    pub dir: PathBuf,
    /// Row stride of telemetry written by `simulate`.
    pub telemetry_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), telemetry_stride: 1 }
    }
}

fn euler_gains_default() -> GainsConfig {
    GainsConfig::euler_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: SpacecraftModel,
    pub gains: GainsConfig,
    #[serde(default = "euler_gains_default")]
    pub euler_gains: GainsConfig,
    pub pd_gains: PdGains,
    pub scenario: ScenarioConfig,
    pub disturbance: DisturbanceConfig,
    pub actuators: ActuatorLimits,
    pub episode: EpisodeSection,
    pub mc: McConfig,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: SpacecraftModel::default(),
            gains: GainsConfig::default(),
            euler_gains: GainsConfig::euler_default(),
            pd_gains: PdGains::default(),
            scenario: ScenarioConfig::default(),
            disturbance: DisturbanceConfig::default(),
            actuators: ActuatorLimits::default(),
            episode: EpisodeSection::default(),
            mc: McConfig::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates; the error names the offending field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidParameter { path: field, reason } if field == "config" => {
                Error::invalid(path.display().to_string(), reason)
            }
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.model.validate("model")?;
        let n = self.model.dof();
        self.gains.resolve(n).validate("gains")?;
        self.euler_gains.resolve(n).validate("euler_gains")?;
        self.pd_gains.validate("pd_gains", n)?;
        self.scenario.validate("scenario", n)?;
        self.disturbance.validate("disturbance", n)?;
        self.actuators.validate("actuators")?;
        self.episode_config().validate("episode")?;
        self.mc.validate("mc")?;
        if self.output.telemetry_stride == 0 {
            return Err(Error::invalid("output.telemetry_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            dt: self.episode.dt,
            horizon: self.episode.horizon,
            limits: self.actuators,
            divergence_speed: self.episode.divergence_speed,
        }
    }

    pub fn setup(&self) -> Setup {
        let n = self.model.dof();
        Setup {
            model: self.model.clone(),
            gains: self.gains.resolve(n),
            euler_gains: self.euler_gains.resolve(n),
            pd_gains: self.pd_gains.clone(),
            scenario: self.scenario.clone(),
            disturbance: self.disturbance.clone(),
        }
    }
}
