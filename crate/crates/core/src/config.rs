//! Scenario file (TOML) and its validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ElbowMapConfig, PlantModel, ServoConfig};
use crate::pipeline::PipelineConfig;
use crate::scene::{HandModel, StepperProfile};

/// Shortest run for which a delay estimate is attempted, seconds.
pub const MIN_ESTIMATE_DURATION_S: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    VirtualTime,
    RealTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Salt noise events as a fraction of signal events.
    pub salt_fraction: f64,
    /// Gyro noise standard deviation, deg/s.
    pub gyro_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            salt_fraction: 0.01,
            gyro_sigma: 0.5,
        }
    }
}

/// Injected per-stage latencies, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub capture_ms: f64,
    pub link1_ms: f64,
    pub processing_ms: f64,
    pub link2_ms: f64,
    pub command_ms: f64,
    pub link3_ms: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            capture_ms: 6.0,
            link1_ms: 0.0,
            processing_ms: 9.0,
            link2_ms: 0.0,
            command_ms: 4.0,
            link3_ms: 0.0,
        }
    }
}

impl DelayConfig {
    pub fn zero() -> Self {
        DelayConfig {
            capture_ms: 0.0,
            link1_ms: 0.0,
            processing_ms: 0.0,
            link2_ms: 0.0,
            command_ms: 0.0,
            link3_ms: 0.0,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("capture_ms", self.capture_ms),
            ("link1_ms", self.link1_ms),
            ("processing_ms", self.processing_ms),
            ("link2_ms", self.link2_ms),
            ("command_ms", self.command_ms),
            ("link3_ms", self.link3_ms),
        ]
    }
}

pub(crate) fn ms_to_us(ms: f64) -> u64 {
    (ms * 1000.0).round().max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub address: String,
    /// 0 picks an ephemeral port.
    pub event_port: u16,
    pub roi_port: u16,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            address: "127.0.0.1".into(),
            event_port: 0,
            roi_port: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub duration_s: f64,
    pub seed: u64,
    pub estimate_delay: bool,
    pub stepper: StepperProfile,
    pub hand: HandModel,
    pub noise: NoiseConfig,
    pub pipeline: PipelineConfig,
    pub servo: ServoConfig,
    pub plant: PlantModel,
    pub elbow_map: ElbowMapConfig,
    pub delays: DelayConfig,
    pub network: NetworkConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: Mode::VirtualTime,
            duration_s: 20.0,
            seed: 1,
            estimate_delay: true,
            stepper: StepperProfile::default(),
            hand: HandModel::default(),
            noise: NoiseConfig::default(),
            pipeline: PipelineConfig::default(),
            servo: ServoConfig::default(),
            plant: PlantModel::Servo,
            elbow_map: ElbowMapConfig::default(),
            delays: DelayConfig::default(),
            network: NetworkConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
}

fn invalid(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        msg: msg.into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * 1e6).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s", "must be positive"));
        }
        // event timestamps are 32-bit microseconds
        if self.duration_s > 4000.0 {
            return Err(invalid("duration_s", "must be at most 4000 s"));
        }
        if self.estimate_delay && self.duration_s < MIN_ESTIMATE_DURATION_S {
            return Err(invalid(
                "duration_s",
                format!(
                    "insufficient data: delay estimation needs at least {MIN_ESTIMATE_DURATION_S} s, got {} s",
                    self.duration_s
                ),
            ));
        }
        self.stepper
            .validate()
            .map_err(|e| invalid("stepper", e.to_string()))?;
        self.hand
            .validate(&self.stepper)
            .map_err(|e| invalid("hand", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.noise.salt_fraction) {
            return Err(invalid("noise.salt_fraction", "must be in [0, 1]"));
        }
        if !(self.noise.gyro_sigma >= 0.0 && self.noise.gyro_sigma.is_finite()) {
            return Err(invalid("noise.gyro_sigma", "must be non-negative"));
        }
        self.pipeline
            .validate()
            .map_err(|e| invalid("pipeline", e))?;
        self.servo.validate().map_err(|e| invalid("servo", e))?;
        self.elbow_map
            .validate()
            .map_err(|e| invalid("elbow_map", e))?;
        for (name, v) in self.delays.fields() {
            if !(0.0..=1000.0).contains(&v) {
                return Err(invalid(
                    &format!("delays.{name}"),
                    "must be in [0, 1000] ms",
                ));
            }
        }
        if self.network.address.trim().is_empty() {
            return Err(invalid("network.address", "must not be empty"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip() {
        let c = ScenarioConfig {
            seed: 42,
            mode: Mode::RealTime,
            ..Default::default()
        };
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = ScenarioConfig::from_toml_str(
            "mode = \"real-time\"\nseed = 7\n[servo]\ngain = 500.0\n[pipeline.roi]\nmin_support = 80\n",
        )
        .unwrap();
        assert_eq!(c.mode, Mode::RealTime);
        assert_eq!(c.seed, 7);
        assert_eq!(c.servo.gain, 500.0);
        assert_eq!(c.servo.lookahead_s, 0.08);
        assert_eq!(c.pipeline.roi.min_support, 80);
        assert_eq!(c.delays.processing_ms, 9.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml_str("sede = 3\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[servo]\ngian = 3.0\n").is_err());
    }

    #[test]
    fn short_run_with_estimation_is_insufficient() {
        let c = ScenarioConfig {
            duration_s: 2.0,
            ..Default::default()
        };
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("insufficient data"), "{err}");
        let c = ScenarioConfig {
            duration_s: 2.0,
            estimate_delay: false,
            ..Default::default()
        };
        c.validate().unwrap();
    }

    #[test]
    fn field_level_messages() {
        let mut c = ScenarioConfig::default();
        c.servo.gain = 50.0;
        assert!(c.validate().unwrap_err().to_string().starts_with("servo:"));
        let mut c = ScenarioConfig::default();
        c.delays.link2_ms = -1.0;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("delays.link2_ms:"));
    }
}
