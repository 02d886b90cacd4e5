//! Sweep configuration: TOML-backed experiment description plus per-point
//! config materialization.

use crate::modem::{NoiseModel, SystemConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Sweep axis, matching the published performance figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Non-ISI region length G (the effective pilot length).
    G,
    /// Transmit power in dBm.
    PowerDbm,
    /// Number of active terminals K_a.
    Ka,
    /// NLoS path count Q per terminal.
    Q,
}

/// Optional overrides applied on top of the chosen profile.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemOverrides {
    pub delay_bins: Option<usize>,
    pub doppler_bins: Option<usize>,
    pub ts_len: Option<usize>,
    pub cir_len: Option<usize>,
    pub subcarrier_spacing_hz: Option<f64>,
    pub carrier_hz: Option<f64>,
    pub bits_per_symbol: Option<usize>,
    pub array_x: Option<usize>,
    pub array_y: Option<usize>,
    pub terminals: Option<usize>,
    pub active_terminals: Option<usize>,
    pub activity_threshold: Option<f64>,
    pub somp_threshold_factor: Option<f64>,
    pub somp_max_iters: Option<usize>,
    pub tx_power_dbm: Option<f64>,
    pub rician_factor_db: Option<f64>,
    pub nlos_paths: Option<usize>,
    pub nlos_excess_max: Option<usize>,
    pub doppler_polish: Option<bool>,
    pub lsqr_tol: Option<f64>,
    pub lsqr_max_iters: Option<usize>,
}

impl SystemOverrides {
    fn apply(&self, cfg: &mut SystemConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            delay_bins,
            doppler_bins,
            ts_len,
            cir_len,
            subcarrier_spacing_hz,
            carrier_hz,
            bits_per_symbol,
            array_x,
            array_y,
            terminals,
            active_terminals,
            activity_threshold,
            somp_threshold_factor,
            somp_max_iters,
            tx_power_dbm,
            rician_factor_db,
            nlos_paths,
            nlos_excess_max,
            doppler_polish,
            lsqr_tol,
            lsqr_max_iters
        );
    }
}

fn default_profile() -> String {
    "desk".to_string()
}

fn default_trials() -> usize {
    1
}

/// One sweep description; see `configs/sweep-example.toml` in the repository
/// root for the concrete syntax.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub system: SystemOverrides,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn base_config(&self) -> Result<SystemConfig, ConfigError> {
        let mut cfg = match self.profile.as_str() {
            "desk" => SystemConfig::desk(),
            "paper" => SystemConfig::paper(),
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown profile '{other}' (expected 'desk' or 'paper')"
                )))
            }
        };
        self.system.apply(&mut cfg);
        if let Some(noise) = self.noise {
            cfg.noise = noise;
        }
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Materialize the system config at one axis value.
    pub fn config_at(&self, value: f64) -> Result<SystemConfig, ConfigError> {
        let mut cfg = self.base_config()?;
        match self.axis {
            SweepAxis::G => {
                let g = value as usize;
                if g == 0 || value.fract() != 0.0 {
                    return Err(ConfigError::Invalid(format!(
                        "axis 'g' needs positive integers, got {value}"
                    )));
                }
                cfg = cfg.with_non_isi_len(g);
            }
            SweepAxis::PowerDbm => cfg.tx_power_dbm = value,
            SweepAxis::Ka => {
                if value.fract() != 0.0 {
                    return Err(ConfigError::Invalid(format!(
                        "axis 'ka' needs integers, got {value}"
                    )));
                }
                cfg.active_terminals = value as usize;
            }
            SweepAxis::Q => {
                if value.fract() != 0.0 {
                    return Err(ConfigError::Invalid(format!(
                        "axis 'q' needs integers, got {value}"
                    )));
                }
                cfg.nlos_paths = value as usize;
            }
        }
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::Invalid("trials must be >= 1".into()));
        }
        if self.values.is_empty() {
            return Err(ConfigError::Invalid("values must be non-empty".into()));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::Invalid(
                "axis values must be strictly increasing".into(),
            ));
        }
        for &v in &self.values {
            self.config_at(v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
profile = "desk"
seed = 42
trials = 5
workers = 2
axis = "g"
values = [10.0, 20.0, 40.0]

[system]
active_terminals = 3

[noise]
mode = "snr_db"
snr_db = 15.0
"#;

    #[test]
    fn parses_and_materializes() {
        let exp = ExperimentConfig::from_toml(SAMPLE).unwrap();
        exp.validate().unwrap();
        assert_eq!(exp.trials, 5);
        let cfg = exp.config_at(40.0).unwrap();
        assert_eq!(cfg.non_isi_len(), 40);
        assert_eq!(cfg.active_terminals, 3);
        assert!(matches!(cfg.noise, NoiseModel::SnrDb { snr_db } if snr_db == 15.0));
    }

    #[test]
    fn rejects_zero_trials() {
        let text = SAMPLE.replace("trials = 5", "trials = 0");
        let exp = ExperimentConfig::from_toml(&text).unwrap();
        assert!(exp.validate().is_err());
    }

    #[test]
    fn rejects_non_increasing_values() {
        let text = SAMPLE.replace("[10.0, 20.0, 40.0]", "[10.0, 10.0]");
        let exp = ExperimentConfig::from_toml(&text).unwrap();
        assert!(exp.validate().is_err());
    }

    #[test]
    fn parse_errors_carry_line_information() {
        let err = ExperimentConfig::from_toml("axis = \"nope\"\nvalues = [1.0]").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "diagnostic lacked location: {msg}");
    }

    #[test]
    fn unknown_profile_rejected() {
        let text = SAMPLE.replace("\"desk\"", "\"galaxy\"");
        let exp = ExperimentConfig::from_toml(&text).unwrap();
        assert!(exp.base_config().is_err());
    }
}
