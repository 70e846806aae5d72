//! Aggregate pipeline configuration (TOML, unknown keys rejected).

use serde::{Deserialize, Serialize};

use crate::libev::{HeuristicConfig, RasterConfig};
use crate::localmap::LocalMapConfig;
use crate::registration::RegistrationParams;
use crate::segmentation::SegmentationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Offset applied to the ground truth for the frame-0 guess: (x m, y m, yaw deg).
    pub initial_offset: [f64; 3],
    /// Cap on registration points per frame; instances are subsampled by a common stride.
    pub max_registration_points: usize,
    /// Instances with fewer back-projected points are dropped.
    pub min_instance_points: usize,
    pub flag_distance_m: f64,
    pub flag_yaw_deg: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            initial_offset: [0.3, 0.3, 1.0],
            max_registration_points: 3000,
            min_instance_points: 3,
            flag_distance_m: 2.0,
            flag_yaw_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub segmentation: SegmentationConfig,
    pub local_map: LocalMapConfig,
    pub raster: RasterConfig,
    pub heuristic: HeuristicConfig,
    pub registration: RegistrationParams,
    pub eval: EvalConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {field}: {message}")]
    Invalid { field: String, message: String },
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |field: &str, message: String| ConfigError::Invalid {
            field: field.into(),
            message,
        };
        self.segmentation
            .validate()
            .map_err(|e| inv("segmentation", e.to_string()))?;
        if !(self.local_map.eta > 0.0) {
            return Err(inv("local_map.eta", "must be positive".into()));
        }
        if !(self.raster.resolution > 0.0) || !(self.raster.extent > self.raster.resolution) {
            return Err(inv("raster", "resolution must be positive and below extent".into()));
        }
        self.registration
            .validate()
            .map_err(|e| inv("registration", e.to_string()))?;
        if self.eval.max_registration_points == 0 {
            return Err(inv("eval.max_registration_points", "must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_unknown_keys() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        assert!(PipelineConfig::from_toml_str("[registration]\nmax_dst = 1.0\n").is_err());
        let c = PipelineConfig::from_toml_str("[local_map]\neta = 25.0\n").unwrap();
        assert_eq!(c.local_map.eta, 25.0);
    }
}
