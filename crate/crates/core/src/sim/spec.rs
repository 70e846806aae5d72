//! Scenario description document (TOML).
//!
//! ```toml
//! template = "intersection"
//! seed = 7
//! frames = 500
//!
//! [sensor]
//! rings = 32
//! wet_road = false
//!
//! [odometry]
//! trans_sigma_m = 0.01
//! yaw_sigma_deg = 0.05
//! ```
//!
//! Every field has a default; unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    StraightRoad,
    Intersection,
    Loop,
    MarkingFreeGap,
}

impl std::str::FromStr for Template {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "straight-road" => Ok(Self::StraightRoad),
            "intersection" => Ok(Self::Intersection),
            "loop" => Ok(Self::Loop),
            "marking-free-gap" => Ok(Self::MarkingFreeGap),
            _ => Err(format!("unknown template `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityDist {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub rings: u32,
    pub ring_min_deg: f64,
    pub ring_max_deg: f64,
    pub azimuth_step_deg: f64,
    pub height_m: f64,
    pub max_range_m: f64,
    /// Isotropic per-axis point noise.
    pub range_noise_m: f64,
    /// Fraction of beams returning from off-ground clutter.
    pub obstacle_fraction: f64,
    pub asphalt: IntensityDist,
    pub marking: IntensityDist,
    /// Replaces both intensity distributions with the wet-road preset.
    pub wet_road: bool,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            rings: 32,
            ring_min_deg: -25.0,
            ring_max_deg: 15.0,
            azimuth_step_deg: 0.2,
            height_m: 1.8,
            max_range_m: 100.0,
            range_noise_m: 0.01,
            obstacle_fraction: 0.02,
            asphalt: IntensityDist { mean: 40.0, std: 10.0 },
            marking: IntensityDist { mean: 180.0, std: 15.0 },
            wet_road: false,
        }
    }
}

pub const WET_ASPHALT: IntensityDist = IntensityDist { mean: 30.0, std: 8.0 };
pub const WET_MARKING: IntensityDist = IntensityDist { mean: 90.0, std: 20.0 };

impl SensorSpec {
    /// Distributions in effect after applying the wet-road preset.
    pub fn effective_intensities(&self) -> (IntensityDist, IntensityDist) {
        if self.wet_road {
            (WET_ASPHALT, WET_MARKING)
        } else {
            (self.asphalt, self.marking)
        }
    }

    pub fn ring_elevations_deg(&self) -> Vec<f64> {
        if self.rings == 1 {
            return vec![self.ring_min_deg];
        }
        let step = (self.ring_max_deg - self.ring_min_deg) / (self.rings - 1) as f64;
        (0..self.rings).map(|r| self.ring_min_deg + step * r as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometrySpec {
    pub trans_sigma_m: f64,
    pub yaw_sigma_deg: f64,
}

impl Default for OdometrySpec {
    fn default() -> Self {
        Self {
            trans_sigma_m: 0.01,
            yaw_sigma_deg: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSpec {
    pub lane_width_m: f64,
    /// Along-road start of the trajectory (straight templates).
    pub start_m: f64,
    /// Lateral amplitude of the lane-keeping wobble.
    pub wobble_amplitude_m: f64,
    pub wobble_period_m: f64,
    pub loop_radius_m: f64,
    pub gap_start_m: f64,
    pub gap_end_m: f64,
    /// Sampling spacing of map element points.
    pub map_spacing_m: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            lane_width_m: 3.5,
            start_m: -125.0,
            wobble_amplitude_m: 0.2,
            wobble_period_m: 40.0,
            loop_radius_m: 40.0,
            gap_start_m: -20.0,
            gap_end_m: 40.0,
            map_spacing_m: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub template: Template,
    pub seed: u64,
    pub frames: usize,
    pub rate_hz: f64,
    pub speed_mps: f64,
    pub sensor: SensorSpec,
    pub odometry: OdometrySpec,
    pub layout: LayoutSpec,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            template: Template::StraightRoad,
            seed: 0,
            frames: 500,
            rate_hz: 10.0,
            speed_mps: 5.0,
            sensor: SensorSpec::default(),
            odometry: OdometrySpec::default(),
            layout: LayoutSpec::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn new(template: Template) -> Self {
        Self {
            template,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let spec: Self = toml::from_str(text).map_err(|e| SimError::InvalidSpec {
            field: "document".into(),
            message: e.message().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario spec serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        fn check(ok: bool, field: &str, message: &str) -> Result<(), SimError> {
            if ok {
                Ok(())
            } else {
                Err(SimError::InvalidSpec {
                    field: field.into(),
                    message: message.into(),
                })
            }
        }
        let s = &self.sensor;
        check(self.frames >= 1, "frames", "must be at least 1")?;
        check(self.rate_hz > 0.0 && self.rate_hz.is_finite(), "rate_hz", "must be positive")?;
        check(self.speed_mps >= 0.0 && self.speed_mps.is_finite(), "speed_mps", "must be non-negative")?;
        check(s.rings >= 1, "sensor.rings", "must be at least 1")?;
        check(s.ring_min_deg < 0.0 && s.ring_min_deg > -90.0, "sensor.ring_min_deg", "must be in (-90, 0)")?;
        check(s.ring_max_deg >= s.ring_min_deg && s.ring_max_deg < 90.0, "sensor.ring_max_deg", "must be in [ring_min_deg, 90)")?;
        check(s.azimuth_step_deg > 0.0 && s.azimuth_step_deg <= 45.0, "sensor.azimuth_step_deg", "must be in (0, 45]")?;
        check(s.height_m > 0.0 && s.height_m.is_finite(), "sensor.height_m", "must be positive")?;
        check(s.max_range_m > s.height_m, "sensor.max_range_m", "must exceed the sensor height")?;
        check(s.range_noise_m >= 0.0 && s.range_noise_m.is_finite(), "sensor.range_noise_m", "noise sigma must be non-negative")?;
        check((0.0..=1.0).contains(&s.obstacle_fraction), "sensor.obstacle_fraction", "must be in [0, 1]")?;
        for (name, d) in [("sensor.asphalt", s.asphalt), ("sensor.marking", s.marking)] {
            check(d.std > 0.0 && d.std.is_finite(), &format!("{name}.std"), "sigma must be positive")?;
            check((0.0..=255.0).contains(&d.mean), &format!("{name}.mean"), "must be in [0, 255]")?;
        }
        let o = &self.odometry;
        check(o.trans_sigma_m >= 0.0 && o.trans_sigma_m.is_finite(), "odometry.trans_sigma_m", "noise sigma must be non-negative")?;
        check(o.yaw_sigma_deg >= 0.0 && o.yaw_sigma_deg.is_finite(), "odometry.yaw_sigma_deg", "noise sigma must be non-negative")?;
        let l = &self.layout;
        check(l.lane_width_m >= 2.0 && l.lane_width_m <= 6.0, "layout.lane_width_m", "must be in [2, 6]")?;
        check(l.wobble_amplitude_m >= 0.0 && l.wobble_amplitude_m <= 0.5 * l.lane_width_m - 0.5, "layout.wobble_amplitude_m", "must keep the vehicle in its lane")?;
        check(l.wobble_period_m > 0.0, "layout.wobble_period_m", "must be positive")?;
        check(l.loop_radius_m >= 10.0, "layout.loop_radius_m", "must be at least 10")?;
        check(l.gap_end_m > l.gap_start_m, "layout.gap_end_m", "must exceed gap_start_m")?;
        check(l.map_spacing_m > 0.0 && l.map_spacing_m <= 0.5, "layout.map_spacing_m", "must be in (0, 0.5]")?;
        check(l.start_m.is_finite(), "layout.start_m", "must be finite")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let spec = ScenarioSpec::from_toml_str("template = \"loop\"\nseed = 3\n").unwrap();
        assert_eq!(spec.template, Template::Loop);
        assert_eq!(spec.sensor.rings, 32);
        let again = ScenarioSpec::from_toml_str(&spec.to_toml_string()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn field_level_errors() {
        let err = ScenarioSpec::from_toml_str("[sensor]\nrange_noise_m = -0.1\n").unwrap_err();
        assert!(err.to_string().contains("sensor.range_noise_m"), "{err}");
        let err = ScenarioSpec::from_toml_str("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }
}
