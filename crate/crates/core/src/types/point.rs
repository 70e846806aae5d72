use serde::{Deserialize, Serialize};

use super::Vec2;

/// A single LiDAR return. Coordinates are in meters, intensity on a 0-255 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
    /// Index of the scan this point was observed in.
    pub frame_index: u32,
}

impl LidarPoint {
    pub const MAX_INTENSITY: f32 = 255.0;

    /// Builds a point, clamping intensity into the valid range.
    pub fn new(x: f32, y: f32, z: f32, intensity: f32, frame_index: u32) -> Self {
        Self {
            x,
            y,
            z,
            intensity: intensity.clamp(0.0, Self::MAX_INTENSITY),
            frame_index,
        }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.x as f64, self.y as f64)
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && (0.0..=Self::MAX_INTENSITY).contains(&self.intensity)
    }
}
