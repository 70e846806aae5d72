//! Geometric and semantic vocabulary shared by every pipeline stage.

mod marking;
mod point;
mod pose;

pub use marking::{category_of, ConstraintCategory, MarkingLabel};
pub use point::LidarPoint;
pub use pose::{wrap_angle, Pose2};

/// 2D point or vector in meters.
pub type Vec2 = nalgebra::Vector2<f64>;
