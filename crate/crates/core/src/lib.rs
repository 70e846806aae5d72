//! Road-marking detection from LiDAR intensity and semantic GICP localization
//! against an HD map, plus a scenario simulator and evaluation harness.

pub mod config;
pub mod eval;
pub mod hdmap;
pub mod libev;
pub mod localmap;
pub mod registration;
pub mod rng;
pub mod segmentation;
pub mod sim;
pub mod types;

mod io_util;

pub use config::PipelineConfig;
pub use types::{category_of, ConstraintCategory, LidarPoint, MarkingLabel, Pose2, Vec2};
