//! Probabilistic local map: aggregated high-reflectance points whose survival
//! probability decays with age, `p = 1 / (1 + (age / eta)^2)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::types::{LidarPoint, Pose2, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalMapError {
    #[error("eta must be positive, got {0}")]
    InvalidEta(f64),
    #[error("frame {k} does not follow current frame {current}")]
    NonMonotonicFrame { k: u32, current: u32 },
    #[error("tag slice length {tags} does not match point count {points}")]
    TagMismatch { tags: usize, points: usize },
}

/// How the survival trial is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardMode {
    /// A fresh uniform draw against the current probability at every update.
    #[default]
    PerFrame,
    /// One uniform draw per point at insertion, compared against the decaying
    /// probability at every update.
    LifetimeDraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalMapConfig {
    pub eta: f64,
    pub rng_seed: u64,
    pub discard_mode: DiscardMode,
}

impl Default for LocalMapConfig {
    fn default() -> Self {
        Self {
            eta: 50.0,
            rng_seed: 0,
            discard_mode: DiscardMode::PerFrame,
        }
    }
}

pub fn retention_probability(k: u32, k_i: u32, eta: f64) -> Result<f64, LocalMapError> {
    if !(eta > 0.0) {
        return Err(LocalMapError::InvalidEta(eta));
    }
    let age = (k as f64 - k_i as f64).abs() / eta;
    Ok(1.0 / (1.0 + age * age))
}

/// A point stored in the odometry frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub point: LidarPoint,
    /// Unique insertion id; keys the discard randomness.
    pub id: u64,
    /// Optional provenance tag carried through from the scan (e.g. simulator truth).
    pub tag: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct LocalMap {
    points: Vec<MapPoint>,
    current_frame: Option<u32>,
    next_id: u64,
    config: LocalMapConfig,
    /// Odometry pose at the latest update.
    pose: Pose2,
}

impl LocalMap {
    pub fn new(config: LocalMapConfig) -> Result<Self, LocalMapError> {
        if !(config.eta > 0.0) {
            return Err(LocalMapError::InvalidEta(config.eta));
        }
        Ok(Self {
            points: Vec::new(),
            current_frame: None,
            next_id: 0,
            config,
            pose: Pose2::identity(),
        })
    }

    pub fn points(&self) -> &[MapPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn current_frame(&self) -> Option<u32> {
        self.current_frame
    }

    pub fn pose(&self) -> Pose2 {
        self.pose
    }

    pub fn config(&self) -> &LocalMapConfig {
        &self.config
    }

    pub fn update(
        &mut self,
        new_points: &[LidarPoint],
        odom_pose: Pose2,
        k: u32,
    ) -> Result<(), LocalMapError> {
        self.update_tagged(new_points, None, odom_pose, k)
    }

    /// Inserts `new_points` (sensor frame) at frame `k`, then runs the survival trial.
    pub fn update_tagged(
        &mut self,
        new_points: &[LidarPoint],
        tags: Option<&[Option<u32>]>,
        odom_pose: Pose2,
        k: u32,
    ) -> Result<(), LocalMapError> {
        if let Some(current) = self.current_frame {
            if k <= current {
                return Err(LocalMapError::NonMonotonicFrame { k, current });
            }
        }
        if let Some(t) = tags {
            if t.len() != new_points.len() {
                return Err(LocalMapError::TagMismatch {
                    tags: t.len(),
                    points: new_points.len(),
                });
            }
        }
        self.current_frame = Some(k);
        self.pose = odom_pose;
        self.points.reserve(new_points.len());
        for (i, p) in new_points.iter().enumerate() {
            let q = odom_pose.transform_point(&Vec2::new(p.x as f64, p.y as f64));
            self.points.push(MapPoint {
                point: LidarPoint {
                    x: q.x as f32,
                    y: q.y as f32,
                    z: p.z,
                    intensity: p.intensity,
                    frame_index: k,
                },
                id: self.next_id,
                tag: tags.and_then(|t| t[i]),
            });
            self.next_id += 1;
        }

        let eta = self.config.eta;
        let seed = self.config.rng_seed;
        let mode = self.config.discard_mode;
        self.points.retain(|mp| {
            let age = (k - mp.point.frame_index) as f64 / eta;
            let p = 1.0 / (1.0 + age * age);
            let counter = match mode {
                DiscardMode::PerFrame => k as u64,
                DiscardMode::LifetimeDraw => u64::MAX,
            };
            rng::uniform(seed, mp.id, counter) < p
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(n: usize) -> Vec<LidarPoint> {
        (0..n)
            .map(|i| LidarPoint::new(i as f32 * 0.1, 0.0, 0.0, 200.0, 0))
            .collect()
    }

    #[test]
    fn retention_examples() {
        assert_eq!(retention_probability(5, 5, 50.0).unwrap(), 1.0);
        assert!((retention_probability(50, 0, 50.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((retention_probability(100, 0, 50.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(
            retention_probability(1, 0, 0.0),
            Err(LocalMapError::InvalidEta(0.0))
        );
    }

    #[test]
    fn retention_is_monotone() {
        let mut last = 2.0;
        for age in 0..500 {
            let p = retention_probability(age, 0, 50.0).unwrap();
            assert!(p > 0.0 && p <= 1.0 && p < last);
            last = p;
            assert!(retention_probability(age + 1, 0, 60.0).unwrap()
                > retention_probability(age + 1, 0, 50.0).unwrap());
        }
    }

    #[test]
    fn first_insert_keeps_everything() {
        let mut m = LocalMap::new(LocalMapConfig::default()).unwrap();
        m.update(&pts(100), Pose2::identity(), 0).unwrap();
        assert_eq!(m.len(), 100);
        assert!(m.points().iter().all(|p| p.point.frame_index == 0));
    }

    #[test]
    fn points_are_transformed_by_odometry() {
        let mut m = LocalMap::new(LocalMapConfig::default()).unwrap();
        m.update(&pts(1), Pose2::new(10.0, 5.0, std::f64::consts::FRAC_PI_2), 0)
            .unwrap();
        let p = m.points()[0].point;
        assert!((p.x - 10.0).abs() < 1e-6 && (p.y - 5.0).abs() < 1e-6);
    }

    #[test]
    fn non_monotonic_frame_rejected() {
        let mut m = LocalMap::new(LocalMapConfig::default()).unwrap();
        m.update(&pts(3), Pose2::identity(), 4).unwrap();
        assert_eq!(
            m.update(&pts(3), Pose2::identity(), 4),
            Err(LocalMapError::NonMonotonicFrame { k: 4, current: 4 })
        );
    }

    #[test]
    fn deterministic_for_equal_seeds() {
        let run = |seed| {
            let mut m = LocalMap::new(LocalMapConfig {
                rng_seed: seed,
                ..Default::default()
            })
            .unwrap();
            for k in 0..120 {
                m.update(&pts(50), Pose2::new(k as f64 * 0.5, 0.0, 0.0), k).unwrap();
            }
            m.points().iter().map(|p| p.id).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn no_point_from_the_future() {
        let mut m = LocalMap::new(LocalMapConfig::default()).unwrap();
        for k in 0..60 {
            m.update(&pts(10), Pose2::identity(), k).unwrap();
            assert!(m.points().iter().all(|p| p.point.frame_index <= k));
        }
    }

    #[test]
    fn lifetime_draw_survival_equals_probability() {
        // With one draw per point, surviving to age a happens with probability p(a).
        let mut m = LocalMap::new(LocalMapConfig {
            discard_mode: DiscardMode::LifetimeDraw,
            rng_seed: 11,
            ..Default::default()
        })
        .unwrap();
        m.update(&pts(20_000), Pose2::identity(), 0).unwrap();
        for k in 1..=50 {
            m.update(&[], Pose2::identity(), k).unwrap();
        }
        let frac = m.len() as f64 / 20_000.0;
        let sd = (0.5f64 * 0.5 / 20_000.0).sqrt();
        assert!((frac - 0.5).abs() < 4.0 * sd, "fraction {frac}");
    }

    #[test]
    fn tags_follow_points() {
        let mut m = LocalMap::new(LocalMapConfig::default()).unwrap();
        let tags = [Some(3), None];
        m.update_tagged(&pts(2), Some(&tags), Pose2::identity(), 0).unwrap();
        assert_eq!(m.points()[0].tag, Some(3));
        assert_eq!(m.points()[1].tag, None);
        assert!(m.update_tagged(&pts(2), Some(&tags[..1]), Pose2::identity(), 1).is_err());
    }
}
