use serde::{Deserialize, Serialize};

use crate::types::{wrap_angle, Pose2, Vec2};

/// Position error split along / across the ground-truth heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub frame: usize,
    /// Meters along the truth heading.
    pub longitudinal: f64,
    /// Meters across the truth heading, positive to the left.
    pub lateral: f64,
    /// Degrees, wrapped to (−180, 180].
    pub yaw: f64,
}

impl PoseError {
    pub fn distance(&self) -> f64 {
        self.longitudinal.hypot(self.lateral)
    }
}

pub fn pose_error(estimate: &Pose2, truth: &Pose2) -> PoseError {
    let d: Vec2 = estimate.translation() - truth.translation();
    let (s, c) = truth.yaw.sin_cos();
    PoseError {
        frame: 0,
        longitudinal: d.x * c + d.y * s,
        lateral: -d.x * s + d.y * c,
        yaw: wrap_angle(estimate.yaw - truth.yaw).to_degrees(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn examples() {
        let t = Pose2::new(1.0, 2.0, 0.3);
        let e = pose_error(&t, &t);
        assert_eq!((e.longitudinal, e.lateral, e.yaw), (0.0, 0.0, 0.0));
        let e = pose_error(&Pose2::new(0.2, 0.05, 0.0), &Pose2::identity());
        assert!((e.longitudinal - 0.2).abs() < 1e-12 && (e.lateral - 0.05).abs() < 1e-12);
        let e = pose_error(&Pose2::new(0.05, 0.2, FRAC_PI_2), &Pose2::new(0.0, 0.0, FRAC_PI_2));
        assert!((e.longitudinal - 0.2).abs() < 1e-12 && (e.lateral + 0.05).abs() < 1e-12);
        let e = pose_error(&Pose2::new(0.0, 0.0, 3.1), &Pose2::new(0.0, 0.0, -3.1));
        assert!((e.yaw - (6.2 - 2.0 * std::f64::consts::PI).to_degrees()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn decomposition_preserves_distance(
            ex in -50.0..50.0f64, ey in -50.0..50.0f64, eyaw in -3.1..3.1f64,
            tx in -50.0..50.0f64, ty in -50.0..50.0f64, tyaw in -3.1..3.1f64,
        ) {
            let est = Pose2::new(ex, ey, eyaw);
            let truth = Pose2::new(tx, ty, tyaw);
            let e = pose_error(&est, &truth);
            let d = (est.translation() - truth.translation()).norm();
            prop_assert!((e.distance() - d).abs() < 1e-9);
            prop_assert!(e.yaw > -180.0 && e.yaw <= 180.0);
        }
    }
}
