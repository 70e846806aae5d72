//! Ground extraction and adaptive high-reflectance segmentation.
//!
//! The segmentation threshold `rho` is tracked by a scalar random-walk Kalman
//! filter whose measurement is `mean + 2·std` of the ground intensities of
//! each scan.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::LidarPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("degenerate ground: {0}")]
    DegenerateGround(String),
    #[error("empty ground scan, threshold not updated")]
    EmptyGround,
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Expected ground height in the scan frame (meters).
    pub expected_ground_z: f64,
    /// Half-width of the height gate used to pick plane-fit candidates.
    pub height_gate_m: f64,
    /// Half-width of the band kept around the fitted plane.
    pub ground_band_halfwidth_m: f64,
    pub kf_q: f64,
    pub kf_r: f64,
    pub kf_initial_variance: f64,
    /// Frames where fewer than this fraction of ground points pass the
    /// threshold emit no points.
    pub min_marking_fraction: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            expected_ground_z: 0.0,
            height_gate_m: 0.3,
            ground_band_halfwidth_m: 0.15,
            kf_q: 0.1,
            kf_r: 2.0,
            kf_initial_variance: 0.1,
            min_marking_fraction: 0.01,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        let bad = |m: &str| Err(SegmentationError::InvalidParameter(m.to_string()));
        if !(self.height_gate_m > 0.0) {
            return bad("height_gate_m must be positive");
        }
        if !(self.ground_band_halfwidth_m > 0.0) {
            return bad("ground_band_halfwidth_m must be positive");
        }
        if !(self.kf_q > 0.0) || !(self.kf_r > 0.0) || !(self.kf_initial_variance > 0.0) {
            return bad("kf_q, kf_r and kf_initial_variance must be positive");
        }
        if !(0.0..=1.0).contains(&self.min_marking_fraction) {
            return bad("min_marking_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Plane `normal · p = offset` with a unit, upward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: &LidarPoint) -> f64 {
        self.normal.dot(&Vector3::new(p.x as f64, p.y as f64, p.z as f64)) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundScan {
    pub points: Vec<LidarPoint>,
    pub plane: Plane,
    pub frame_index: u32,
}

/// Least-squares fit of `z = a·x + b·y + c`.
fn fit_plane<'a>(points: impl Iterator<Item = &'a LidarPoint>) -> Result<Plane, SegmentationError> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    let mut n = 0usize;
    for p in points {
        let row = Vector3::new(p.x as f64, p.y as f64, 1.0);
        ata += row * row.transpose();
        atb += row * p.z as f64;
        n += 1;
    }
    if n < 3 {
        return Err(SegmentationError::DegenerateGround(format!(
            "{n} height-gated candidates, need at least 3"
        )));
    }
    // Scale-aware rank test on the normal matrix.
    let eig = ata.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > max * 1e-12) {
        return Err(SegmentationError::DegenerateGround(
            "plane fit is rank-deficient".to_string(),
        ));
    }
    let coef = ata
        .cholesky()
        .ok_or_else(|| SegmentationError::DegenerateGround("plane fit is rank-deficient".into()))?
        .solve(&atb);
    let raw = Vector3::new(-coef.x, -coef.y, 1.0);
    let norm = raw.norm();
    Ok(Plane {
        normal: raw / norm,
        offset: coef.z / norm,
    })
}

/// Indices of ground points and the fitted plane.
fn ground_indices(
    scan: &[LidarPoint],
    config: &SegmentationConfig,
) -> Result<(Vec<usize>, Plane), SegmentationError> {
    if scan.is_empty() {
        return Err(SegmentationError::DegenerateGround("empty scan".into()));
    }
    let gate = config.height_gate_m;
    let z0 = config.expected_ground_z;
    let mut plane = fit_plane(scan.iter().filter(|p| ((p.z as f64) - z0).abs() <= gate))?;
    // One refinement pass on the band members removes gate-edge bias.
    let band = config.ground_band_halfwidth_m;
    if let Ok(refined) = fit_plane(scan.iter().filter(|p| plane.signed_distance(p).abs() < band)) {
        plane = refined;
    }
    let idx = (0..scan.len())
        .filter(|&i| plane.signed_distance(&scan[i]).abs() < band)
        .collect();
    Ok((idx, plane))
}

/// Keeps points in a band around a plane fitted to height-gated candidates.
pub fn extract_ground(
    scan: &[LidarPoint],
    config: &SegmentationConfig,
    frame_index: u32,
) -> Result<GroundScan, SegmentationError> {
    let (idx, plane) = ground_indices(scan, config)?;
    Ok(GroundScan {
        points: idx.iter().map(|&i| scan[i]).collect(),
        plane,
        frame_index,
    })
}

/// Scalar random-walk Kalman filter over the segmentation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFilterState {
    pub rho: f64,
    pub variance: f64,
    pub process_noise: f64,
    pub measurement_noise: f64,
    /// False until the first measurement seeds `rho`.
    pub initialized: bool,
}

impl ThresholdFilterState {
    /// Uninitialized filter; the first measurement becomes `rho`.
    pub fn new(
        process_noise: f64,
        measurement_noise: f64,
        initial_variance: f64,
    ) -> Result<Self, SegmentationError> {
        if !(process_noise > 0.0 && measurement_noise > 0.0 && initial_variance > 0.0) {
            return Err(SegmentationError::InvalidParameter(
                "Q, R and the initial variance must be positive".into(),
            ));
        }
        Ok(Self {
            rho: 0.0,
            variance: initial_variance,
            process_noise,
            measurement_noise,
            initialized: false,
        })
    }

    pub fn from_config(config: &SegmentationConfig) -> Result<Self, SegmentationError> {
        Self::new(config.kf_q, config.kf_r, config.kf_initial_variance)
    }

    /// Filter with an explicit prior.
    pub fn with_prior(
        rho: f64,
        variance: f64,
        process_noise: f64,
        measurement_noise: f64,
    ) -> Result<Self, SegmentationError> {
        let mut s = Self::new(process_noise, measurement_noise, variance)?;
        s.rho = rho.clamp(0.0, 255.0);
        s.initialized = true;
        Ok(s)
    }

    /// One predict/update cycle with measurement `z`.
    pub fn step(&self, z: f64) -> Self {
        let mut next = *self;
        if !self.initialized {
            next.rho = z.clamp(0.0, 255.0);
            next.initialized = true;
            return next;
        }
        let predicted = self.variance + self.process_noise;
        let gain = predicted / (predicted + self.measurement_noise);
        next.rho = (self.rho + gain * (z - self.rho)).clamp(0.0, 255.0);
        next.variance = (1.0 - gain) * predicted;
        next
    }
}

/// Intensity statistics of a ground scan: `(mean, std, mean + 2·std)`.
/// Uses the unbiased estimator; a single sample has zero spread.
pub fn intensity_measurement(points: &[LidarPoint]) -> Option<(f64, f64, f64)> {
    let n = points.len();
    if n == 0 {
        return None;
    }
    let mean = points.iter().map(|p| p.intensity as f64).sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss: f64 = points
            .iter()
            .map(|p| (p.intensity as f64 - mean).powi(2))
            .sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some((mean, std, mean + 2.0 * std))
}

/// Runs the filter on the scan's measurement and returns the post-update threshold.
pub fn kalman_update(
    state: &ThresholdFilterState,
    ground: &GroundScan,
) -> Result<(ThresholdFilterState, f64), SegmentationError> {
    let (_, _, z) = intensity_measurement(&ground.points).ok_or(SegmentationError::EmptyGround)?;
    let next = state.step(z);
    Ok((next, next.rho))
}

/// Points with intensity at or above `threshold`, in input order.
pub fn segment_high_reflectance(ground: &GroundScan, threshold: f64) -> Vec<LidarPoint> {
    ground
        .points
        .iter()
        .filter(|p| p.intensity as f64 >= threshold)
        .copied()
        .collect()
}

/// Output of one segmentation step.
#[derive(Debug, Clone)]
pub struct SegmentedScan {
    pub points: Vec<LidarPoint>,
    /// Index of each retained point in the input scan.
    pub source_indices: Vec<usize>,
    pub threshold: f64,
    pub ground_count: usize,
    /// True when the marking-fraction guard suppressed this frame.
    pub suppressed: bool,
}

/// Stateful front end: ground extraction, threshold tracking and segmentation.
#[derive(Debug, Clone)]
pub struct Segmenter {
    config: SegmentationConfig,
    filter: ThresholdFilterState,
}

impl Segmenter {
    pub fn new(config: SegmentationConfig) -> Result<Self, SegmentationError> {
        config.validate()?;
        let filter = ThresholdFilterState::from_config(&config)?;
        Ok(Self { config, filter })
    }

    pub fn filter(&self) -> &ThresholdFilterState {
        &self.filter
    }

    pub fn process(&mut self, scan: &[LidarPoint]) -> Result<SegmentedScan, SegmentationError> {
        let cfg = &self.config;
        let (ground_idx, _) = ground_indices(scan, cfg)?;
        if ground_idx.is_empty() {
            return Err(SegmentationError::EmptyGround);
        }
        let ground: Vec<LidarPoint> = ground_idx.iter().map(|&i| scan[i]).collect();
        let (_, _, z) = intensity_measurement(&ground).ok_or(SegmentationError::EmptyGround)?;
        self.filter = self.filter.step(z);
        let threshold = self.filter.rho;

        let source_indices: Vec<usize> = ground_idx
            .iter()
            .copied()
            .filter(|&i| scan[i].intensity as f64 >= threshold)
            .collect();
        let fraction = source_indices.len() as f64 / ground.len() as f64;
        if fraction < cfg.min_marking_fraction {
            return Ok(SegmentedScan {
                points: Vec::new(),
                source_indices: Vec::new(),
                threshold,
                ground_count: ground.len(),
                suppressed: true,
            });
        }
        Ok(SegmentedScan {
            points: source_indices.iter().map(|&i| scan[i]).collect(),
            source_indices,
            threshold,
            ground_count: ground.len(),
            suppressed: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f32, y: f32, z: f32, i: f32) -> LidarPoint {
        LidarPoint::new(x, y, z, i, 0)
    }

    fn grid(f: impl Fn(f32, f32) -> f32) -> Vec<LidarPoint> {
        let mut v = Vec::new();
        for i in -10..=10 {
            for j in -10..=10 {
                let (x, y) = (i as f32 * 0.5, j as f32 * 0.5);
                v.push(pt(x, y, f(x, y), 40.0));
            }
        }
        v
    }

    #[test]
    fn flat_scene_drops_walls() {
        let mut scan = grid(|x, y| 0.02 * ((x * 3.1 + y * 1.7).sin()));
        let flat = scan.len();
        for k in 0..50 {
            scan.push(pt(6.0, k as f32 * 0.1, 0.5 + 1.5 * (k as f32 / 49.0), 90.0));
        }
        let g = extract_ground(&scan, &SegmentationConfig::default(), 0).unwrap();
        assert_eq!(g.points.len(), flat);
        assert!(g.points.iter().all(|p| p.z.abs() <= 0.02));
    }

    #[test]
    fn exact_zero_plane() {
        let scan = grid(|_, _| 0.0);
        let g = extract_ground(&scan, &SegmentationConfig::default(), 0).unwrap();
        assert_eq!(g.points.len(), scan.len());
        assert!((g.plane.normal - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!(g.plane.offset.abs() < 1e-12);
    }

    #[test]
    fn tilted_plane_normal() {
        let pitch = 2.0f64.to_radians();
        let slope = pitch.tan() as f32;
        let scan = grid(|x, _| slope * x);
        let g = extract_ground(&scan, &SegmentationConfig::default(), 0).unwrap();
        // Closed form: z = tan(p)·x has normal (-sin p, 0, cos p).
        let truth = Vector3::new(-pitch.sin(), 0.0, pitch.cos());
        let angle = g.plane.normal.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 0.1, "normal off by {angle} deg");
        assert!(g.plane.normal.z > 0.0);
    }

    #[test]
    fn too_few_candidates_is_degenerate() {
        let scan = vec![pt(0.0, 0.0, 0.0, 1.0), pt(1.0, 0.0, 0.0, 1.0), pt(5.0, 5.0, 3.0, 1.0)];
        assert!(matches!(
            extract_ground(&scan, &SegmentationConfig::default(), 0),
            Err(SegmentationError::DegenerateGround(_))
        ));
        let line: Vec<_> = (0..20).map(|i| pt(i as f32, 0.0, 0.0, 1.0)).collect();
        assert!(matches!(
            extract_ground(&line, &SegmentationConfig::default(), 0),
            Err(SegmentationError::DegenerateGround(_))
        ));
    }

    fn ground_with(intensities: &[f32]) -> GroundScan {
        GroundScan {
            points: intensities
                .iter()
                .enumerate()
                .map(|(i, &v)| pt(i as f32, 0.0, 0.0, v))
                .collect(),
            plane: Plane {
                normal: Vector3::z(),
                offset: 0.0,
            },
            frame_index: 0,
        }
    }

    #[test]
    fn huge_prior_variance_trusts_measurement() {
        let s = ThresholdFilterState::with_prior(100.0, 1e12, 0.1, 2.0).unwrap();
        let s = s.step(140.0);
        assert!((s.rho - 140.0).abs() < 1e-9);
    }

    #[test]
    fn converges_to_constant_measurement() {
        let mut s = ThresholdFilterState::with_prior(100.0, 0.1, 0.1, 2.0).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            s = s.step(140.0);
            let err = (s.rho - 140.0).abs();
            assert!(err <= last);
            last = err;
        }
        assert!(last < 1.0);
    }

    #[test]
    fn constant_intensities_have_zero_spread() {
        let g = ground_with(&[77.0; 16]);
        let (m, s, z) = intensity_measurement(&g.points).unwrap();
        assert_eq!((m, s, z), (77.0, 0.0, 77.0));
    }

    #[test]
    fn empty_ground_leaves_state_unchanged() {
        let s = ThresholdFilterState::with_prior(50.0, 1.0, 0.1, 2.0).unwrap();
        let g = ground_with(&[]);
        assert_eq!(kalman_update(&s, &g), Err(SegmentationError::EmptyGround));
    }

    #[test]
    fn threshold_examples() {
        let g = ground_with(&[10.0, 200.0]);
        let kept = segment_high_reflectance(&g, 100.0);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].intensity, 200.0);
        assert_eq!(segment_high_reflectance(&g, 0.0).len(), 2);
    }

    #[test]
    fn steady_state_variance_matches_riccati_root() {
        let (q, r) = (0.1, 2.0);
        let mut s = ThresholdFilterState::with_prior(0.0, 5.0, q, r).unwrap();
        for _ in 0..1000 {
            s = s.step(10.0);
        }
        let expected = (-q + (q * q + 4.0 * q * r).sqrt()) / 2.0;
        assert!((s.variance - expected).abs() < 1e-6);
    }

    #[test]
    fn invalid_noise_rejected() {
        assert!(ThresholdFilterState::new(0.0, 1.0, 1.0).is_err());
        assert!(ThresholdFilterState::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn guard_suppresses_marking_free_frames() {
        let cfg = SegmentationConfig {
            min_marking_fraction: 0.01,
            ..Default::default()
        };
        let mut seg = Segmenter::new(cfg).unwrap();
        // Constant intensity: threshold equals the intensity, all pass.
        let scan = grid(|_, _| 0.0);
        let out = seg.process(&scan).unwrap();
        assert!(!out.suppressed);
        // A strongly higher prior leaves nothing above threshold.
        seg.filter = ThresholdFilterState::with_prior(200.0, 1e-6, 1e-9, 1e3).unwrap();
        let out = seg.process(&scan).unwrap();
        assert!(out.suppressed);
        assert!(out.points.is_empty());
    }

    /// Textbook scalar KF written out separately from `step`.
    fn oracle_kf(rho0: f64, p0: f64, q: f64, r: f64, zs: &[f64]) -> Vec<f64> {
        let mut x = rho0;
        let mut p = p0;
        let mut out = Vec::new();
        for &z in zs {
            let p_minus = p + q;
            let k = p_minus / (p_minus + r);
            x = x + k * (z - x);
            p = p_minus - k * p_minus;
            out.push(x);
        }
        out
    }

    proptest! {
        #[test]
        fn matches_oracle(zs in prop::collection::vec(20.0..200.0f64, 1..60),
                          q in 0.01..5.0f64, r in 0.01..5.0f64, p0 in 0.01..10.0f64) {
            let mut s = ThresholdFilterState::with_prior(100.0, p0, q, r).unwrap();
            let expected = oracle_kf(100.0, p0, q, r, &zs);
            for (z, e) in zs.iter().zip(expected) {
                s = s.step(*z);
                prop_assert!((s.rho - e).abs() < 1e-9);
            }
        }

        #[test]
        fn segmentation_partitions_input(vals in prop::collection::vec(0.0..255.0f32, 0..100),
                                         thr in 0.0..255.0f64) {
            let g = ground_with(&vals);
            let kept = segment_high_reflectance(&g, thr);
            let dropped = g.points.iter().filter(|p| (p.intensity as f64) < thr).count();
            prop_assert_eq!(kept.len() + dropped, vals.len());
            prop_assert!(kept.iter().all(|p| p.intensity as f64 >= thr));
        }
    }
}
