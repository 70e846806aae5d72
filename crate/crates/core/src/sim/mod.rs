//! Deterministic synthetic worlds: HD map, ground-truth trajectory, drifting
//! odometry and ring-pattern LiDAR scans with two-Gaussian intensities.

mod io;
mod spec;
mod templates;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::hdmap::{HDMap, MapElement, MapError};
use crate::libev::{LiBEVRaster, Labeler, MarkingInstance, OracleLabeler};
use crate::localmap::LocalMap;
use crate::rng::stream_rng;
use crate::types::{LidarPoint, Pose2, Vec2};

pub use io::{read_scan, read_truth, write_scan, write_scenario, DirectorySequence, SCAN_MAGIC};
pub use spec::{IntensityDist, LayoutSpec, OdometrySpec, ScenarioSpec, SensorSpec, Template, WET_ASPHALT, WET_MARKING};
pub use templates::{convex_contains, ElementShape};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid spec: {field}: {message}")]
    InvalidSpec { field: String, message: String },
    #[error("frame {0} out of range")]
    FrameOutOfRange(usize),
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

/// A rendered scan with the generating element id of every point (−1 for asphalt and clutter).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScan {
    pub points: Vec<LidarPoint>,
    pub truth: Vec<i32>,
}

/// Input to the pipeline: a map, poses and per-frame scans.
pub trait FrameSource: Sync {
    fn map(&self) -> &HDMap;
    fn truth(&self) -> &[Pose2];
    fn odometry(&self) -> &[Pose2];
    fn frame(&self, k: usize) -> Result<RenderedScan, SimError>;

    fn len(&self) -> usize {
        self.truth().len()
    }

    fn is_empty(&self) -> bool {
        self.truth().is_empty()
    }

    /// Digest of the map and pose streams identifying the scenario.
    fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(crate::hdmap::to_json_string(self.map()).as_bytes());
        h.update(io::poses_csv(self.truth(), 10.0).as_bytes());
        h.update(io::poses_csv(self.odometry(), 10.0).as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Bucketed polygon lookup.
#[derive(Debug, Clone)]
struct ShapeGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<(u32, u32)>>,
}

impl ShapeGrid {
    fn new(shapes: &[ElementShape]) -> Self {
        let cell = 2.0;
        let mut lo = Vec2::new(f64::MAX, f64::MAX);
        let mut hi = Vec2::new(f64::MIN, f64::MIN);
        for p in shapes.iter().flat_map(|s| s.polygons.iter().flatten()) {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if shapes.is_empty() {
            lo = Vec2::zeros();
            hi = Vec2::zeros();
        }
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (si, s) in shapes.iter().enumerate() {
            for (pi, poly) in s.polygons.iter().enumerate() {
                let (mut a, mut b) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
                for p in poly {
                    a = a.inf(p);
                    b = b.sup(p);
                }
                let (x0, y0) = (((a.x - lo.x) / cell) as usize, ((a.y - lo.y) / cell) as usize);
                let (x1, y1) = (((b.x - lo.x) / cell) as usize, ((b.y - lo.y) / cell) as usize);
                for iy in y0..=y1.min(ny - 1) {
                    for ix in x0..=x1.min(nx - 1) {
                        buckets[iy * nx + ix].push((si as u32, pi as u32));
                    }
                }
            }
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Index of the first shape containing `p`.
    fn lookup(&self, shapes: &[ElementShape], p: &Vec2) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        let b = &self.buckets[fy as usize * self.nx + fx as usize];
        b.iter()
            .find(|&&(si, pi)| convex_contains(&shapes[si as usize].polygons[pi as usize], p))
            .map(|&(si, _)| si as usize)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub shapes: Vec<ElementShape>,
    pub map: HDMap,
    pub trajectory: Vec<Pose2>,
    pub odometry: Vec<Pose2>,
    grid: ShapeGrid,
}

const STREAM_SCAN: u64 = 1;
const STREAM_ODOM: u64 = 2;

/// Lattice samples of an element's polygons at `spacing`, world-aligned.
pub fn sample_shape(shape: &ElementShape, spacing: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    for poly in &shape.polygons {
        let (mut a, mut b) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for p in poly {
            a = a.inf(p);
            b = b.sup(p);
        }
        let i0 = (a.x / spacing - 0.5).floor() as i64;
        let i1 = (b.x / spacing - 0.5).ceil() as i64;
        let j0 = (a.y / spacing - 0.5).floor() as i64;
        let j1 = (b.y / spacing - 0.5).ceil() as i64;
        for j in j0..=j1 {
            for i in i0..=i1 {
                let p = Vec2::new((i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing);
                if convex_contains(poly, &p) {
                    out.push(p);
                }
            }
        }
    }
    out.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    out.dedup();
    if out.is_empty() {
        let all: Vec<Vec2> = shape.polygons.iter().flatten().copied().collect();
        out.push(all.iter().sum::<Vec2>() / all.len() as f64);
    }
    out
}

pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario, SimError> {
    spec.validate()?;
    let shapes = templates::build_shapes(spec.template, &spec.layout);
    let elements: Vec<MapElement> = shapes
        .iter()
        .map(|s| MapElement::from_points(s.id, s.label, sample_shape(s, spec.layout.map_spacing_m)))
        .collect();
    let map = HDMap::new(elements)?;

    let step = spec.speed_mps / spec.rate_hz;
    let trajectory: Vec<Pose2> = (0..spec.frames)
        .map(|k| {
            let (p, h) = templates::path_pose(spec.template, &spec.layout, k as f64 * step);
            Pose2::new(p.x, p.y, h)
        })
        .collect();

    let mut rng = stream_rng(spec.seed, STREAM_ODOM, 0);
    let trans = Normal::new(0.0, spec.odometry.trans_sigma_m).expect("validated sigma");
    let yaw = Normal::new(0.0, spec.odometry.yaw_sigma_deg.to_radians()).expect("validated sigma");
    let mut odometry = Vec::with_capacity(trajectory.len());
    odometry.push(trajectory[0]);
    for k in 1..trajectory.len() {
        let delta = trajectory[k - 1].between(&trajectory[k]);
        let noisy = Pose2::new(
            delta.x + trans.sample(&mut rng),
            delta.y + trans.sample(&mut rng),
            delta.yaw + yaw.sample(&mut rng),
        );
        let prev = odometry[k - 1];
        odometry.push(prev.compose(&noisy));
    }
    let grid = ShapeGrid::new(&shapes);
    Ok(Scenario {
        spec: spec.clone(),
        shapes,
        map,
        trajectory,
        odometry,
        grid,
    })
}

fn clamp_intensity(v: f64) -> f32 {
    v.clamp(0.0, 255.0) as f32
}

impl Scenario {
    /// Element index under a world point.
    pub fn element_at(&self, p: &Vec2) -> Option<usize> {
        self.grid.lookup(&self.shapes, p)
    }

    /// Scan at frame `k` in the vehicle frame (ground at z = 0).
    pub fn render_scan(&self, k: usize) -> Result<RenderedScan, SimError> {
        let pose = *self.trajectory.get(k).ok_or(SimError::FrameOutOfRange(k))?;
        let s = &self.spec.sensor;
        let (asphalt, marking) = s.effective_intensities();
        let mut rng = stream_rng(self.spec.seed, STREAM_SCAN, k as u64);
        let asphalt_d = Normal::new(asphalt.mean, asphalt.std).expect("validated sigma");
        let marking_d = Normal::new(marking.mean, marking.std).expect("validated sigma");
        let clutter_d = Normal::new(60.0, 30.0).expect("constant sigma");
        let noise = if s.range_noise_m > 0.0 {
            Some(Normal::new(0.0, s.range_noise_m).expect("validated sigma"))
        } else {
            None
        };
        let rings = s.ring_elevations_deg();
        let n_az = (360.0 / s.azimuth_step_deg).round() as usize;
        let mut points = Vec::new();
        let mut truth = Vec::new();
        let max_h2 = s.max_range_m * s.max_range_m - s.height_m * s.height_m;
        for (ri, elev) in rings.iter().enumerate() {
            let ground_range = if *elev < 0.0 {
                s.height_m / (-elev.to_radians()).tan()
            } else {
                f64::INFINITY
            };
            for ai in 0..n_az {
                let az = (ai as f64 * s.azimuth_step_deg + 0.37 * ri as f64).to_radians();
                let (sa, ca) = az.sin_cos();
                let u: f64 = rng.random();
                if u < s.obstacle_fraction {
                    let d = rng.random_range(3.0..40.0);
                    let z = rng.random_range(0.3..2.0);
                    let i = clamp_intensity(clutter_d.sample(&mut rng));
                    points.push(LidarPoint::new((d * ca) as f32, (d * sa) as f32, z as f32, i, k as u32));
                    truth.push(-1);
                    continue;
                }
                if ground_range * ground_range > max_h2 {
                    continue;
                }
                let local = Vec2::new(ground_range * ca, ground_range * sa);
                let world = pose.transform_point(&local);
                let (intensity, id) = match self.element_at(&world) {
                    Some(e) => (marking_d.sample(&mut rng), self.shapes[e].id as i32),
                    None => (asphalt_d.sample(&mut rng), -1),
                };
                let (nx, ny, nz) = match &noise {
                    Some(n) => (n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)),
                    None => (0.0, 0.0, 0.0),
                };
                points.push(LidarPoint::new(
                    (local.x + nx) as f32,
                    (local.y + ny) as f32,
                    nz as f32,
                    clamp_intensity(intensity),
                    k as u32,
                ));
                truth.push(id);
            }
        }
        Ok(RenderedScan { points, truth })
    }

    /// Dense noise-free samples of every element as (world point, element id).
    pub fn dense_samples(&self, spacing: f64) -> Vec<(Vec2, u32)> {
        self.shapes
            .iter()
            .flat_map(|s| sample_shape(s, spacing).into_iter().map(move |p| (p, s.id)))
            .collect()
    }
}

impl FrameSource for Scenario {
    fn map(&self) -> &HDMap {
        &self.map
    }

    fn truth(&self) -> &[Pose2] {
        &self.trajectory
    }

    fn odometry(&self) -> &[Pose2] {
        &self.odometry
    }

    fn frame(&self, k: usize) -> Result<RenderedScan, SimError> {
        self.render_scan(k)
    }
}

/// Truth instances of a rasterized local map snapshot, from its point tags.
pub fn ground_truth_instances(map: &HDMap, raster: &LiBEVRaster, local_map: &LocalMap) -> Vec<MarkingInstance> {
    let tags = crate::libev::map_tags(local_map);
    OracleLabeler::from_map(map)
        .label(raster, Some(&tags))
        .expect("tags cover every point")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MarkingLabel;

    fn small(template: Template) -> ScenarioSpec {
        ScenarioSpec {
            frames: 5,
            ..ScenarioSpec::new(template)
        }
    }

    #[test]
    fn straight_road_contract() {
        let s = build_scenario(&small(Template::StraightRoad)).unwrap();
        let count = |l| s.map.elements().iter().filter(|e| e.label == l).count();
        assert_eq!(count(MarkingLabel::SolidLane), 2);
        assert!(count(MarkingLabel::DashedLane) >= 1);
        assert!(s.map.elements().len() >= 4);
    }

    #[test]
    fn intersection_contract() {
        let s = build_scenario(&small(Template::Intersection)).unwrap();
        for l in [MarkingLabel::StopLine, MarkingLabel::Crosswalk, MarkingLabel::Arrow] {
            assert!(s.map.elements().iter().any(|e| e.label == l), "{l}");
        }
    }

    #[test]
    fn deterministic() {
        let spec = small(Template::Loop);
        let a = build_scenario(&spec).unwrap();
        let b = build_scenario(&spec).unwrap();
        assert_eq!(a.odometry, b.odometry);
        assert_eq!(a.render_scan(3).unwrap(), b.render_scan(3).unwrap());
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn points_within_range_and_odometry_starts_at_truth() {
        let s = build_scenario(&small(Template::Intersection)).unwrap();
        assert_eq!(s.odometry[0], s.trajectory[0]);
        let scan = s.render_scan(2).unwrap();
        assert_eq!(scan.points.len(), scan.truth.len());
        let r = s.spec.sensor.max_range_m as f32;
        for p in &scan.points {
            let d = (p.x * p.x + p.y * p.y + (p.z - 1.8) * (p.z - 1.8)).sqrt();
            assert!(d <= r + 0.1);
        }
    }

    #[test]
    fn loop_stays_on_road() {
        let s = build_scenario(&ScenarioSpec::new(Template::Loop)).unwrap();
        for p in &s.trajectory {
            let r = p.translation().norm();
            assert!((r - 38.25).abs() < 0.5);
        }
    }
}
