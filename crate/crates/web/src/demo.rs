//! Native implementations behind the browser exports.

use rand_distr::{Distribution, Normal};
use roadloc::eval::{raster_at, LabelerKind};
use roadloc::hdmap::{HDMap, MapElement};
use roadloc::registration::{self, EpsilonTable, InstanceInput, RegistrationParams, SemanticCloud, SolverKind};
use roadloc::rng::stream_rng;
use roadloc::segmentation::ThresholdFilterState;
use roadloc::sim::{build_scenario, ScenarioSpec, Template};
use roadloc::{libev, MarkingLabel, PipelineConfig, Pose2, Vec2};
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct ThresholdTrace {
    measurement: Vec<f64>,
    rho: Vec<f64>,
}

/// Kalman threshold over a stream of asphalt/marking intensity mixtures. Returns JSON.
pub fn threshold_trace(seed: u64, frames: u32, q: f64, r: f64, marking_fraction: f64) -> Result<String, String> {
    if !(0.0..=1.0).contains(&marking_fraction) {
        return Err(err("marking_fraction must lie in [0, 1]"));
    }
    let asphalt = Normal::new(40.0, 10.0).map_err(err)?;
    let marking = Normal::new(180.0, 15.0).map_err(err)?;
    let mut state = ThresholdFilterState::new(q, r, 0.1).map_err(err)?;
    let mut trace = ThresholdTrace {
        measurement: Vec::new(),
        rho: Vec::new(),
    };
    let n = 4000usize;
    let n_mark = (n as f64 * marking_fraction).round() as usize;
    for k in 0..frames {
        let mut rng = stream_rng(seed, 7, k as u64);
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let v: f64 = if i < n_mark { marking.sample(&mut rng) } else { asphalt.sample(&mut rng) };
                v.clamp(0.0, 255.0)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let z = mean + 2.0 * var.sqrt();
        state = state.step(z);
        trace.measurement.push(z);
        trace.rho.push(state.rho);
    }
    serde_json::to_string(&trace).map_err(err)
}

#[derive(Serialize)]
struct RegistrationResult {
    truth: [f64; 3],
    initial: [f64; 3],
    estimate: [f64; 3],
    iterations: usize,
    termination: String,
    map: Vec<[f64; 2]>,
    /// Observed points placed with the estimate.
    observed: Vec<[f64; 2]>,
}

fn demo_map() -> HDMap {
    let mut elements = Vec::new();
    let line = |id: u32, label: MarkingLabel, y: f64, x0: f64, x1: f64| {
        let n = ((x1 - x0) / 0.2).round() as usize;
        let pts: Vec<Vec2> = (0..=n).map(|i| Vec2::new(x0 + i as f64 * 0.2, y)).collect();
        MapElement::from_points(id, label, pts)
    };
    elements.push(line(1, MarkingLabel::SolidLane, -1.75, -30.0, 30.0));
    elements.push(line(2, MarkingLabel::SolidLane, 5.25, -30.0, 30.0));
    for (i, x) in (-30..30).step_by(9).enumerate() {
        elements.push(line(10 + i as u32, MarkingLabel::DashedLane, 1.75, x as f64, x as f64 + 3.0));
    }
    let arrow: Vec<Vec2> = (0..20)
        .flat_map(|i| (0..3).map(move |j| Vec2::new(8.0 + i as f64 * 0.2, -0.2 + j as f64 * 0.2)))
        .collect();
    elements.push(MapElement::from_points(40, MarkingLabel::Arrow, arrow));
    HDMap::new(elements).expect("demo map is valid")
}

/// Registers a noisy copy of a small road scene from a perturbed start. Returns JSON.
pub fn registration(solver: &str, epsilon_lines: f64, dx: f64, dy: f64, dyaw_deg: f64, seed: u64) -> Result<String, String> {
    let kind: SolverKind = solver.parse().map_err(err)?;
    let map = demo_map();
    let truth = Pose2::new(0.0, 0.0, 0.0);
    let normal = Normal::new(0.0, 0.02).map_err(err)?;
    let mut rng = stream_rng(seed, 8, 0);
    let to_vehicle = truth.inverse();
    let instances: Vec<InstanceInput> = map
        .elements()
        .iter()
        .filter(|e| e.points.iter().any(|p| p.x.abs() < 20.0))
        .map(|e| InstanceInput {
            label: e.label,
            points: e
                .points
                .iter()
                .filter(|p| p.x.abs() < 20.0)
                .map(|p| to_vehicle.transform_point(&Vec2::new(p.x + normal.sample(&mut rng), p.y + normal.sample(&mut rng))))
                .collect(),
            direction_hint: None,
        })
        .collect();
    let params = RegistrationParams {
        epsilon: EpsilonTable {
            lines: epsilon_lines,
            ..EpsilonTable::default()
        },
        ..RegistrationParams::default()
    };
    params.validate().map_err(err)?;
    let cloud = SemanticCloud::from_instances(&instances, &params.epsilon);
    let initial = truth.compose(&Pose2::new(dx, dy, dyaw_deg.to_radians()));
    let rep = registration::solve(&cloud, &map, initial, kind, &params).map_err(err)?;
    let arr = |p: &Pose2| [p.x, p.y, p.yaw.to_degrees()];
    let result = RegistrationResult {
        truth: arr(&truth),
        initial: arr(&initial),
        estimate: arr(&rep.pose),
        iterations: rep.iterations,
        termination: format!("{:?}", rep.termination),
        map: map.elements().iter().flat_map(|e| e.points.iter().map(|p| [p.x, p.y])).collect(),
        observed: cloud
            .points
            .iter()
            .map(|lp| {
                let q = rep.pose.transform_point(&lp.position);
                [q.x, q.y]
            })
            .collect(),
    };
    serde_json::to_string(&result).map_err(err)
}

/// Simulates `frames` scans on the intersection template and renders the local map.
/// Returns `(width, height, rgba, instance count)`.
pub fn libev_rgba(frames: u32, seed: u64, wet_road: bool) -> Result<(u32, u32, Vec<u8>, u32), String> {
    if frames == 0 {
        return Err(err("frames must be at least 1"));
    }
    let mut spec = ScenarioSpec::new(Template::Intersection);
    spec.seed = seed;
    spec.frames = frames as usize;
    spec.sensor.wet_road = wet_road;
    let scenario = build_scenario(&spec).map_err(err)?;
    let (raster, instances) =
        raster_at(&scenario, frames as usize - 1, LabelerKind::Oracle, &PipelineConfig::default()).map_err(err)?;
    let rgb = libev::render_rgb(&raster);
    let rgba = rgb.chunks_exact(3).flat_map(|c| [c[0], c[1], c[2], 255]).collect();
    Ok((raster.width() as u32, raster.height() as u32, rgba, instances.len() as u32))
}
