//! Frame-by-frame orchestration: segmentation, local map, raster, labeling,
//! registration, error bookkeeping.

use serde::{Deserialize, Serialize};

use super::error::{pose_error, PoseError};
use super::report::{FrameRecord, RunReport, StageTimes};
use crate::config::PipelineConfig;
use crate::hdmap::HDMap;
use crate::libev::{self, DetectionMetrics, HeuristicLabeler, Labeler, MarkingInstance, OracleLabeler};
use crate::localmap::LocalMap;
use crate::registration::{self, AcceptedStep, InstanceInput, SemanticCloud, SolverKind};
use crate::segmentation::Segmenter;
use crate::sim::{FrameSource, RenderedScan};
use crate::types::{Pose2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelerKind {
    Oracle,
    Heuristic,
}

impl std::str::FromStr for LabelerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "heuristic" => Ok(Self::Heuristic),
            _ => Err(format!("unknown labeler `{s}` (expected oracle or heuristic)")),
        }
    }
}

impl std::fmt::Display for LabelerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Oracle => "oracle",
            Self::Heuristic => "heuristic",
        })
    }
}

/// Monotonic stopwatch; reads zero where no clock is available.
#[derive(Clone, Copy)]
struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Back-projects instances into vehicle-frame registration input. The same
/// stride subsamples every instance so the total stays under `cap`;
/// covariances use all points.
pub fn instance_inputs(
    instances: &[MarkingInstance],
    local_map: &LocalMap,
    map: &HDMap,
    labeler: LabelerKind,
    min_points: usize,
    cap: usize,
    estimate_yaw: f64,
) -> (Vec<InstanceInput>, Vec<Vec<Vec2>>) {
    let to_vehicle = local_map.pose().inverse();
    let pts = local_map.points();
    let mut full = Vec::new();
    for inst in instances.iter().filter(|i| i.point_ids.len() >= min_points.max(1)) {
        let points: Vec<Vec2> = inst
            .point_ids
            .iter()
            .map(|&id| to_vehicle.transform_point(&pts[id as usize].point.xy()))
            .collect();
        let hint = match labeler {
            LabelerKind::Oracle => map.element_by_id(inst.instance_id).map(|e| {
                let r = Pose2::new(0.0, 0.0, -estimate_yaw);
                r.transform_point(&e.direction)
            }),
            LabelerKind::Heuristic => None,
        };
        full.push(InstanceInput {
            label: inst.label,
            points,
            direction_hint: hint,
        });
    }
    let total: usize = full.iter().map(|i| i.points.len()).sum();
    let stride = total.div_ceil(cap).max(1);
    let sub = full
        .iter()
        .map(|i| i.points.iter().step_by(stride).copied().collect())
        .collect();
    (full, sub)
}

fn build_cloud(full: &[InstanceInput], sub: Vec<Vec<Vec2>>, config: &PipelineConfig) -> SemanticCloud {
    let mut cloud = SemanticCloud::from_instances(full, &config.registration.epsilon);
    cloud.points = full
        .iter()
        .zip(sub)
        .enumerate()
        .flat_map(|(i, (inst, pts))| {
            pts.into_iter().map(move |p| crate::hdmap::LabeledPoint {
                position: p,
                label: inst.label,
                instance: i as u32,
            })
        })
        .collect();
    cloud
}

/// Mutable state of one pipeline run.
pub struct PipelineState<'a> {
    pub config: PipelineConfig,
    pub solver: SolverKind,
    pub labeler_kind: LabelerKind,
    map: &'a HDMap,
    truth: &'a [Pose2],
    odometry: &'a [Pose2],
    segmenter: Segmenter,
    local_map: LocalMap,
    oracle: OracleLabeler,
    heuristic: HeuristicLabeler,
    estimate: Option<Pose2>,
    pub records: Vec<FrameRecord>,
    pub accepted_steps: Vec<AcceptedStep>,
    detection: Vec<DetectionMetrics>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("scenario: {0}")]
    Source(#[from] crate::sim::SimError),
}

impl<'a> PipelineState<'a> {
    pub fn new(
        source: &'a dyn FrameSource,
        solver: SolverKind,
        labeler: LabelerKind,
        config: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let segmenter = Segmenter::new(config.segmentation.clone()).map_err(|e| crate::config::ConfigError::Invalid {
            field: "segmentation".into(),
            message: e.to_string(),
        })?;
        let local_map = LocalMap::new(config.local_map.clone()).map_err(|e| crate::config::ConfigError::Invalid {
            field: "local_map".into(),
            message: e.to_string(),
        })?;
        Ok(Self {
            config: config.clone(),
            solver,
            labeler_kind: labeler,
            map: source.map(),
            truth: source.truth(),
            odometry: source.odometry(),
            segmenter,
            local_map,
            oracle: OracleLabeler::from_map(source.map()),
            heuristic: HeuristicLabeler::new(config.heuristic.clone()),
            estimate: None,
            records: Vec::new(),
            accepted_steps: Vec::new(),
            detection: Vec::new(),
        })
    }

    pub fn local_map(&self) -> &LocalMap {
        &self.local_map
    }

    fn initial_guess(&self, k: usize) -> Pose2 {
        match self.estimate {
            None => {
                let o = self.config.eval.initial_offset;
                self.truth[k].compose(&Pose2::new(o[0], o[1], o[2].to_radians()))
            }
            Some(prev) => {
                let delta = self.odometry[k - 1].between(&self.odometry[k]);
                prev.compose(&delta)
            }
        }
    }

    /// Processes frame `k`; stage failures become a gap in the record.
    pub fn step(&mut self, k: usize, scan: &RenderedScan) {
        let total_clock = Clock::start();
        let initial = self.initial_guess(k);
        let mut times = StageTimes::default();
        let mut gap: Option<String> = None;
        let det_clock = Clock::start();

        let seg = self.segmenter.process(&scan.points);
        let threshold = self.segmenter.filter().rho;
        let (points, tags) = match &seg {
            Ok(s) => {
                let tags: Vec<Option<u32>> = s
                    .source_indices
                    .iter()
                    .map(|&i| u32::try_from(scan.truth[i]).ok())
                    .collect();
                (s.points.clone(), tags)
            }
            Err(e) => {
                gap = Some(format!("segmentation: {e}"));
                (Vec::new(), Vec::new())
            }
        };
        if let Err(e) = self
            .local_map
            .update_tagged(&points, Some(&tags), self.odometry[k], k as u32)
        {
            gap.get_or_insert(format!("local map: {e}"));
        }
        let mut instances = Vec::new();
        let raster = libev::rasterize(&self.local_map, &self.config.raster);
        match raster {
            Ok(raster) => {
                let map_tags = libev::map_tags(&self.local_map);
                let labeled = match self.labeler_kind {
                    LabelerKind::Oracle => self.oracle.label(&raster, Some(&map_tags)),
                    LabelerKind::Heuristic => self.heuristic.label(&raster, None),
                };
                match labeled {
                    Ok(v) => instances = v,
                    Err(e) => {
                        gap.get_or_insert(format!("labeler: {e}"));
                    }
                }
                times.detection_ms = det_clock.ms();
                if self.labeler_kind == LabelerKind::Heuristic {
                    if let Ok(truth) = self.oracle.label(&raster, Some(&map_tags)) {
                        if let Ok(m) = libev::detection_metrics(&instances, &raster.geometry, &truth, &raster.geometry) {
                            self.detection.push(m);
                        }
                    }
                }
            }
            Err(e) => {
                times.detection_ms = det_clock.ms();
                gap.get_or_insert(format!("raster: {e}"));
            }
        }

        let reg_clock = Clock::start();
        let (full, sub) = instance_inputs(
            &instances,
            &self.local_map,
            self.map,
            self.labeler_kind,
            self.config.eval.min_instance_points,
            self.config.eval.max_registration_points,
            initial.yaw,
        );
        let cloud = build_cloud(&full, sub, &self.config);
        let mut estimate = initial;
        let mut solve_info = None;
        if cloud.is_empty() {
            gap.get_or_insert("registration: no instances".into());
        } else {
            match registration::solve(&cloud, self.map, initial, self.solver, &self.config.registration) {
                Ok(rep) => {
                    estimate = rep.pose;
                    self.accepted_steps.extend_from_slice(&rep.accepted_steps);
                    solve_info = Some(rep);
                }
                Err(e) => {
                    gap.get_or_insert(format!("registration: {e}"));
                }
            }
        }
        times.registration_ms = reg_clock.ms();
        times.total_ms = total_clock.ms();
        self.estimate = Some(estimate);

        let truth = self.truth[k];
        let mut error: PoseError = pose_error(&estimate, &truth);
        error.frame = k;
        let flagged = error.distance() > self.config.eval.flag_distance_m || error.yaw.abs() > self.config.eval.flag_yaw_deg;
        self.records.push(FrameRecord {
            frame: k,
            truth,
            estimate,
            initial,
            error,
            flagged,
            gap,
            threshold,
            segmented_points: points.len(),
            local_map_points: self.local_map.len(),
            instances: instances.len(),
            registration_points: cloud.len(),
            iterations: solve_info.as_ref().map_or(0, |r| r.iterations),
            converged: solve_info.as_ref().is_some_and(|r| r.converged),
            termination: solve_info.as_ref().map(|r| r.termination),
            final_cost: solve_info.as_ref().map_or(0.0, |r| r.final_cost),
            correspondences: solve_info
                .as_ref()
                .and_then(|r| r.correspondence_counts.last().copied())
                .unwrap_or(0),
            times,
        });
    }

    pub fn finish(self, fingerprint: String) -> RunReport {
        let detection = (self.labeler_kind == LabelerKind::Heuristic).then(|| DetectionMetrics::pooled(&self.detection));
        RunReport::new(self.solver, self.labeler_kind, fingerprint, self.records, detection, self.accepted_steps)
    }
}

/// Runs the whole sequence with one solver and labeler.
pub fn run_pipeline(
    source: &dyn FrameSource,
    labeler: LabelerKind,
    solver: SolverKind,
    config: &PipelineConfig,
) -> Result<RunReport, PipelineError> {
    Ok(run_pipelines(source, &[(labeler, solver)], config)?.remove(0))
}

/// Runs several (labeler, solver) variants over one pass of the frames.
pub fn run_pipelines(
    source: &dyn FrameSource,
    variants: &[(LabelerKind, SolverKind)],
    config: &PipelineConfig,
) -> Result<Vec<RunReport>, PipelineError> {
    let mut states = variants
        .iter()
        .map(|(l, s)| PipelineState::new(source, *s, *l, config))
        .collect::<Result<Vec<_>, _>>()?;
    for k in 0..source.len() {
        let scan = source.frame(k)?;
        for st in &mut states {
            st.step(k, &scan);
        }
    }
    let fp = source.fingerprint();
    Ok(states.into_iter().map(|s| s.finish(fp.clone())).collect())
}

/// LiBEV raster and instances after accumulating frames `0..=k`. Only the
/// detection stages run; no registration is involved.
pub fn raster_at(
    source: &dyn FrameSource,
    k: usize,
    labeler: LabelerKind,
    config: &PipelineConfig,
) -> Result<(libev::LiBEVRaster, Vec<MarkingInstance>), PipelineError> {
    config.validate()?;
    if k >= source.len() {
        return Err(crate::sim::SimError::FrameOutOfRange(k).into());
    }
    let invalid = |field: &str, e: String| crate::config::ConfigError::Invalid {
        field: field.into(),
        message: e,
    };
    let mut segmenter = Segmenter::new(config.segmentation.clone()).map_err(|e| invalid("segmentation", e.to_string()))?;
    let mut local_map = LocalMap::new(config.local_map.clone()).map_err(|e| invalid("local_map", e.to_string()))?;
    for j in 0..=k {
        let scan = source.frame(j)?;
        // A frame that fails segmentation contributes nothing, as in a full run.
        let (points, tags) = match segmenter.process(&scan.points) {
            Ok(s) => {
                let tags: Vec<Option<u32>> = s.source_indices.iter().map(|&i| u32::try_from(scan.truth[i]).ok()).collect();
                (s.points, tags)
            }
            Err(_) => (Vec::new(), Vec::new()),
        };
        local_map
            .update_tagged(&points, Some(&tags), source.odometry()[j], j as u32)
            .map_err(|e| invalid("local_map", e.to_string()))?;
    }
    let raster = libev::rasterize(&local_map, &config.raster).map_err(|e| invalid("raster", e.to_string()))?;
    let instances = match labeler {
        LabelerKind::Oracle => OracleLabeler::from_map(source.map()).label(&raster, Some(&libev::map_tags(&local_map))),
        LabelerKind::Heuristic => HeuristicLabeler::new(config.heuristic.clone()).label(&raster, None),
    }
    .map_err(|e| invalid("labeler", e.to_string()))?;
    Ok((raster, instances))
}

/// Independent runs executed concurrently when the `parallel` feature is on.
pub fn run_many<S, T, F>(jobs: Vec<S>, f: F) -> Vec<T>
where
    S: Send,
    T: Send,
    F: Fn(S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}

