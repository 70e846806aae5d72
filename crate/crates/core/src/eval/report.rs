//! Run reports and their on-disk form.
//!
//! ```text
//! <report>/frames.csv      per-frame poses, errors, solver diagnostics
//! <report>/trajectory.csv  truth vs estimate, flagged frames marked
//! <report>/summary.json    means, RMS, maxima, flag and gap counts, detection metrics
//! <report>/timing.csv      per-frame stage wall-clock (ms)
//! <report>/timing.json     stage percentiles
//! ```
//!
//! Everything except the two timing files is a pure function of inputs and seeds.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::error::PoseError;
use super::pipeline::LabelerKind;
use crate::io_util::write_atomic;
use crate::libev::DetectionMetrics;
use crate::registration::{AcceptedStep, SolverKind, Termination};
use crate::types::Pose2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub detection_ms: f64,
    pub registration_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub truth: Pose2,
    pub estimate: Pose2,
    pub initial: Pose2,
    pub error: PoseError,
    pub flagged: bool,
    pub gap: Option<String>,
    pub threshold: f64,
    pub segmented_points: usize,
    pub local_map_points: usize,
    pub instances: usize,
    pub registration_points: usize,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Option<Termination>,
    pub final_cost: f64,
    pub correspondences: usize,
    pub times: StageTimes,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub longitudinal: f64,
    pub lateral: f64,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub solver: SolverKind,
    pub labeler: LabelerKind,
    pub scenario: String,
    pub frames: usize,
    pub gaps: usize,
    pub flagged: usize,
    pub not_converged: usize,
    pub mean_abs: Triple,
    pub rms: Triple,
    pub max_abs: Triple,
    pub detection: Option<DetectionMetrics>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles.
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: rank(0.50),
            p95: rank(0.95),
            p99: rank(0.99),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub detection_ms: Percentiles,
    pub registration_ms: Percentiles,
    pub total_ms: Percentiles,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub timing: TimingSummary,
    pub frames: Vec<FrameRecord>,
    /// Every accepted damped step of the run, in order.
    pub accepted_steps: Vec<AcceptedStep>,
}

fn triple<F: Fn(&PoseError) -> f64>(errors: &[PoseError], f: F) -> f64 {
    if errors.is_empty() {
        0.0
    } else {
        errors.iter().map(f).sum::<f64>() / errors.len() as f64
    }
}

impl RunReport {
    pub fn new(
        solver: SolverKind,
        labeler: LabelerKind,
        scenario: String,
        frames: Vec<FrameRecord>,
        detection: Option<DetectionMetrics>,
        accepted_steps: Vec<AcceptedStep>,
    ) -> Self {
        let errors: Vec<PoseError> = frames.iter().map(|f| f.error).collect();
        let mean_abs = Triple {
            longitudinal: triple(&errors, |e| e.longitudinal.abs()),
            lateral: triple(&errors, |e| e.lateral.abs()),
            yaw_deg: triple(&errors, |e| e.yaw.abs()),
        };
        let rms = Triple {
            longitudinal: triple(&errors, |e| e.longitudinal * e.longitudinal).sqrt(),
            lateral: triple(&errors, |e| e.lateral * e.lateral).sqrt(),
            yaw_deg: triple(&errors, |e| e.yaw * e.yaw).sqrt(),
        };
        let max = |f: fn(&PoseError) -> f64| errors.iter().map(f).fold(0.0, f64::max);
        let max_abs = Triple {
            longitudinal: max(|e| e.longitudinal.abs()),
            lateral: max(|e| e.lateral.abs()),
            yaw_deg: max(|e| e.yaw.abs()),
        };
        let pick = |f: fn(&StageTimes) -> f64| frames.iter().map(|r| f(&r.times)).collect::<Vec<_>>();
        let timing = TimingSummary {
            detection_ms: Percentiles::of(&pick(|t| t.detection_ms)),
            registration_ms: Percentiles::of(&pick(|t| t.registration_ms)),
            total_ms: Percentiles::of(&pick(|t| t.total_ms)),
        };
        let summary = Summary {
            solver,
            labeler,
            scenario,
            frames: frames.len(),
            gaps: frames.iter().filter(|f| f.gap.is_some()).count(),
            flagged: frames.iter().filter(|f| f.flagged).count(),
            not_converged: frames.iter().filter(|f| f.gap.is_none() && !f.converged).count(),
            mean_abs,
            rms,
            max_abs,
            detection,
        };
        Self {
            summary,
            timing,
            frames,
            accepted_steps,
        }
    }

    pub fn frames_csv(&self) -> String {
        let mut s = String::from(
            "frame,truth_x,truth_y,truth_yaw,est_x,est_y,est_yaw,lon_m,lat_m,yaw_deg,flagged,gap,\
             iterations,converged,termination,final_cost,correspondences,instances,registration_points,\
             segmented_points,local_map_points,threshold\n",
        );
        for f in &self.frames {
            let term = f
                .termination
                .map(|t| serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default())
                .unwrap_or_default();
            let gap = f.gap.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                f.frame,
                f.truth.x,
                f.truth.y,
                f.truth.yaw,
                f.estimate.x,
                f.estimate.y,
                f.estimate.yaw,
                f.error.longitudinal,
                f.error.lateral,
                f.error.yaw,
                u8::from(f.flagged),
                gap,
                f.iterations,
                u8::from(f.converged),
                term,
                f.final_cost,
                f.correspondences,
                f.instances,
                f.registration_points,
                f.segmented_points,
                f.local_map_points,
                f.threshold
            );
        }
        s
    }

    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from("frame,truth_x,truth_y,est_x,est_y,flagged\n");
        for f in &self.frames {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                f.frame,
                f.truth.x,
                f.truth.y,
                f.estimate.x,
                f.estimate.y,
                u8::from(f.flagged)
            );
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("frame,detection_ms,registration_ms,total_ms\n");
        for f in &self.frames {
            let _ = writeln!(
                s,
                "{},{:.4},{:.4},{:.4}",
                f.frame, f.times.detection_ms, f.times.registration_ms, f.times.total_ms
            );
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("frames.csv"), self.frames_csv().as_bytes())?;
        write_atomic(&dir.join("trajectory.csv"), self.trajectory_csv().as_bytes())?;
        write_atomic(&dir.join("summary.json"), self.summary_json().as_bytes())?;
        write_atomic(&dir.join("timing.csv"), self.timing_csv().as_bytes())?;
        let mut t = serde_json::to_string_pretty(&self.timing).expect("timing serializes");
        t.push('\n');
        write_atomic(&dir.join("timing.json"), t.as_bytes())
    }

    /// One-line digest: mean errors, flags and runtime percentiles.
    pub fn summary_line(&self) -> String {
        let s = &self.summary;
        format!(
            "{} / {}: frames {} gaps {} | mean |lon| {:.4} m |lat| {:.4} m |yaw| {:.4} deg | flagged {} | total p50 {:.2} ms p95 {:.2} ms",
            s.solver,
            s.labeler,
            s.frames,
            s.gaps,
            s.mean_abs.longitudinal,
            s.mean_abs.lateral,
            s.mean_abs.yaw_deg,
            s.flagged,
            self.timing.total_ms.p50,
            self.timing.total_ms.p95
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("reports come from different scenarios or lengths: {0}")]
    ScenarioMismatch(String),
    #[error("cannot read report: {0}")]
    Read(String),
}

pub fn read_summary(dir: &Path) -> Result<Summary, CompareError> {
    let p = dir.join("summary.json");
    let text = std::fs::read_to_string(&p).map_err(|e| CompareError::Read(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CompareError::Read(format!("{}: {e}", p.display())))
}

/// Side-by-side table of two summaries with B − A deltas.
pub fn compare(a: &Summary, b: &Summary) -> Result<String, CompareError> {
    if a.scenario != b.scenario {
        return Err(CompareError::ScenarioMismatch("scenario fingerprints differ".into()));
    }
    if a.frames != b.frames {
        return Err(CompareError::ScenarioMismatch(format!("{} vs {} frames", a.frames, b.frames)));
    }
    let mut s = String::new();
    let ha = format!("A ({})", a.solver);
    let hb = format!("B ({})", b.solver);
    let _ = writeln!(s, "{:<26}{:>14}{:>14}{:>14}", "metric", ha, hb, "B - A");
    let mut row = |name: &str, x: f64, y: f64| {
        let _ = writeln!(s, "{name:<26}{x:>14.4}{y:>14.4}{:>14.4}", y - x);
    };
    row("mean |longitudinal| (m)", a.mean_abs.longitudinal, b.mean_abs.longitudinal);
    row("mean |lateral| (m)", a.mean_abs.lateral, b.mean_abs.lateral);
    row("mean |yaw| (deg)", a.mean_abs.yaw_deg, b.mean_abs.yaw_deg);
    row("rms longitudinal (m)", a.rms.longitudinal, b.rms.longitudinal);
    row("rms lateral (m)", a.rms.lateral, b.rms.lateral);
    row("rms yaw (deg)", a.rms.yaw_deg, b.rms.yaw_deg);
    row("max |lateral| (m)", a.max_abs.lateral, b.max_abs.lateral);
    row("flagged frames", a.flagged as f64, b.flagged as f64);
    row("gaps", a.gaps as f64, b.gaps as f64);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let p = Percentiles::of(&v);
        assert_eq!((p.p50, p.p95, p.p99, p.max), (50.0, 95.0, 99.0, 100.0));
        assert_eq!(Percentiles::of(&[]).max, 0.0);
    }
}
