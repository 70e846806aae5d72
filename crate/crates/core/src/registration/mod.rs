//! SE(2) registration of a semantic point cloud against an HD map: the
//! semantic GICP solver and a point-to-point ICP baseline sharing one loop.

mod covariance;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hdmap::{Association, HDMap, LabeledPoint};
use crate::types::{MarkingLabel, Pose2, Vec2};

pub use covariance::{
    instance_covariance, instance_covariance_eps, instance_covariance_or, map_covariance,
    map_covariance_eps, sample_covariance, AnisotropicCov, CovarianceError, EpsilonTable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("no correspondences at the initial pose")]
    NoCorrespondences,
    #[error("empty semantic cloud")]
    EmptyCloud,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Semantic GICP.
    Sgicp,
    /// Point-to-point ICP (identity information matrices).
    Icp,
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sgicp" => Ok(Self::Sgicp),
            "icp" => Ok(Self::Icp),
            _ => Err(format!("unknown solver `{s}` (expected sgicp or icp)")),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sgicp => "sgicp",
            Self::Icp => "icp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationParams {
    pub epsilon: EpsilonTable,
    /// Association gate in meters.
    pub max_dist: f64,
    pub max_iterations: usize,
    /// Gauss-Newton steps per outer iteration on frozen correspondences.
    pub inner_iterations: usize,
    /// Pose-delta tolerance (meters and radians, Euclidean).
    pub tol: f64,
    pub lambda_init: f64,
    pub lambda_factor: f64,
    pub max_rejections: usize,
    pub huber_enabled: bool,
    pub huber_threshold: f64,
    /// Rebuild information matrices with the current rotation each outer iteration.
    pub rebuild_information: bool,
    pub max_condition: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            epsilon: EpsilonTable::default(),
            max_dist: 2.0,
            max_iterations: 50,
            inner_iterations: 5,
            tol: 1e-5,
            lambda_init: 1e-4,
            lambda_factor: 10.0,
            max_rejections: 10,
            huber_enabled: false,
            huber_threshold: 1.0,
            rebuild_information: true,
            max_condition: 1e12,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        let bad = |m: &str| Err(RegistrationError::InvalidParameter(m.to_string()));
        for (name, e) in [
            ("epsilon.lines", self.epsilon.lines),
            ("epsilon.line_segments", self.epsilon.line_segments),
            ("epsilon.others", self.epsilon.others),
        ] {
            if !(e > 0.0 && e <= 1.0) {
                return bad(&format!("{name} must be in (0, 1]"));
            }
        }
        if !(self.max_dist > 0.0) {
            return bad("max_dist must be positive");
        }
        if self.max_iterations == 0 || self.inner_iterations == 0 {
            return bad("iteration counts must be positive");
        }
        if !(self.tol > 0.0) || !(self.lambda_init >= 0.0) || !(self.lambda_factor > 1.0) {
            return bad("tol, lambda_init and lambda_factor must be positive (factor > 1)");
        }
        if self.huber_enabled && !(self.huber_threshold > 0.0) {
            return bad("huber_threshold must be positive");
        }
        Ok(())
    }
}

/// Points of one detected instance with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceInput {
    pub label: MarkingLabel,
    pub points: Vec<Vec2>,
    /// Used when the points carry no direction of their own.
    pub direction_hint: Option<Vec2>,
}

/// Labeled points in the vehicle frame with one covariance per instance.
#[derive(Debug, Clone, Default)]
pub struct SemanticCloud {
    pub points: Vec<LabeledPoint>,
    pub covariances: Vec<AnisotropicCov>,
    pub labels: Vec<MarkingLabel>,
}

impl SemanticCloud {
    pub fn from_instances(instances: &[InstanceInput], eps: &EpsilonTable) -> Self {
        let mut cloud = SemanticCloud::default();
        for (i, inst) in instances.iter().enumerate() {
            let e = eps.get(inst.label.category());
            cloud
                .covariances
                .push(instance_covariance_or(&inst.points, e, inst.direction_hint));
            cloud.labels.push(inst.label);
            cloud.points.extend(inst.points.iter().map(|p| LabeledPoint {
                position: *p,
                label: inst.label,
                instance: i as u32,
            }));
        }
        cloud
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One correspondence with its frozen information matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub local: Vec2,
    pub map_point: Vec2,
    pub c_local: Matrix2<f64>,
    pub c_map: Matrix2<f64>,
    pub information: Matrix2<f64>,
    pub element_id: u32,
    pub instance_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    SingularNormalMatrix,
    LostCorrespondences,
}

/// Cost before and after one accepted step, on frozen correspondences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptedStep {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub pose: Pose2,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub final_cost: f64,
    pub correspondence_counts: Vec<usize>,
    pub accepted_steps: Vec<AcceptedStep>,
}

/// Residual r = q_m − T·q_L.
pub fn residual(pose: &Pose2, local: &Vec2, map_point: &Vec2) -> Vec2 {
    map_point - pose.transform_point(local)
}

/// Jacobian of [`residual`] with respect to (x, y, yaw).
pub fn residual_jacobian(pose: &Pose2, local: &Vec2) -> Matrix2x3<f64> {
    let (s, c) = pose.yaw.sin_cos();
    let dx = -s * local.x - c * local.y;
    let dy = c * local.x - s * local.y;
    Matrix2x3::new(-1.0, 0.0, -dx, 0.0, -1.0, -dy)
}

/// Information matrix (C_m + R C_L Rᵀ)⁻¹.
pub fn information_matrix(rotation: &Matrix2<f64>, c_local: &Matrix2<f64>, c_map: &Matrix2<f64>) -> Matrix2<f64> {
    let s = c_map + rotation * c_local * rotation.transpose();
    let s = 0.5 * (s + s.transpose());
    s.try_inverse().unwrap_or_else(Matrix2::identity)
}

fn robust(params: &RegistrationParams, m2: f64) -> (f64, f64) {
    // Returns (cost, IRLS weight) for squared Mahalanobis distance m2.
    if !params.huber_enabled {
        return (m2, 1.0);
    }
    let d = params.huber_threshold;
    let s = m2.sqrt();
    if s <= d {
        (m2, 1.0)
    } else {
        (2.0 * d * s - d * d, d / s)
    }
}

/// Total cost of frozen correspondences at `pose`.
pub fn total_cost(pose: &Pose2, pairs: &[Correspondence], params: &RegistrationParams) -> f64 {
    pairs
        .iter()
        .map(|c| {
            let r = residual(pose, &c.local, &c.map_point);
            robust(params, (r.transpose() * c.information * r)[(0, 0)]).0
        })
        .sum()
}

fn normal_equations(
    pose: &Pose2,
    pairs: &[Correspondence],
    params: &RegistrationParams,
) -> (Matrix3<f64>, Vector3<f64>) {
    let mut h = Matrix3::zeros();
    let mut g = Vector3::zeros();
    for c in pairs {
        let r = residual(pose, &c.local, &c.map_point);
        let j = residual_jacobian(pose, &c.local);
        let (_, w) = robust(params, (r.transpose() * c.information * r)[(0, 0)]);
        let jtm = j.transpose() * (c.information * w);
        h += jtm * j;
        g += jtm * r;
    }
    (h, g)
}

fn condition_number(h: &Matrix3<f64>) -> f64 {
    let ev = h.symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = ev.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn apply(pose: &Pose2, delta: &Vector3<f64>) -> Pose2 {
    Pose2::new(pose.x + delta[0], pose.y + delta[1], pose.yaw + delta[2])
}

fn pose_delta(a: &Pose2, b: &Pose2) -> f64 {
    let d = Vector3::new(b.x - a.x, b.y - a.y, crate::types::wrap_angle(b.yaw - a.yaw));
    d.norm()
}

/// Builds frozen correspondences at `pose`.
pub fn build_correspondences(
    cloud: &SemanticCloud,
    map: &HDMap,
    map_covs: &[Matrix2<f64>],
    pose: &Pose2,
    info_rotation: &Matrix2<f64>,
    kind: SolverKind,
    params: &RegistrationParams,
) -> Vec<Correspondence> {
    let assoc = associate_cloud(&cloud.points, pose, map, params.max_dist);
    let rot = *info_rotation;
    assoc
        .into_iter()
        .map(|a| {
            let c_local = cloud.covariances[a.instance as usize].0;
            let c_map = map_covs[a.element];
            let information = match kind {
                SolverKind::Icp => Matrix2::identity(),
                SolverKind::Sgicp => information_matrix(&rot, &c_local, &c_map),
            };
            Correspondence {
                local: a.local,
                map_point: a.map_point,
                c_local,
                c_map,
                information,
                element_id: a.element_id,
                instance_id: a.instance,
            }
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn associate_cloud(points: &[LabeledPoint], pose: &Pose2, map: &HDMap, max_dist: f64) -> Vec<Association> {
    use rayon::prelude::*;
    if points.len() < 4096 {
        return crate::hdmap::associate(points, pose, map, max_dist);
    }
    let chunks: Vec<Vec<Association>> = points
        .par_chunks(2048)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut v = crate::hdmap::associate(chunk, pose, map, max_dist);
            for a in &mut v {
                a.source += ci * 2048;
            }
            v
        })
        .collect();
    chunks.concat()
}

#[cfg(not(feature = "parallel"))]
fn associate_cloud(points: &[LabeledPoint], pose: &Pose2, map: &HDMap, max_dist: f64) -> Vec<Association> {
    crate::hdmap::associate(points, pose, map, max_dist)
}

/// Shape covariance of every map element under the configured ε values.
pub fn map_covariances(map: &HDMap, eps: &EpsilonTable) -> Vec<Matrix2<f64>> {
    map.elements()
        .iter()
        .map(|e| AnisotropicCov::from_axis(&e.direction, eps.get(e.label.category())).0)
        .collect()
}

/// Damped Gauss-Newton on fixed correspondences. The flag reports a normal
/// matrix too ill-conditioned to continue.
fn inner_solve(
    start: Pose2,
    pairs: &[Correspondence],
    params: &RegistrationParams,
    lambda: &mut f64,
    steps: &mut Vec<AcceptedStep>,
) -> (Pose2, bool) {
    let mut pose = start;
    let mut cost = total_cost(&pose, pairs, params);
    for _ in 0..params.inner_iterations {
        let (h, g) = normal_equations(&pose, pairs, params);
        if condition_number(&h) > params.max_condition {
            return (pose, true);
        }
        let mut accepted = false;
        for _ in 0..=params.max_rejections {
            let a = h + Matrix3::identity() * *lambda;
            let Some(chol) = a.cholesky() else {
                *lambda *= params.lambda_factor;
                continue;
            };
            let delta = -chol.solve(&g);
            let candidate = apply(&pose, &delta);
            let new_cost = total_cost(&candidate, pairs, params);
            if new_cost <= cost {
                steps.push(AcceptedStep {
                    before: cost,
                    after: new_cost,
                });
                let moved = delta.norm();
                pose = candidate;
                cost = new_cost;
                *lambda = (*lambda / params.lambda_factor).max(1e-12);
                accepted = true;
                if moved < params.tol {
                    return (pose, false);
                }
                break;
            }
            *lambda *= params.lambda_factor;
        }
        if !accepted {
            break;
        }
    }
    (pose, false)
}

/// Runs the registration loop with the chosen information model.
pub fn solve(
    cloud: &SemanticCloud,
    map: &HDMap,
    initial: Pose2,
    kind: SolverKind,
    params: &RegistrationParams,
) -> Result<SolveReport, RegistrationError> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    let map_covs = map_covariances(map, &params.epsilon);
    let mut pose = initial;
    let mut lambda = params.lambda_init;
    let mut counts = Vec::new();
    let mut steps = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut pairs: Vec<Correspondence> = Vec::new();
    let mut iterations = 0;

    for it in 0..params.max_iterations {
        let info_rot = if params.rebuild_information { pose.rotation() } else { initial.rotation() };
        pairs = build_correspondences(cloud, map, &map_covs, &pose, &info_rot, kind, params);
        if pairs.is_empty() {
            if it == 0 {
                return Err(RegistrationError::NoCorrespondences);
            }
            termination = Termination::LostCorrespondences;
            break;
        }
        counts.push(pairs.len());
        iterations = it + 1;
        let (next, singular) = inner_solve(pose, &pairs, params, &mut lambda, &mut steps);
        let moved = pose_delta(&pose, &next);
        pose = next;
        if singular {
            termination = Termination::SingularNormalMatrix;
            break;
        }
        if moved < params.tol {
            termination = Termination::Converged;
            break;
        }
    }
    let final_pairs = build_correspondences(cloud, map, &map_covs, &pose, &pose.rotation(), kind, params);
    let final_cost = if final_pairs.is_empty() {
        total_cost(&pose, &pairs, params)
    } else {
        total_cost(&pose, &final_pairs, params)
    };
    Ok(SolveReport {
        pose,
        iterations,
        converged: matches!(termination, Termination::Converged),
        termination,
        final_cost,
        correspondence_counts: counts,
        accepted_steps: steps,
    })
}

pub fn sgicp_solve(
    cloud: &SemanticCloud,
    map: &HDMap,
    initial: Pose2,
    params: &RegistrationParams,
) -> Result<SolveReport, RegistrationError> {
    solve(cloud, map, initial, SolverKind::Sgicp, params)
}

pub fn icp_solve(
    cloud: &SemanticCloud,
    map: &HDMap,
    initial: Pose2,
    params: &RegistrationParams,
) -> Result<SolveReport, RegistrationError> {
    solve(cloud, map, initial, SolverKind::Icp, params)
}

/// Objective Σ rᵀ M r at `pose` with correspondences re-associated at `pose`
/// and information built from `pose`'s rotation.
pub fn objective_at(
    cloud: &SemanticCloud,
    map: &HDMap,
    pose: &Pose2,
    kind: SolverKind,
    params: &RegistrationParams,
) -> (f64, usize) {
    let map_covs = map_covariances(map, &params.epsilon);
    let pairs = build_correspondences(cloud, map, &map_covs, pose, &pose.rotation(), kind, params);
    (total_cost(pose, &pairs, params), pairs.len())
}

