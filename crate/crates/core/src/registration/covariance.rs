//! Anisotropic shape covariances for semantic point pairs.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ConstraintCategory, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovarianceError {
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("direction is not unit length (|v| = {0})")]
    NonUnitDirection(f64),
}

/// Symmetric PSD 2x2 shape matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropicCov(pub Matrix2<f64>);

impl AnisotropicCov {
    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    /// `R diag(1, eps) Rᵀ` with R taking e1 to `axis` (assumed unit).
    pub fn from_axis(axis: &Vec2, eps: f64) -> Self {
        let (c, s) = (axis.x, axis.y);
        let a = c * c + eps * s * s;
        let b = (1.0 - eps) * c * s;
        let d = s * s + eps * c * c;
        Self(Matrix2::new(a, b, b, d))
    }

    /// Eigenvalues in descending order with the unit eigenvector of the larger one.
    pub fn eigen(&self) -> (f64, f64, Vec2) {
        let m = &self.0;
        let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let theta = 0.5 * (2.0 * b).atan2(a - d);
        (mean + r, mean - r, Vec2::new(theta.cos(), theta.sin()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.0[(0, 1)] - self.0[(1, 0)]).abs() <= tol
    }
}

/// Per-category ε values, overridable from config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonTable {
    pub lines: f64,
    pub line_segments: f64,
    pub others: f64,
}

impl Default for EpsilonTable {
    fn default() -> Self {
        Self {
            lines: ConstraintCategory::Lines.epsilon(),
            line_segments: ConstraintCategory::LineSegments.epsilon(),
            others: ConstraintCategory::Others.epsilon(),
        }
    }
}

impl EpsilonTable {
    pub fn get(&self, category: ConstraintCategory) -> f64 {
        match category {
            ConstraintCategory::Lines => self.lines,
            ConstraintCategory::LineSegments => self.line_segments,
            ConstraintCategory::Others => self.others,
        }
    }
}

/// Sample covariance with the 1/(n-1) normalization, as (sxx, sxy, syy).
pub fn sample_covariance(points: &[Vec2]) -> Option<(f64, f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().sum::<Vec2>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    Some((sxx / (n - 1.0), sxy / (n - 1.0), syy / (n - 1.0)))
}

/// Instance covariance with an explicit ε: the empirical principal frame with
/// its spectrum replaced by diag(1, ε).
pub fn instance_covariance_eps(points: &[Vec2], eps: f64) -> Result<AnisotropicCov, CovarianceError> {
    if eps == 1.0 {
        if points.is_empty() {
            return Err(CovarianceError::DegenerateInstance("no points".into()));
        }
        return Ok(AnisotropicCov::identity());
    }
    let (sxx, sxy, syy) = sample_covariance(points)
        .ok_or_else(|| CovarianceError::DegenerateInstance("fewer than two points".into()))?;
    let scale = sxx + syy;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(CovarianceError::DegenerateInstance("coincident points".into()));
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Ok(AnisotropicCov::from_axis(&Vec2::new(theta.cos(), theta.sin()), eps))
}

pub fn instance_covariance(
    points: &[Vec2],
    category: ConstraintCategory,
) -> Result<AnisotropicCov, CovarianceError> {
    instance_covariance_eps(points, category.epsilon())
}

/// Like [`instance_covariance_eps`] but falls back to `hint` (then to the
/// isotropic shape) when the points carry no direction.
pub fn instance_covariance_or(points: &[Vec2], eps: f64, hint: Option<Vec2>) -> AnisotropicCov {
    match instance_covariance_eps(points, eps) {
        Ok(c) => c,
        Err(_) => match hint {
            Some(v) if v.norm() > 1e-9 => AnisotropicCov::from_axis(&v.normalize(), eps),
            _ => AnisotropicCov::identity(),
        },
    }
}

pub fn map_covariance_eps(direction: &Vec2, eps: f64) -> Result<AnisotropicCov, CovarianceError> {
    let n = direction.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(CovarianceError::NonUnitDirection(n));
    }
    Ok(AnisotropicCov::from_axis(direction, eps))
}

pub fn map_covariance(
    direction: &Vec2,
    category: ConstraintCategory,
) -> Result<AnisotropicCov, CovarianceError> {
    map_covariance_eps(direction, category.epsilon())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_line() {
        let pts: Vec<Vec2> = (0..10).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let c = instance_covariance(&pts, ConstraintCategory::Lines).unwrap();
        assert!((c.0 - Matrix2::new(1.0, 0.0, 0.0, 1e-6)).abs().max() < 1e-15);
        let c = instance_covariance(&pts, ConstraintCategory::Others).unwrap();
        assert_eq!(c.0, Matrix2::identity());
    }

    #[test]
    fn map_covariance_examples() {
        let c = map_covariance(&Vec2::new(1.0, 0.0), ConstraintCategory::Lines).unwrap();
        assert_eq!(c.0, Matrix2::new(1.0, 0.0, 0.0, 1e-6));
        let c = map_covariance(&Vec2::new(0.0, 1.0), ConstraintCategory::Lines).unwrap();
        assert_eq!(c.0, Matrix2::new(1e-6, 0.0, 0.0, 1.0));
        assert!(matches!(
            map_covariance(&Vec2::new(0.0, 1.1), ConstraintCategory::Lines),
            Err(CovarianceError::NonUnitDirection(_))
        ));
    }

    #[test]
    fn coincident_points_fall_back() {
        let pts = vec![Vec2::new(1.0, 1.0); 4];
        assert!(instance_covariance(&pts, ConstraintCategory::Lines).is_err());
        let c = instance_covariance_or(&pts, 1e-6, Some(Vec2::new(0.0, 2.0)));
        assert!((c.0 - Matrix2::new(1e-6, 0.0, 0.0, 1.0)).abs().max() < 1e-15);
        assert_eq!(instance_covariance_or(&pts, 1e-6, None).0, Matrix2::identity());
        assert_eq!(instance_covariance(&pts[..1], ConstraintCategory::Others).unwrap().0, Matrix2::identity());
    }
}
