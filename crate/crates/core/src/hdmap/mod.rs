//! HD-map data model, file format and label-gated nearest-neighbour association.

mod format;
mod grid;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::types::{MarkingLabel, Pose2, Vec2};

pub use format::{from_json_str, load_map, save_map, to_json_string, MAP_FORMAT_VERSION};
pub use grid::{GridIndex2, Nearest};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("element {id}: {reason}")]
    Validation { id: u32, reason: String },
    #[error("unsupported map version {0}")]
    Version(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One semantic element: main direction, label and densely sampled points.
#[derive(Debug, Clone, PartialEq)]
pub struct MapElement {
    pub id: u32,
    pub label: MarkingLabel,
    pub direction: Vec2,
    pub points: Vec<Vec2>,
}

/// Dominant principal axis of a point set, or `None` when it has no spread.
pub fn principal_axis(points: &[Vec2]) -> Option<Vec2> {
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
    if sxx + syy <= 0.0 {
        return None;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(Vec2::new(theta.cos(), theta.sin()))
}

impl MapElement {
    /// Element with its direction set to the principal axis of `points`.
    pub fn from_points(id: u32, label: MarkingLabel, points: Vec<Vec2>) -> Self {
        let direction = principal_axis(&points).unwrap_or(Vec2::new(1.0, 0.0));
        Self {
            id,
            label,
            direction,
            points,
        }
    }

    /// Checks invariants, renormalizing the direction in place.
    pub fn validate(&mut self) -> Result<(), MapError> {
        let fail = |reason: String| MapError::Validation { id: self.id, reason };
        if self.points.is_empty() {
            return Err(fail("element has no points".into()));
        }
        if self.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(fail("non-finite point coordinate".into()));
        }
        let norm = self.direction.norm();
        if !norm.is_finite() || norm < 1e-9 {
            return Err(fail(format!("direction vector has length {norm}")));
        }
        if (norm - 1.0).abs() > 1e-9 {
            self.direction /= norm;
        }
        if self.label.category().is_linear() {
            if let Some(axis) = principal_axis(&self.points) {
                let cos = self.direction.dot(&axis).abs().min(1.0);
                let angle = cos.acos().to_degrees();
                if angle > 1.0 {
                    return Err(MapError::Validation {
                        id: self.id,
                        reason: format!("direction deviates {angle:.2} deg from the principal axis"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Reference to one stored map point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapPointRef {
    pub element: usize,
    pub point: usize,
}

const INDEX_CELL_M: f64 = 0.5;

/// Immutable HD map with one spatial index per label.
#[derive(Debug, Clone)]
pub struct HDMap {
    elements: Vec<MapElement>,
    index: BTreeMap<MarkingLabel, (GridIndex2, Vec<MapPointRef>)>,
}

impl HDMap {
    pub fn new(mut elements: Vec<MapElement>) -> Result<Self, MapError> {
        let mut seen = std::collections::HashSet::new();
        for e in elements.iter_mut() {
            e.validate()?;
            if !seen.insert(e.id) {
                return Err(MapError::Validation {
                    id: e.id,
                    reason: "duplicate element id".into(),
                });
            }
        }
        let mut refs: BTreeMap<MarkingLabel, Vec<MapPointRef>> = BTreeMap::new();
        for (ei, e) in elements.iter().enumerate() {
            let r = refs.entry(e.label).or_default();
            r.extend((0..e.points.len()).map(|pi| MapPointRef { element: ei, point: pi }));
        }
        let index = refs
            .into_iter()
            .map(|(label, refs)| {
                let tree = GridIndex2::build(
                    refs.iter()
                        .enumerate()
                        .map(|(k, r)| (elements[r.element].points[r.point], k as u32)),
                    INDEX_CELL_M,
                );
                (label, (tree, refs))
            })
            .collect();
        Ok(Self { elements, index })
    }

    pub fn elements(&self) -> &[MapElement] {
        &self.elements
    }

    pub fn element(&self, idx: usize) -> &MapElement {
        &self.elements[idx]
    }

    pub fn element_by_id(&self, id: u32) -> Option<&MapElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn point_count(&self) -> usize {
        self.elements.iter().map(|e| e.points.len()).sum()
    }

    /// Nearest map point with the given label within `max_dist`.
    pub fn nearest(&self, label: MarkingLabel, q: &Vec2, max_dist: f64) -> Option<(MapPointRef, f64)> {
        let (tree, refs) = self.index.get(&label)?;
        tree.nearest_within(q, max_dist * max_dist)
            .map(|n| (refs[n.key as usize], n.dist2.sqrt()))
    }
}

/// A point of the semantic cloud in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Vec2,
    pub label: MarkingLabel,
    pub instance: u32,
}

/// One label-gated nearest-neighbour pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    /// Index into the input point slice.
    pub source: usize,
    /// Point in the vehicle (local) frame.
    pub local: Vec2,
    /// Matched map point (map frame).
    pub map_point: Vec2,
    /// Index of the matched element in `HDMap::elements`.
    pub element: usize,
    pub element_id: u32,
    pub instance: u32,
    pub distance: f64,
}

/// Pairs each transformed point with its nearest same-label map point within `max_dist`.
pub fn associate(points: &[LabeledPoint], pose: &Pose2, map: &HDMap, max_dist: f64) -> Vec<Association> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, lp)| {
            let q = pose.transform_point(&lp.position);
            map.nearest(lp.label, &q, max_dist).map(|(r, d)| {
                let e = &map.elements[r.element];
                Association {
                    source: i,
                    local: lp.position,
                    map_point: e.points[r.point],
                    element: r.element,
                    element_id: e.id,
                    instance: lp.instance,
                    distance: d,
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn lane(id: u32, y: f64, label: MarkingLabel) -> MapElement {
        MapElement::from_points(id, label, (0..50).map(|i| Vec2::new(i as f64 * 0.1, y)).collect())
    }

    #[test]
    fn direction_is_renormalized_and_checked() {
        let mut e = lane(0, 0.0, MarkingLabel::SolidLane);
        e.direction = Vec2::new(3.0, 0.0);
        e.validate().unwrap();
        assert!((e.direction.norm() - 1.0).abs() < 1e-12);
        e.direction = Vec2::new(0.0, 1.0);
        assert!(matches!(e.validate(), Err(MapError::Validation { id: 0, .. })));
        e.direction = Vec2::zeros();
        assert!(e.validate().is_err());
    }

    #[test]
    fn exact_hit_has_zero_distance() {
        let map = HDMap::new(vec![lane(0, 0.0, MarkingLabel::SolidLane)]).unwrap();
        let pts = [LabeledPoint {
            position: Vec2::new(1.0, 0.0),
            label: MarkingLabel::SolidLane,
            instance: 0,
        }];
        let a = associate(&pts, &Pose2::identity(), &map, 2.0);
        assert_eq!(a.len(), 1);
        assert!(a[0].distance < 1e-12);
    }

    #[test]
    fn association_is_label_gated() {
        let map = HDMap::new(vec![
            lane(0, 0.1, MarkingLabel::DashedLane),
            lane(1, 1.0, MarkingLabel::SolidLane),
        ])
        .unwrap();
        let pts = [LabeledPoint {
            position: Vec2::new(2.0, 0.0),
            label: MarkingLabel::SolidLane,
            instance: 0,
        }];
        let a = associate(&pts, &Pose2::identity(), &map, 2.0);
        assert_eq!(a[0].element_id, 1);
        assert!(associate(&pts, &Pose2::identity(), &map, 0.5).is_empty());
        let arrow = [LabeledPoint {
            label: MarkingLabel::Arrow,
            ..pts[0]
        }];
        assert!(associate(&arrow, &Pose2::identity(), &map, 2.0).is_empty());
    }

    #[test]
    fn matches_brute_force_on_random_scene() {
        let mut rng = stream_rng(42, 0, 0);
        let labels = [MarkingLabel::SolidLane, MarkingLabel::Arrow, MarkingLabel::StopLine];
        let mut elements = Vec::new();
        for id in 0..10u32 {
            let label = labels[id as usize % 3];
            let pts: Vec<Vec2> = (0..50)
                .map(|_| Vec2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)))
                .collect();
            let mut e = MapElement::from_points(id, label, pts);
            if label.category().is_linear() {
                e.direction = principal_axis(&e.points).unwrap();
            }
            elements.push(e);
        }
        let map = HDMap::new(elements).unwrap();
        let pose = Pose2::new(0.7, -0.4, 0.2);
        let pts: Vec<LabeledPoint> = (0..200)
            .map(|i| LabeledPoint {
                position: Vec2::new(rng.random_range(-22.0..22.0), rng.random_range(-22.0..22.0)),
                label: labels[i % 3],
                instance: i as u32,
            })
            .collect();
        let max_dist = 2.0;
        let got = associate(&pts, &pose, &map, max_dist);

        // O(N·M) label-filtered scan.
        let mut expected = Vec::new();
        for (i, lp) in pts.iter().enumerate() {
            let q = pose.transform_point(&lp.position);
            let mut best: Option<(f64, Vec2, u32)> = None;
            for e in map.elements().iter().filter(|e| e.label == lp.label) {
                for p in &e.points {
                    let d = (p - q).norm();
                    if d <= max_dist && best.map_or(true, |b| d < b.0) {
                        best = Some((d, *p, e.id));
                    }
                }
            }
            if let Some(b) = best {
                expected.push((i, b));
            }
        }
        assert_eq!(got.len(), expected.len());
        for (a, (i, (d, p, id))) in got.iter().zip(expected) {
            assert_eq!(a.source, i);
            assert!((a.distance - d).abs() < 1e-12);
            assert_eq!(a.map_point, p);
            assert_eq!(a.element_id, id);
            assert!(a.distance <= max_dist);
        }
    }
}
