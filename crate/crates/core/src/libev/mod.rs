//! LiBEV rasterization, pluggable instance labelers and back-projection of
//! pixel masks into a labeled point cloud.

mod export;
mod heuristic;
mod metrics;
pub mod palette;
mod raster;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::localmap::LocalMap;
use crate::types::{MarkingLabel, Vec2};

pub use export::{
    encode_png, instance_rle, pixel_index, render_rgb, write_instances, write_pixel_index, write_png, write_raster_bundle,
    InstanceRle, PixelIndex,
};
pub use heuristic::{component_features, connected_components, ComponentFeatures, HeuristicConfig, HeuristicLabeler};
pub use metrics::{detection_metrics, iou, DetectionMetrics, LabelMetrics};
pub use raster::{LiBEVRaster, RasterGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LibevError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("labeler failure: {0}")]
    LabelerFailure(String),
    #[error("raster geometries differ")]
    GeometryMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterConfig {
    pub resolution: f64,
    pub extent: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            extent: 60.0,
        }
    }
}

/// One labeled mask with its back-projected points.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkingInstance {
    pub instance_id: u32,
    pub label: MarkingLabel,
    /// Sorted cell indices.
    pub pixels: Vec<u32>,
    /// Sorted point ids of the masked cells.
    pub point_ids: Vec<u32>,
    /// Mean of the masked cell centers.
    pub centroid: Vec2,
}

impl MarkingInstance {
    /// Builds an instance from a pixel mask, collecting every point of the masked cells.
    pub fn from_mask(instance_id: u32, label: MarkingLabel, mut pixels: Vec<u32>, raster: &LiBEVRaster) -> Self {
        pixels.sort_unstable();
        pixels.dedup();
        let mut point_ids: Vec<u32> = pixels
            .iter()
            .flat_map(|&c| raster.point_ids(c as usize).iter().copied())
            .collect();
        point_ids.sort_unstable();
        let centroid = if pixels.is_empty() {
            Vec2::zeros()
        } else {
            pixels
                .iter()
                .map(|&c| raster.geometry.cell_center(c as usize))
                .sum::<Vec2>()
                / pixels.len() as f64
        };
        Self {
            instance_id,
            label,
            pixels,
            point_ids,
            centroid,
        }
    }
}

/// Instance segmentation over a raster. `tags` holds per-point ground-truth
/// element ids (indexed by point id) when available.
pub trait Labeler: Send + Sync {
    fn label(&self, raster: &LiBEVRaster, tags: Option<&[Option<u32>]>) -> Result<Vec<MarkingInstance>, LibevError>;
}

/// Reads simulator truth: every cell goes to the element owning most of its
/// points (asphalt counts as a candidate), one instance per element.
#[derive(Debug, Clone, Default)]
pub struct OracleLabeler {
    labels: BTreeMap<u32, MarkingLabel>,
}

impl OracleLabeler {
    pub fn new(labels: impl IntoIterator<Item = (u32, MarkingLabel)>) -> Self {
        Self {
            labels: labels.into_iter().collect(),
        }
    }

    pub fn from_map(map: &crate::hdmap::HDMap) -> Self {
        Self::new(map.elements().iter().map(|e| (e.id, e.label)))
    }
}

impl Labeler for OracleLabeler {
    fn label(&self, raster: &LiBEVRaster, tags: Option<&[Option<u32>]>) -> Result<Vec<MarkingInstance>, LibevError> {
        let tags = tags.ok_or_else(|| LibevError::LabelerFailure("oracle labeler needs point tags".into()))?;
        let mut masks: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut votes: Vec<(Option<u32>, usize)> = Vec::new();
        for cell in raster.occupied_cells() {
            votes.clear();
            for &id in raster.point_ids(cell) {
                let t = *tags
                    .get(id as usize)
                    .ok_or_else(|| LibevError::LabelerFailure(format!("point {id} has no tag")))?;
                match votes.iter_mut().find(|(k, _)| *k == t) {
                    Some(v) => v.1 += 1,
                    None => votes.push((t, 1)),
                }
            }
            // Highest count wins; ties go to the lowest id, asphalt last.
            let best = votes
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| rank(b.0).cmp(&rank(a.0))))
                .and_then(|v| v.0);
            if let Some(id) = best {
                if self.labels.contains_key(&id) {
                    masks.entry(id).or_default().push(cell as u32);
                }
            }
        }
        Ok(masks
            .into_iter()
            .map(|(id, px)| MarkingInstance::from_mask(id, self.labels[&id], px, raster))
            .collect())
    }
}

fn rank(t: Option<u32>) -> u64 {
    t.map_or(u64::MAX, u64::from)
}

/// Rasterizes the local map around its current vehicle position.
pub fn rasterize(map: &LocalMap, config: &RasterConfig) -> Result<LiBEVRaster, LibevError> {
    let center = map.pose().translation();
    let geometry = RasterGeometry::centered(center, config.resolution, config.extent)?;
    Ok(LiBEVRaster::from_points(
        geometry,
        map.points().iter().map(|p| (p.point.xy(), p.point.intensity)),
    ))
}

/// Per-point truth tags of a local map snapshot.
pub fn map_tags(map: &LocalMap) -> Vec<Option<u32>> {
    map.points().iter().map(|p| p.tag).collect()
}

pub fn label_instances(
    raster: &LiBEVRaster,
    labeler: &dyn Labeler,
    tags: Option<&[Option<u32>]>,
) -> Result<Vec<MarkingInstance>, LibevError> {
    labeler.label(raster, tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_groups_by_element() {
        let g = RasterGeometry::centered(Vec2::zeros(), 0.1, 10.0).unwrap();
        let mut pts = Vec::new();
        let mut tags = Vec::new();
        // Three dashes and one arrow blob.
        for (k, x0) in [-3.0, 0.0, 3.0].iter().enumerate() {
            for i in 0..20 {
                pts.push((Vec2::new(x0 + i as f64 * 0.1, 1.0), 180.0f32));
                tags.push(Some(k as u32));
            }
        }
        for i in 0..10 {
            pts.push((Vec2::new(i as f64 * 0.1, -2.0), 180.0));
            tags.push(Some(9));
        }
        pts.push((Vec2::new(-4.0, -4.0), 150.0));
        tags.push(None);
        let raster = LiBEVRaster::from_points(g, pts);
        let oracle = OracleLabeler::new([
            (0, MarkingLabel::DashedLane),
            (1, MarkingLabel::DashedLane),
            (2, MarkingLabel::DashedLane),
            (9, MarkingLabel::Arrow),
        ]);
        let inst = label_instances(&raster, &oracle, Some(&tags)).unwrap();
        assert_eq!(inst.len(), 4);
        assert_eq!(inst.iter().filter(|i| i.label == MarkingLabel::DashedLane).count(), 3);
        assert_eq!(inst[3].label, MarkingLabel::Arrow);
        for i in &inst {
            assert!(!i.pixels.is_empty());
            for &p in &i.point_ids {
                assert!(tags[p as usize].is_some());
            }
        }
        assert!(oracle.label(&raster, None).is_err());
    }

    #[test]
    fn empty_raster_gives_no_instances() {
        let g = RasterGeometry::centered(Vec2::zeros(), 0.1, 10.0).unwrap();
        let raster = LiBEVRaster::empty(g);
        assert!(OracleLabeler::default().label(&raster, Some(&[])).unwrap().is_empty());
        assert!(HeuristicLabeler::default().label(&raster, None).unwrap().is_empty());
    }
}
