//! IoU-gated instance matching and per-label precision / recall / F1.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{LibevError, MarkingInstance, RasterGeometry};
use crate::types::MarkingLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LabelMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// Labels present in either set.
    pub per_label: BTreeMap<MarkingLabel, LabelMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl DetectionMetrics {
    pub fn get(&self, label: MarkingLabel) -> Option<&LabelMetrics> {
        self.per_label.get(&label)
    }

    /// Accumulates counts of several frames.
    pub fn pooled(parts: &[DetectionMetrics]) -> Self {
        let mut counts: BTreeMap<MarkingLabel, (usize, usize, usize)> = BTreeMap::new();
        for m in parts {
            for (l, v) in &m.per_label {
                let c = counts.entry(*l).or_default();
                c.0 += v.true_positives;
                c.1 += v.false_positives;
                c.2 += v.false_negatives;
            }
        }
        Self::from_counts(counts)
    }

    fn from_counts(counts: BTreeMap<MarkingLabel, (usize, usize, usize)>) -> Self {
        let per_label: BTreeMap<_, _> = counts
            .into_iter()
            .map(|(l, (tp, fp, fn_))| (l, LabelMetrics::from_counts(tp, fp, fn_)))
            .collect();
        let n = per_label.len().max(1) as f64;
        let mean = |f: fn(&LabelMetrics) -> f64| per_label.values().map(f).sum::<f64>() / n;
        Self {
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            per_label,
        }
    }
}

/// Intersection over union of two sorted pixel lists.
pub fn iou(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy one-to-one matching by descending IoU over same-label pairs with
/// IoU > 0.5; unmatched detections are false positives, unmatched truths
/// false negatives.
pub fn detection_metrics(
    detected: &[MarkingInstance],
    detected_geometry: &RasterGeometry,
    truth: &[MarkingInstance],
    truth_geometry: &RasterGeometry,
) -> Result<DetectionMetrics, LibevError> {
    if detected_geometry != truth_geometry {
        return Err(LibevError::GeometryMismatch);
    }
    let mut owners: HashMap<u32, Vec<usize>> = HashMap::new();
    for (ti, t) in truth.iter().enumerate() {
        for &p in &t.pixels {
            owners.entry(p).or_default().push(ti);
        }
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (di, d) in detected.iter().enumerate() {
        let mut touched: Vec<usize> = d
            .pixels
            .iter()
            .filter_map(|p| owners.get(p))
            .flatten()
            .copied()
            .collect();
        touched.sort_unstable();
        touched.dedup();
        for ti in touched {
            if truth[ti].label != d.label {
                continue;
            }
            let v = iou(&d.pixels, &truth[ti].pixels);
            if v > 0.5 {
                candidates.push((v, di, ti));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut d_used = vec![false; detected.len()];
    let mut t_used = vec![false; truth.len()];
    for (_, di, ti) in candidates {
        if !d_used[di] && !t_used[ti] {
            d_used[di] = true;
            t_used[ti] = true;
        }
    }
    let mut counts: BTreeMap<MarkingLabel, (usize, usize, usize)> = BTreeMap::new();
    for (di, d) in detected.iter().enumerate() {
        let c = counts.entry(d.label).or_default();
        if d_used[di] {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    for (ti, t) in truth.iter().enumerate() {
        if !t_used[ti] {
            counts.entry(t.label).or_default().2 += 1;
        }
    }
    Ok(DetectionMetrics::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vec2;

    fn geom() -> RasterGeometry {
        RasterGeometry::centered(Vec2::zeros(), 0.1, 10.0).unwrap()
    }

    fn inst(id: u32, label: MarkingLabel, pixels: std::ops::Range<u32>) -> MarkingInstance {
        MarkingInstance {
            instance_id: id,
            label,
            pixels: pixels.collect(),
            point_ids: vec![],
            centroid: Vec2::zeros(),
        }
    }

    #[test]
    fn iou_of_sorted_lists() {
        assert_eq!(iou(&[1, 2, 3], &[2, 3, 4]), 0.5);
        assert_eq!(iou(&[], &[]), 0.0);
    }

    #[test]
    fn geometry_mismatch() {
        let other = RasterGeometry::centered(Vec2::zeros(), 0.2, 10.0).unwrap();
        assert_eq!(detection_metrics(&[], &geom(), &[], &other), Err(LibevError::GeometryMismatch));
    }

    #[test]
    fn swapping_sets_swaps_precision_and_recall() {
        let g = geom();
        let a = vec![
            inst(0, MarkingLabel::Arrow, 0..10),
            inst(1, MarkingLabel::Arrow, 50..60),
            inst(2, MarkingLabel::SolidLane, 100..130),
        ];
        let b = vec![inst(0, MarkingLabel::Arrow, 1..10), inst(1, MarkingLabel::SolidLane, 200..210)];
        let ab = detection_metrics(&a, &g, &b, &g).unwrap();
        let ba = detection_metrics(&b, &g, &a, &g).unwrap();
        for (l, m) in &ab.per_label {
            let n = ba.get(*l).unwrap();
            assert_eq!(m.precision, n.recall);
            assert_eq!(m.recall, n.precision);
        }
    }
}
