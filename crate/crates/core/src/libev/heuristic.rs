//! Rule-based instance labeler: occupancy threshold, 8-connected components,
//! shape features, label rules.

use serde::{Deserialize, Serialize};

use super::{Labeler, LibevError, LiBEVRaster, MarkingInstance};
use crate::types::{MarkingLabel, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    /// Cells below this max intensity are treated as background.
    pub occupancy_intensity: f32,
    pub min_pixels: usize,
    /// Bars at most this wide (m) are line-like.
    pub max_bar_width: f64,
    pub min_bar_elongation: f64,
    /// Bars at least this long (m) are continuous lines.
    pub solid_min_length: f64,
    /// Mean filled width (m) separating curbs from painted solid lines.
    pub curb_min_width: f64,
    /// Mean filled width (m) separating thick bars (stop lines, crosswalk stripes) from lane paint.
    pub thick_bar_width: f64,
    pub dash_min_length: f64,
    /// Lateral window (m) in which parallel bars count as crosswalk neighbours.
    pub crosswalk_spacing_max: f64,
    pub profile_bin: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            occupancy_intensity: 0.0,
            min_pixels: 4,
            max_bar_width: 0.8,
            min_bar_elongation: 3.0,
            solid_min_length: 8.0,
            curb_min_width: 0.27,
            thick_bar_width: 0.3,
            dash_min_length: 1.0,
            crosswalk_spacing_max: 1.6,
            profile_bin: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentFeatures {
    pub pixel_count: usize,
    pub area: f64,
    pub centroid: Vec2,
    /// Unit major axis.
    pub axis: Vec2,
    pub length: f64,
    /// Extent across the major axis.
    pub width: f64,
    /// area / length.
    pub mean_width: f64,
    /// Cross-axis extent per bin along the major axis, from min to max projection.
    pub profile: Vec<f64>,
}

impl ComponentFeatures {
    pub fn elongation(&self) -> f64 {
        self.length / self.width.max(1e-9)
    }

    fn profile_median(&self) -> f64 {
        let mut p = self.profile.clone();
        p.sort_by(f64::total_cmp);
        p.get(p.len() / 2).copied().unwrap_or(0.0)
    }

    fn profile_argmax(&self) -> (usize, f64) {
        self.profile
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc })
    }

    fn peak_count(&self, min_drop: f64) -> usize {
        // Peaks separated by valleys at least `min_drop` deep.
        let mut peaks = 0;
        let mut rising = true;
        let mut last_extreme = 0.0f64;
        for &w in &self.profile {
            if rising {
                if w > last_extreme {
                    last_extreme = w;
                } else if last_extreme - w >= min_drop {
                    peaks += 1;
                    rising = false;
                    last_extreme = w;
                }
            } else if w < last_extreme {
                last_extreme = w;
            } else if w - last_extreme >= min_drop {
                rising = true;
                last_extreme = w;
            }
        }
        if rising && last_extreme > 0.0 {
            peaks += 1;
        }
        peaks
    }
}

/// 8-connected components of occupied cells, each as sorted cell indices, in
/// order of their first cell.
pub fn connected_components(raster: &LiBEVRaster, occupancy_intensity: f32) -> Vec<Vec<u32>> {
    let g = &raster.geometry;
    let (w, h) = (g.width, g.height);
    let occupied = |c: usize| raster.max_intensity(c).is_some_and(|m| m >= occupancy_intensity);
    let mut seen = vec![false; g.cell_count()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..g.cell_count() {
        if seen[start] || !occupied(start) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(c) = stack.pop() {
            comp.push(c as u32);
            let (ix, iy) = g.coords(c);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let n = g.index(nx as usize, ny as usize);
                    if !seen[n] && occupied(n) {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn component_features(raster: &LiBEVRaster, pixels: &[u32], bin: f64) -> ComponentFeatures {
    let g = &raster.geometry;
    let res = g.resolution;
    let centers: Vec<Vec2> = pixels.iter().map(|&c| g.cell_center(c as usize)).collect();
    let n = centers.len().max(1) as f64;
    let centroid = centers.iter().sum::<Vec2>() / n;
    let axis = crate::hdmap::principal_axis(&centers).unwrap_or(Vec2::new(1.0, 0.0));
    let perp = Vec2::new(-axis.y, axis.x);
    let proj: Vec<(f64, f64)> = centers
        .iter()
        .map(|p| {
            let d = p - centroid;
            (d.dot(&axis), d.dot(&perp))
        })
        .collect();
    let (umin, umax) = proj.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (vmin, vmax) = proj.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let length = umax - umin + res;
    let width = vmax - vmin + res;
    let area = n * res * res;
    let bins = ((length / bin).ceil() as usize).max(1);
    let mut lo = vec![f64::MAX; bins];
    let mut hi = vec![f64::MIN; bins];
    for &(u, v) in &proj {
        let b = (((u - umin) / bin) as usize).min(bins - 1);
        lo[b] = lo[b].min(v);
        hi[b] = hi[b].max(v);
    }
    let profile = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| if *l <= *h { h - l + res } else { 0.0 })
        .collect();
    ComponentFeatures {
        pixel_count: pixels.len(),
        area,
        centroid,
        axis,
        length,
        width,
        mean_width: area / length,
        profile,
    }
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicLabeler {
    pub config: HeuristicConfig,
}

impl HeuristicLabeler {
    pub fn new(config: HeuristicConfig) -> Self {
        Self { config }
    }

    fn is_bar(&self, f: &ComponentFeatures) -> bool {
        let c = &self.config;
        let median = f.profile_median();
        let (_, max) = f.profile_argmax();
        f.width <= c.max_bar_width && f.elongation() >= c.min_bar_elongation && max <= 1.6 * median + 0.15
    }

    fn parallel_neighbours(&self, i: usize, feats: &[ComponentFeatures], bars: &[bool]) -> usize {
        let f = &feats[i];
        let perp = Vec2::new(-f.axis.y, f.axis.x);
        (0..feats.len())
            .filter(|&j| j != i && bars[j])
            .filter(|&j| {
                let o = &feats[j];
                let d = o.centroid - f.centroid;
                let lateral = d.dot(&perp).abs();
                let along = d.dot(&f.axis).abs();
                f.axis.dot(&o.axis).abs() > 10f64.to_radians().cos()
                    && lateral >= 0.5
                    && lateral <= self.config.crosswalk_spacing_max
                    && along < 0.5 * f.length.max(o.length)
                    && (o.length - f.length).abs() < 0.5 * f.length.max(o.length)
            })
            .count()
    }

    fn classify_blob(&self, f: &ComponentFeatures) -> MarkingLabel {
        let n = f.profile.len();
        let (peak, max) = f.profile_argmax();
        let median = f.profile_median();
        let pos = (peak as f64 + 0.5) / n as f64;
        let at_end = !(0.3..=0.7).contains(&pos);
        let peaks = f.peak_count((0.35 * max).max(0.2));
        if peaks >= 2 {
            return MarkingLabel::Text;
        }
        if at_end {
            if median <= 0.4 * max {
                MarkingLabel::Arrow
            } else {
                MarkingLabel::TriangleSign
            }
        } else {
            let ends = f.profile[0].max(f.profile[n - 1]);
            if ends <= 0.5 * max && f.elongation() >= 2.0 {
                MarkingLabel::DiamondSign
            } else {
                MarkingLabel::Text
            }
        }
    }
}

impl Labeler for HeuristicLabeler {
    fn label(&self, raster: &LiBEVRaster, _tags: Option<&[Option<u32>]>) -> Result<Vec<MarkingInstance>, LibevError> {
        let c = &self.config;
        let comps: Vec<Vec<u32>> = connected_components(raster, c.occupancy_intensity)
            .into_iter()
            .filter(|p| p.len() >= c.min_pixels)
            .collect();
        let feats: Vec<ComponentFeatures> = comps
            .iter()
            .map(|p| component_features(raster, p, c.profile_bin))
            .collect();
        let bars: Vec<bool> = feats.iter().map(|f| self.is_bar(f)).collect();
        let mut out = Vec::with_capacity(comps.len());
        for (i, (pixels, f)) in comps.into_iter().zip(&feats).enumerate() {
            let label = if bars[i] {
                if f.length >= c.solid_min_length {
                    if f.mean_width >= c.curb_min_width {
                        MarkingLabel::Curb
                    } else {
                        MarkingLabel::SolidLane
                    }
                } else if f.mean_width >= c.thick_bar_width {
                    if self.parallel_neighbours(i, &feats, &bars) >= 1 {
                        MarkingLabel::Crosswalk
                    } else {
                        MarkingLabel::StopLine
                    }
                } else if f.length >= c.dash_min_length {
                    MarkingLabel::DashedLane
                } else {
                    continue;
                }
            } else {
                self.classify_blob(f)
            };
            out.push(MarkingInstance::from_mask(out.len() as u32, label, pixels, raster));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::libev::RasterGeometry;

    fn rect_raster(rects: &[(f64, f64, f64, f64)]) -> LiBEVRaster {
        let g = RasterGeometry::centered(Vec2::zeros(), 0.1, 60.0).unwrap();
        let mut pts = Vec::new();
        for &(x0, y0, x1, y1) in rects {
            let mut x = x0 + 0.025;
            while x < x1 {
                let mut y = y0 + 0.025;
                while y < y1 {
                    pts.push((Vec2::new(x, y), 180.0f32));
                    y += 0.05;
                }
                x += 0.05;
            }
        }
        LiBEVRaster::from_points(g, pts)
    }

    #[test]
    fn long_thin_bar_is_solid_lane() {
        let r = rect_raster(&[(-20.0, 1.0, 20.0, 1.15)]);
        let inst = HeuristicLabeler::default().label(&r, None).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].label, MarkingLabel::SolidLane);
    }

    #[test]
    fn bars_and_dashes() {
        let r = rect_raster(&[
            (0.0, 0.0, 3.0, 0.15),
            (-10.0, -5.0, -9.6, 1.0),
            (5.0, -5.0, 8.0, -4.55),
            (5.0, -4.0, 8.0, -3.55),
            (5.0, -3.0, 8.0, -2.55),
        ]);
        let inst = HeuristicLabeler::default().label(&r, None).unwrap();
        let labels: Vec<MarkingLabel> = inst.iter().map(|i| i.label).collect();
        assert_eq!(labels.iter().filter(|l| **l == MarkingLabel::Crosswalk).count(), 3);
        assert!(labels.contains(&MarkingLabel::StopLine));
        assert!(labels.contains(&MarkingLabel::DashedLane));
    }

    #[test]
    fn components_are_eight_connected() {
        let g = RasterGeometry::centered(Vec2::zeros(), 1.0, 10.0).unwrap();
        let pts = [(Vec2::new(0.5, 0.5), 1.0f32), (Vec2::new(1.5, 1.5), 1.0), (Vec2::new(3.5, 3.5), 1.0)];
        let r = LiBEVRaster::from_points(g, pts);
        assert_eq!(connected_components(&r, 0.0).len(), 2);
    }
}
