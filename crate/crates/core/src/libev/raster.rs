//! Max-intensity bird's-eye-view grid over a point snapshot.

use serde::{Deserialize, Serialize};

use super::LibevError;
use crate::types::Vec2;

/// Placement of the grid: pixel (ix, iy) covers
/// `[origin + (ix, iy) * resolution, origin + (ix + 1, iy + 1) * resolution)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterGeometry {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl RasterGeometry {
    /// Square grid of side `extent` centered on `center`.
    pub fn centered(center: Vec2, resolution: f64, extent: f64) -> Result<Self, LibevError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(LibevError::InvalidParameter("resolution must be positive".into()));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(LibevError::InvalidParameter("extent must be positive".into()));
        }
        let n = (extent / resolution).round().max(1.0) as usize;
        let half = n as f64 * resolution / 2.0;
        // Snap the origin to the resolution lattice so consecutive rasters share cell boundaries.
        let ox = ((center.x - half) / resolution).floor() * resolution;
        let oy = ((center.y - half) / resolution).floor() * resolution;
        Ok(Self {
            origin: [ox, oy],
            resolution,
            width: n,
            height: n,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel_of(&self, p: &Vec2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin[0]) / self.resolution).floor();
        let fy = ((p.y - self.origin[1]) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn cell_center(&self, cell: usize) -> Vec2 {
        let (ix, iy) = self.coords(cell);
        Vec2::new(
            self.origin[0] + (ix as f64 + 0.5) * self.resolution,
            self.origin[1] + (iy as f64 + 0.5) * self.resolution,
        )
    }
}

/// LiBEV grid stored in compressed rows: the point ids of cell `c` are
/// `point_ids[cell_start[c]..cell_start[c + 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiBEVRaster {
    pub geometry: RasterGeometry,
    cell_start: Vec<u32>,
    point_ids: Vec<u32>,
    max_intensity: Vec<f32>,
}

impl LiBEVRaster {
    /// Bins `(position, intensity)` pairs; the pair's position in the iterator is its point id.
    pub fn from_points<I>(geometry: RasterGeometry, points: I) -> Self
    where
        I: IntoIterator<Item = (Vec2, f32)>,
    {
        let n_cells = geometry.cell_count();
        let mut binned: Vec<(u32, u32)> = Vec::new();
        let mut max_intensity = vec![f32::NAN; n_cells];
        for (id, (p, intensity)) in points.into_iter().enumerate() {
            if let Some((ix, iy)) = geometry.pixel_of(&p) {
                let c = geometry.index(ix, iy);
                binned.push((c as u32, id as u32));
                let m = &mut max_intensity[c];
                if m.is_nan() || intensity > *m {
                    *m = intensity;
                }
            }
        }
        let mut cell_start = vec![0u32; n_cells + 1];
        for &(c, _) in &binned {
            cell_start[c as usize + 1] += 1;
        }
        for c in 0..n_cells {
            cell_start[c + 1] += cell_start[c];
        }
        let mut cursor = cell_start.clone();
        let mut point_ids = vec![0u32; binned.len()];
        for &(c, id) in &binned {
            let slot = &mut cursor[c as usize];
            point_ids[*slot as usize] = id;
            *slot += 1;
        }
        Self {
            geometry,
            cell_start,
            point_ids,
            max_intensity,
        }
    }

    pub fn empty(geometry: RasterGeometry) -> Self {
        Self::from_points(geometry, std::iter::empty())
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    /// Max intensity of a cell, `None` when empty.
    pub fn max_intensity(&self, cell: usize) -> Option<f32> {
        let m = self.max_intensity[cell];
        (!m.is_nan()).then_some(m)
    }

    pub fn point_ids(&self, cell: usize) -> &[u32] {
        &self.point_ids[self.cell_start[cell] as usize..self.cell_start[cell + 1] as usize]
    }

    pub fn count(&self, cell: usize) -> usize {
        (self.cell_start[cell + 1] - self.cell_start[cell]) as usize
    }

    pub fn is_occupied(&self, cell: usize) -> bool {
        self.count(cell) > 0
    }

    /// Total number of binned points.
    pub fn point_count(&self) -> usize {
        self.point_ids.len()
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.geometry.cell_count()).filter(move |&c| self.is_occupied(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> RasterGeometry {
        RasterGeometry::centered(Vec2::zeros(), 0.1, 6.0).unwrap()
    }

    #[test]
    fn single_point() {
        let r = LiBEVRaster::from_points(geom(), [(Vec2::zeros(), 120.0)]);
        let cells: Vec<usize> = r.occupied_cells().collect();
        assert_eq!(cells.len(), 1);
        assert_eq!(r.point_ids(cells[0]), &[0]);
        assert_eq!(r.max_intensity(cells[0]), Some(120.0));
    }

    #[test]
    fn max_of_shared_cell() {
        let r = LiBEVRaster::from_points(geom(), [(Vec2::new(0.01, 0.01), 50.0), (Vec2::new(0.02, 0.03), 200.0)]);
        let cells: Vec<usize> = r.occupied_cells().collect();
        assert_eq!(cells.len(), 1);
        assert_eq!(r.max_intensity(cells[0]), Some(200.0));
        assert_eq!(r.count(cells[0]), 2);
    }

    #[test]
    fn regular_grid_fills_one_per_cell() {
        let g = geom();
        let pts: Vec<(Vec2, f32)> = (0..30)
            .flat_map(|i| (0..30).map(move |j| (i, j)))
            .map(|(i, j)| {
                let c = g.cell_center(g.index(i + 10, j + 5));
                (c, 100.0)
            })
            .collect();
        let r = LiBEVRaster::from_points(g, pts.iter().copied());
        assert_eq!(r.point_count(), 900);
        // Direct binning oracle.
        let mut counts = vec![0usize; g.cell_count()];
        for (p, _) in &pts {
            let ix = ((p.x - g.origin[0]) / g.resolution).floor() as usize;
            let iy = ((p.y - g.origin[1]) / g.resolution).floor() as usize;
            counts[iy * g.width + ix] += 1;
        }
        for c in 0..g.cell_count() {
            assert_eq!(r.count(c), counts[c]);
            assert!(counts[c] <= 1);
        }
    }

    #[test]
    fn out_of_bounds_dropped_and_empty() {
        let r = LiBEVRaster::from_points(geom(), [(Vec2::new(100.0, 0.0), 10.0)]);
        assert_eq!(r.point_count(), 0);
        assert_eq!(r.occupied_cells().count(), 0);
        assert!(RasterGeometry::centered(Vec2::zeros(), 0.0, 6.0).is_err());
    }
}
