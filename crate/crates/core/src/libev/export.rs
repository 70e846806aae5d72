//! PNG rendering and structured-text sidecars for rasters and instance masks.
//!
//! Image rows run north to south: image row `r` is grid row `height - 1 - r`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::palette::TURBO;
use super::{LiBEVRaster, MarkingInstance, RasterGeometry};
use crate::types::MarkingLabel;

/// Palette index of an intensity (0 for empty cells is rendered black).
pub fn palette_index(intensity: f32) -> usize {
    intensity.round().clamp(0.0, 255.0) as usize
}

/// RGB8 pixels, image order.
pub fn render_rgb(raster: &LiBEVRaster) -> Vec<u8> {
    let (w, h) = (raster.width(), raster.height());
    let mut rgb = vec![0u8; w * h * 3];
    for row in 0..h {
        let iy = h - 1 - row;
        for ix in 0..w {
            if let Some(m) = raster.max_intensity(raster.geometry.index(ix, iy)) {
                let o = (row * w + ix) * 3;
                rgb[o..o + 3].copy_from_slice(&TURBO[palette_index(m)]);
            }
        }
    }
    rgb
}

pub fn encode_png(raster: &LiBEVRaster) -> Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, raster.width() as u32, raster.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(&render_rgb(raster))?;
    }
    Ok(out)
}

pub fn write_png(raster: &LiBEVRaster, path: &Path) -> std::io::Result<()> {
    let bytes = encode_png(raster).map_err(std::io::Error::other)?;
    crate::io_util::write_atomic(path, &bytes)
}

/// Non-empty cells as `[row, col, point_count]` in image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelIndex {
    pub geometry: RasterGeometry,
    pub cells: Vec<[usize; 3]>,
}

pub fn pixel_index(raster: &LiBEVRaster) -> PixelIndex {
    let h = raster.height();
    let mut cells: Vec<[usize; 3]> = raster
        .occupied_cells()
        .map(|c| {
            let (ix, iy) = raster.geometry.coords(c);
            [h - 1 - iy, ix, raster.count(c)]
        })
        .collect();
    cells.sort_unstable();
    PixelIndex {
        geometry: raster.geometry,
        cells,
    }
}

/// Mask as runs `[row, start_col, length]` in image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRle {
    pub instance_id: u32,
    pub label: MarkingLabel,
    pub point_count: usize,
    pub runs: Vec<[usize; 3]>,
}

pub fn instance_rle(geometry: &RasterGeometry, inst: &MarkingInstance) -> InstanceRle {
    let mut px: Vec<(usize, usize)> = inst
        .pixels
        .iter()
        .map(|&c| {
            let (ix, iy) = geometry.coords(c as usize);
            (geometry.height - 1 - iy, ix)
        })
        .collect();
    px.sort_unstable();
    let mut runs: Vec<[usize; 3]> = Vec::new();
    for (row, col) in px {
        match runs.last_mut() {
            Some(r) if r[0] == row && r[1] + r[2] == col => r[2] += 1,
            _ => runs.push([row, col, 1]),
        }
    }
    InstanceRle {
        instance_id: inst.instance_id,
        label: inst.label,
        point_count: inst.point_ids.len(),
        runs,
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    crate::io_util::write_atomic(path, text.as_bytes())
}

pub fn write_pixel_index(raster: &LiBEVRaster, path: &Path) -> std::io::Result<()> {
    write_json(&pixel_index(raster), path)
}

#[derive(Serialize)]
struct InstanceFile<'a> {
    geometry: &'a RasterGeometry,
    instances: Vec<InstanceRle>,
}

pub fn write_instances(geometry: &RasterGeometry, instances: &[MarkingInstance], path: &Path) -> std::io::Result<()> {
    let file = InstanceFile {
        geometry,
        instances: instances.iter().map(|i| instance_rle(geometry, i)).collect(),
    };
    write_json(&file, path)
}

/// Writes `libev.png`, `pixels.json` and `instances.json` into `dir`.
pub fn write_raster_bundle(raster: &LiBEVRaster, instances: &[MarkingInstance], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_png(raster, &dir.join("libev.png"))?;
    write_pixel_index(raster, &dir.join("pixels.json"))?;
    write_instances(&raster.geometry, instances, &dir.join("instances.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vec2;

    #[test]
    fn palette_index_is_monotone() {
        let mut last = 0;
        for i in 0..=2550 {
            let idx = palette_index(i as f32 * 0.1);
            assert!(idx >= last);
            last = idx;
        }
        assert_eq!(palette_index(-3.0), 0);
        assert_eq!(palette_index(300.0), 255);
        assert_eq!(TURBO[palette_index(100.2)], TURBO[palette_index(100.4)]);
    }

    #[test]
    fn png_and_rle() {
        let g = RasterGeometry::centered(Vec2::zeros(), 0.1, 2.0).unwrap();
        let pts: Vec<(Vec2, f32)> = (0..5).map(|i| (Vec2::new(-0.45 + 0.1 * i as f64, 0.05), 200.0)).collect();
        let r = LiBEVRaster::from_points(g, pts);
        let png = encode_png(&r).unwrap();
        assert_eq!(&png[1..4], b"PNG");
        let idx = pixel_index(&r);
        assert_eq!(idx.cells.len(), 5);
        let inst = MarkingInstance::from_mask(0, MarkingLabel::StopLine, r.occupied_cells().map(|c| c as u32).collect(), &r);
        let rle = instance_rle(&g, &inst);
        assert_eq!(rle.runs.len(), 1);
        assert_eq!(rle.runs[0][2], 5);
        assert_eq!(rle.point_count, 5);
    }
}
