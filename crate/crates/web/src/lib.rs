//! Browser bindings: threshold filter trace, a toy registration scene and a
//! LiBEV image of a simulated intersection.

pub mod demo;

use wasm_bindgen::prelude::*;

/// Kalman threshold trace as JSON `{measurement, rho}`.
#[wasm_bindgen]
pub fn threshold_trace(seed: u64, frames: u32, q: f64, r: f64, marking_fraction: f64) -> Result<String, JsError> {
    demo::threshold_trace(seed, frames, q, r, marking_fraction).map_err(|e| JsError::new(&e))
}

/// Registration result as JSON.
#[wasm_bindgen]
pub fn registration_demo(solver: &str, epsilon_lines: f64, dx: f64, dy: f64, dyaw_deg: f64, seed: u64) -> Result<String, JsError> {
    demo::registration(solver, epsilon_lines, dx, dy, dyaw_deg, seed).map_err(|e| JsError::new(&e))
}

/// RGBA image of the LiBEV raster.
#[wasm_bindgen]
pub struct LibevImage {
    width: u32,
    height: u32,
    rgba: Vec<u8>,
    instances: u32,
}

#[wasm_bindgen]
impl LibevImage {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn instances(&self) -> u32 {
        self.instances
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

#[wasm_bindgen]
pub fn libev_image(frames: u32, seed: u64, wet_road: bool) -> Result<LibevImage, JsError> {
    let (width, height, rgba, instances) = demo::libev_rgba(frames, seed, wet_road).map_err(|e| JsError::new(&e))?;
    Ok(LibevImage {
        width,
        height,
        rgba,
        instances,
    })
}
