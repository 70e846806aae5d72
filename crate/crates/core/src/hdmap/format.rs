//! JSON map file.
//!
//! ```text
//! {
//!   "version": 1,
//!   "units": "m",
//!   "elements": [
//!     {"id": 0, "label": "solid_lane", "direction": [1.0, 0.0], "points": [[0.0, -3.5], ...]},
//!     ...
//!   ]
//! }
//! ```
//!
//! Coordinates are meters in a local east-north frame. `direction` is the
//! element's main axis; it is renormalized on load and must match the
//! principal axis of `points` within 1 degree for linear labels.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HDMap, MapElement, MapError};
use crate::types::{MarkingLabel, Vec2};

pub const MAP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    version: u32,
    #[serde(default = "default_units")]
    units: String,
    elements: Vec<ElementRecord>,
}

fn default_units() -> String {
    "m".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementRecord {
    id: u32,
    label: MarkingLabel,
    direction: [f64; 2],
    points: Vec<[f64; 2]>,
}

pub fn from_json_str(text: &str) -> Result<HDMap, MapError> {
    let file: MapFile = serde_json::from_str(text).map_err(|e| MapError::Parse(e.to_string()))?;
    if file.version != MAP_FORMAT_VERSION {
        return Err(MapError::Version(file.version));
    }
    if file.units != "m" {
        return Err(MapError::Parse(format!("unsupported units `{}`", file.units)));
    }
    let elements = file
        .elements
        .into_iter()
        .map(|r| MapElement {
            id: r.id,
            label: r.label,
            direction: Vec2::new(r.direction[0], r.direction[1]),
            points: r.points.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
        })
        .collect();
    HDMap::new(elements)
}

fn num(v: f64) -> String {
    // serde_json prints the shortest round-tripping representation.
    serde_json::to_string(&v).expect("finite map coordinate")
}

/// Deterministic text form: one element per line.
pub fn to_json_string(map: &HDMap) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{{\n  \"version\": {MAP_FORMAT_VERSION},\n  \"units\": \"m\",\n  \"elements\": [");
    let n = map.elements().len();
    for (i, e) in map.elements().iter().enumerate() {
        let _ = write!(
            s,
            "    {{\"id\": {}, \"label\": \"{}\", \"direction\": [{}, {}], \"points\": [",
            e.id,
            e.label,
            num(e.direction.x),
            num(e.direction.y)
        );
        for (j, p) in e.points.iter().enumerate() {
            if j > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "[{}, {}]", num(p.x), num(p.y));
        }
        s.push_str("]}");
        s.push_str(if i + 1 < n { ",\n" } else { "\n" });
    }
    s.push_str("  ]\n}\n");
    s
}

pub fn load_map(path: impl AsRef<Path>) -> Result<HDMap, MapError> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

pub fn save_map(map: &HDMap, path: impl AsRef<Path>) -> Result<(), MapError> {
    crate::io_util::write_atomic(path.as_ref(), to_json_string(map).as_bytes())?;
    Ok(())
}
