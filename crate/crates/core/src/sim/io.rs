//! Scenario directory layout.
//!
//! ```text
//! <dir>/scenario.toml        resolved scenario spec
//! <dir>/map.json             HD map
//! <dir>/trajectory.csv       t,x,y,yaw ground truth (s, m, m, rad)
//! <dir>/odometry.csv         t,x,y,yaw drifting odometry
//! <dir>/scans/frame_NNNNN.scan   text header + little-endian f32 (x, y, z, intensity) records
//! <dir>/scans/frame_NNNNN.truth  text header + little-endian i32 element id per point (-1 = none)
//! ```
//!
//! Scan header:
//!
//! ```text
//! ROADSCAN 1
//! count <n>
//! frame <k>
//! fields x y z intensity f32le
//! end_header
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{FrameSource, RenderedScan, Scenario, SimError};
use crate::hdmap::HDMap;
use crate::io_util::write_atomic;
use crate::types::{LidarPoint, Pose2};

pub const SCAN_MAGIC: &str = "ROADSCAN 1";
const TRUTH_MAGIC: &str = "ROADTRUTH 1";

pub(crate) fn poses_csv(poses: &[Pose2], rate_hz: f64) -> String {
    let mut s = String::from("t,x,y,yaw\n");
    for (k, p) in poses.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", k as f64 / rate_hz, p.x, p.y, p.yaw);
    }
    s
}

fn parse_poses(text: &str, path: &Path) -> Result<Vec<Pose2>, SimError> {
    let bad = |m: String| SimError::Format {
        path: path.display().to_string(),
        message: m,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,x,y,yaw") {
        return Err(bad("expected header `t,x,y,yaw`".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            if v.len() != 4 {
                return Err(bad(format!("row {}: expected 4 fields", i + 1)));
            }
            // Stored yaw is already wrapped; keep it bit-exact.
            Ok(Pose2 {
                x: v[1],
                y: v[2],
                yaw: v[3],
            })
        })
        .collect()
}

fn header(magic: &str, count: usize, frame: usize, fields: &str) -> String {
    format!("{magic}\ncount {count}\nframe {frame}\nfields {fields}\nend_header\n")
}

pub fn write_scan(path: &Path, frame: usize, points: &[LidarPoint]) -> std::io::Result<()> {
    let mut bytes = header(SCAN_MAGIC, points.len(), frame, "x y z intensity f32le").into_bytes();
    bytes.reserve(points.len() * 16);
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(path, &bytes)
}

fn write_truth(path: &Path, frame: usize, truth: &[i32]) -> std::io::Result<()> {
    let mut bytes = header(TRUTH_MAGIC, truth.len(), frame, "element_id i32le").into_bytes();
    for v in truth {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Splits a header-prefixed binary file into (count, frame, payload).
fn split_header<'a>(bytes: &'a [u8], magic: &str, path: &Path) -> Result<(usize, usize, &'a [u8]), SimError> {
    let bad = |m: &str| SimError::Format {
        path: path.display().to_string(),
        message: m.to_string(),
    };
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| bad("missing end_header"))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next() != Some(magic) {
        return Err(bad("bad magic line"));
    }
    let (mut count, mut frame) = (None, None);
    for l in lines {
        let mut it = l.split_whitespace();
        match (it.next(), it.next()) {
            (Some("count"), Some(v)) => count = v.parse().ok(),
            (Some("frame"), Some(v)) => frame = v.parse().ok(),
            _ => {}
        }
    }
    let count = count.ok_or_else(|| bad("missing count"))?;
    let frame = frame.ok_or_else(|| bad("missing frame"))?;
    Ok((count, frame, &bytes[end + marker.len()..]))
}

pub fn read_scan(path: &Path) -> Result<Vec<LidarPoint>, SimError> {
    let bytes = std::fs::read(path)?;
    let (count, frame, payload) = split_header(&bytes, SCAN_MAGIC, path)?;
    if payload.len() != count * 16 {
        return Err(SimError::Format {
            path: path.display().to_string(),
            message: format!("expected {} payload bytes, found {}", count * 16, payload.len()),
        });
    }
    Ok(payload
        .chunks_exact(16)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]);
            LidarPoint::new(f(0), f(4), f(8), f(12), frame as u32)
        })
        .collect())
}

pub fn read_truth(path: &Path) -> Result<Vec<i32>, SimError> {
    let bytes = std::fs::read(path)?;
    let (count, _, payload) = split_header(&bytes, TRUTH_MAGIC, path)?;
    if payload.len() != count * 4 {
        return Err(SimError::Format {
            path: path.display().to_string(),
            message: "truncated truth payload".into(),
        });
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn scan_paths(dir: &Path, k: usize) -> (PathBuf, PathBuf) {
    let scans = dir.join("scans");
    (scans.join(format!("frame_{k:05}.scan")), scans.join(format!("frame_{k:05}.truth")))
}

/// Writes the full scenario directory. Frames render in parallel when enabled.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<(), SimError> {
    std::fs::create_dir_all(dir.join("scans"))?;
    write_atomic(&dir.join("scenario.toml"), scenario.spec.to_toml_string().as_bytes())?;
    crate::hdmap::save_map(&scenario.map, dir.join("map.json"))?;
    let rate = scenario.spec.rate_hz;
    write_atomic(&dir.join("trajectory.csv"), poses_csv(&scenario.trajectory, rate).as_bytes())?;
    write_atomic(&dir.join("odometry.csv"), poses_csv(&scenario.odometry, rate).as_bytes())?;
    let write_frame = |k: usize| -> Result<(), SimError> {
        let scan = scenario.render_scan(k)?;
        let (sp, tp) = scan_paths(dir, k);
        write_scan(&sp, k, &scan.points)?;
        write_truth(&tp, k, &scan.truth)?;
        Ok(())
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..scenario.trajectory.len()).into_par_iter().try_for_each(write_frame)?;
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..scenario.trajectory.len()).try_for_each(write_frame)?;
    }
    Ok(())
}

/// A scenario read back from disk; scans load on demand.
#[derive(Debug, Clone)]
pub struct DirectorySequence {
    pub dir: PathBuf,
    map: HDMap,
    truth: Vec<Pose2>,
    odometry: Vec<Pose2>,
}

impl DirectorySequence {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, SimError> {
        let dir = dir.as_ref().to_path_buf();
        let map = crate::hdmap::load_map(dir.join("map.json"))?;
        let tp = dir.join("trajectory.csv");
        let truth = parse_poses(&std::fs::read_to_string(&tp)?, &tp)?;
        let op = dir.join("odometry.csv");
        let odometry = parse_poses(&std::fs::read_to_string(&op)?, &op)?;
        if truth.len() != odometry.len() || truth.is_empty() {
            return Err(SimError::Format {
                path: op.display().to_string(),
                message: "trajectory and odometry lengths differ or are empty".into(),
            });
        }
        Ok(Self {
            dir,
            map,
            truth,
            odometry,
        })
    }
}

impl FrameSource for DirectorySequence {
    fn map(&self) -> &HDMap {
        &self.map
    }

    fn truth(&self) -> &[Pose2] {
        &self.truth
    }

    fn odometry(&self) -> &[Pose2] {
        &self.odometry
    }

    fn frame(&self, k: usize) -> Result<RenderedScan, SimError> {
        if k >= self.truth.len() {
            return Err(SimError::FrameOutOfRange(k));
        }
        let (sp, tp) = scan_paths(&self.dir, k);
        let points = read_scan(&sp)?;
        let truth = if tp.exists() {
            read_truth(&tp)?
        } else {
            vec![-1; points.len()]
        };
        if truth.len() != points.len() {
            return Err(SimError::Format {
                path: tp.display().to_string(),
                message: "truth length differs from scan".into(),
            });
        }
        Ok(RenderedScan { points, truth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_scenario, ScenarioSpec, Template};

    #[test]
    fn directory_round_trip_matches_memory() {
        let spec = ScenarioSpec {
            frames: 3,
            ..ScenarioSpec::new(Template::StraightRoad)
        };
        let s = build_scenario(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scenario(dir.path(), &s).unwrap();
        let d = DirectorySequence::open(dir.path()).unwrap();
        assert_eq!(d.truth(), s.truth());
        assert_eq!(d.odometry(), s.odometry());
        assert_eq!(d.frame(1).unwrap(), s.frame(1).unwrap());
        assert_eq!(d.fingerprint(), s.fingerprint());
        assert!(d.frame(3).is_err());
    }

    #[test]
    fn truncated_scan_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.scan");
        write_scan(&p, 0, &[LidarPoint::new(1.0, 2.0, 0.0, 10.0, 0)]).unwrap();
        let mut b = std::fs::read(&p).unwrap();
        b.pop();
        std::fs::write(&p, b).unwrap();
        assert!(matches!(read_scan(&p), Err(SimError::Format { .. })));
    }
}
