//! Road layouts as convex-polygon marking shapes.

use super::spec::{LayoutSpec, Template};
use crate::types::{MarkingLabel, Vec2};

/// A painted element as a union of convex polygons (counter-clockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementShape {
    pub id: u32,
    pub label: MarkingLabel,
    pub polygons: Vec<Vec<Vec2>>,
}

pub fn convex_contains(poly: &[Vec2], p: &Vec2) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let e = b - a;
        let d = p - a;
        e.x * d.y - e.y * d.x >= 0.0
    })
}

/// Rectangle from `start` extending `length` along unit `dir`, centered across it.
pub fn rect(start: Vec2, dir: Vec2, length: f64, width: f64) -> Vec<Vec2> {
    let n = Vec2::new(-dir.y, dir.x) * (0.5 * width);
    let end = start + dir * length;
    vec![start - n, end - n, end + n, start + n]
}

fn segment(a: Vec2, b: Vec2, width: f64) -> Vec<Vec2> {
    let d = b - a;
    let len = d.norm();
    rect(a, d / len, len, width)
}

fn triangle(a: Vec2, b: Vec2, c: Vec2) -> Vec<Vec2> {
    let e = b - a;
    let f = c - a;
    if e.x * f.y - e.y * f.x >= 0.0 {
        vec![a, b, c]
    } else {
        vec![a, c, b]
    }
}

const LINE_W: f64 = 0.15;
const CURB_W: f64 = 0.3;

/// Straight arrow: shaft from `base` along `dir`, head at the far end.
pub fn arrow(base: Vec2, dir: Vec2) -> Vec<Vec<Vec2>> {
    let n = Vec2::new(-dir.y, dir.x);
    let shaft = 3.5;
    let head_base = base + dir * shaft;
    vec![
        rect(base, dir, shaft + 0.05, LINE_W),
        triangle(head_base + n * 0.45, head_base - n * 0.45, head_base + dir * 1.5),
    ]
}

/// Rhombus outline of the given length and width.
pub fn diamond(center: Vec2, dir: Vec2, length: f64, width: f64) -> Vec<Vec<Vec2>> {
    let n = Vec2::new(-dir.y, dir.x);
    let tips = [
        center - dir * (0.5 * length),
        center + n * (0.5 * width),
        center + dir * (0.5 * length),
        center - n * (0.5 * width),
    ];
    (0..4).map(|i| segment(tips[i], tips[(i + 1) % 4], LINE_W)).collect()
}

/// Filled isosceles triangle with its tip at `tip`, opening along `dir`.
pub fn triangle_sign(tip: Vec2, dir: Vec2) -> Vec<Vec<Vec2>> {
    let n = Vec2::new(-dir.y, dir.x);
    let base = tip + dir * 2.5;
    vec![triangle(tip, base - n * 0.6, base + n * 0.6)]
}

/// A single connected glyph: a spine along `dir` with three cross strokes.
pub fn text_glyph(start: Vec2, dir: Vec2) -> Vec<Vec<Vec2>> {
    let n = Vec2::new(-dir.y, dir.x);
    let len = 2.5;
    let stroke = 0.2;
    let mut polys = vec![rect(start - n * 0.5, dir, len, stroke)];
    for t in [0.0, 0.5 * (len - stroke), len - stroke] {
        let a = start + dir * (t + 0.5 * stroke) - n * 0.6;
        polys.push(rect(a, n, 1.2, stroke));
    }
    polys
}

struct Builder {
    shapes: Vec<ElementShape>,
}

impl Builder {
    fn push(&mut self, label: MarkingLabel, polygons: Vec<Vec<Vec2>>) {
        let id = self.shapes.len() as u32;
        self.shapes.push(ElementShape { id, label, polygons });
    }

    /// Straight line from a to b (along +dir), cut around open intervals of `skip` (along-axis).
    fn line(&mut self, label: MarkingLabel, a: f64, b: f64, offset: f64, along_x: bool, skip: &[(f64, f64)]) {
        let width = if label == MarkingLabel::Curb { CURB_W } else { LINE_W };
        let mut cuts: Vec<(f64, f64)> = vec![(a, b)];
        for &(s0, s1) in skip {
            cuts = cuts
                .into_iter()
                .flat_map(|(lo, hi)| {
                    let mut v = Vec::new();
                    if s0 > lo {
                        v.push((lo, hi.min(s0)));
                    }
                    if s1 < hi {
                        v.push((lo.max(s1), hi));
                    }
                    v
                })
                .filter(|(lo, hi)| hi - lo > 0.5)
                .collect();
        }
        for (lo, hi) in cuts {
            let (start, dir) = if along_x {
                (Vec2::new(lo, offset), Vec2::new(1.0, 0.0))
            } else {
                (Vec2::new(offset, lo), Vec2::new(0.0, 1.0))
            };
            self.push(label, vec![rect(start, dir, hi - lo, width)]);
        }
    }

    /// Dashes of `on` meters every `period`, skipping intervals.
    fn dashed(&mut self, a: f64, b: f64, offset: f64, along_x: bool, skip: &[(f64, f64)]) {
        let (on, period) = (3.0, 9.0);
        let mut s = a;
        while s + on <= b {
            let inside = skip.iter().any(|&(s0, s1)| s + on > s0 && s < s1);
            if !inside {
                let (start, dir) = if along_x {
                    (Vec2::new(s, offset), Vec2::new(1.0, 0.0))
                } else {
                    (Vec2::new(offset, s), Vec2::new(0.0, 1.0))
                };
                self.push(MarkingLabel::DashedLane, vec![rect(start, dir, on, LINE_W)]);
            }
            s += period;
        }
    }
}

const ROAD_HALF_LEN: f64 = 160.0;

fn straight(l: &LayoutSpec, gap: Option<(f64, f64)>) -> Vec<ElementShape> {
    let w = l.lane_width_m;
    let skip: Vec<(f64, f64)> = gap.into_iter().collect();
    let mut b = Builder { shapes: Vec::new() };
    let (a, e) = (-ROAD_HALF_LEN, ROAD_HALF_LEN);
    b.line(MarkingLabel::SolidLane, a, e, -w, true, &skip);
    b.line(MarkingLabel::SolidLane, a, e, w, true, &skip);
    b.dashed(a, e, 0.0, true, &skip);
    b.line(MarkingLabel::Curb, a, e, -w - 0.6, true, &skip);
    b.line(MarkingLabel::Curb, a, e, w + 0.6, true, &skip);
    let lane = -0.5 * w;
    let ex = Vec2::new(1.0, 0.0);
    let mut extras: Vec<(f64, MarkingLabel)> = vec![
        (-60.0, MarkingLabel::Arrow),
        (-5.0, MarkingLabel::TriangleSign),
        (25.0, MarkingLabel::Text),
        (70.0, MarkingLabel::DiamondSign),
    ];
    if let Some((g0, g1)) = gap {
        extras.retain(|(x, _)| *x + 7.0 < g0 || *x - 7.0 > g1);
    }
    for (x, label) in extras {
        let p = Vec2::new(x, lane);
        let polys = match label {
            MarkingLabel::Arrow => arrow(p, ex),
            MarkingLabel::TriangleSign => triangle_sign(p, ex),
            MarkingLabel::Text => text_glyph(p, ex),
            _ => diamond(p, ex, 6.0, 1.5),
        };
        b.push(label, polys);
    }
    b.shapes
}

fn intersection(l: &LayoutSpec) -> Vec<ElementShape> {
    let w = l.lane_width_m;
    let mut b = Builder { shapes: Vec::new() };
    let (a, e) = (-ROAD_HALF_LEN, ROAD_HALF_LEN);
    // Lane lines stop `open` meters from the center; stop lines sit 0.3 m
    // inside that, crosswalk stripes 0.6 m further in.
    let open = 2.0 * w + 9.5;
    let skip = [(-open, open)];
    for along_x in [true, false] {
        b.line(MarkingLabel::SolidLane, a, e, -2.0 * w, along_x, &skip);
        b.line(MarkingLabel::SolidLane, a, e, 0.0, along_x, &skip);
        b.line(MarkingLabel::SolidLane, a, e, 2.0 * w, along_x, &skip);
        b.dashed(a, e, -w, along_x, &skip);
        b.dashed(a, e, w, along_x, &skip);
        b.line(MarkingLabel::Curb, a, e, -2.0 * w - 0.6, along_x, &skip);
        b.line(MarkingLabel::Curb, a, e, 2.0 * w + 0.6, along_x, &skip);
    }
    let stop = open - 0.5;
    let half = 2.0 * w - 0.2;
    let ey = Vec2::new(0.0, 1.0);
    let ex = Vec2::new(1.0, 0.0);
    b.push(MarkingLabel::StopLine, vec![rect(Vec2::new(-stop, -half), ey, half - 0.2, 0.4)]);
    b.push(MarkingLabel::StopLine, vec![rect(Vec2::new(stop, 0.2), ey, half - 0.2, 0.4)]);
    b.push(MarkingLabel::StopLine, vec![rect(Vec2::new(0.2, -stop), ex, half - 0.2, 0.4)]);
    b.push(MarkingLabel::StopLine, vec![rect(Vec2::new(-half, stop), ex, half - 0.2, 0.4)]);
    // Crosswalks: one element per stripe, stripes parallel to the road.
    let outer = open - 1.3;
    for start in [-outer, outer - 3.0] {
        let mut c = -half + 0.25;
        while c <= half - 0.2 {
            b.push(MarkingLabel::Crosswalk, vec![rect(Vec2::new(start, c), ex, 3.0, 0.45)]);
            b.push(MarkingLabel::Crosswalk, vec![rect(Vec2::new(c, start), ey, 3.0, 0.45)]);
            c += 1.0;
        }
    }
    for x in [-30.0, -50.0] {
        for lane in [-0.5 * w, -1.5 * w] {
            b.push(MarkingLabel::Arrow, arrow(Vec2::new(x - 5.0, lane), ex));
            b.push(MarkingLabel::Arrow, arrow(Vec2::new(-x + 5.0, -lane), -ex));
        }
    }
    b.push(MarkingLabel::DiamondSign, diamond(Vec2::new(-80.0, -0.5 * w), ex, 6.0, 1.5));
    b.push(MarkingLabel::DiamondSign, diamond(Vec2::new(80.0, 0.5 * w), ex, 6.0, 1.5));
    b.shapes
}

fn ring_loop(l: &LayoutSpec) -> Vec<ElementShape> {
    let w = l.lane_width_m;
    let r0 = l.loop_radius_m;
    let mut b = Builder { shapes: Vec::new() };
    let arc = |r: f64, t0: f64, t1: f64, width: f64| -> Vec<Vec2> {
        let p0 = Vec2::new(t0.cos(), t0.sin());
        let p1 = Vec2::new(t1.cos(), t1.sin());
        let (ri, ro) = (r - 0.5 * width, r + 0.5 * width);
        vec![p0 * ri, p1 * ri, p1 * ro, p0 * ro]
    };
    for (r, label, width) in [
        (r0 - w, MarkingLabel::SolidLane, LINE_W),
        (r0 + w, MarkingLabel::SolidLane, LINE_W),
        (r0 + w + 0.6, MarkingLabel::Curb, CURB_W),
        (r0 - w - 0.6, MarkingLabel::Curb, CURB_W),
    ] {
        let n = ((2.0 * std::f64::consts::PI * r) / 3.0).round() as usize;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        for i in 0..n {
            b.push(label, vec![arc(r, i as f64 * step, (i + 1) as f64 * step, width)]);
        }
    }
    let n = ((2.0 * std::f64::consts::PI * r0) / 9.0).floor() as usize;
    let step = 2.0 * std::f64::consts::PI / n as f64;
    for i in 0..n {
        let t0 = i as f64 * step;
        b.push(MarkingLabel::DashedLane, vec![arc(r0, t0, t0 + 3.0 / r0, LINE_W)]);
    }
    for (k, t) in [0.7f64, 2.3, 3.9, 5.5].iter().enumerate() {
        let c = Vec2::new(t.cos(), t.sin()) * (r0 - 0.5 * w);
        let dir = Vec2::new(-t.sin(), t.cos());
        let polys = match k {
            0 => arrow(c, dir),
            1 => text_glyph(c, dir),
            2 => triangle_sign(c, dir),
            _ => diamond(c + dir * 3.0, dir, 6.0, 1.5),
        };
        let label = [MarkingLabel::Arrow, MarkingLabel::Text, MarkingLabel::TriangleSign, MarkingLabel::DiamondSign][k];
        b.push(label, polys);
    }
    b.shapes
}

pub fn build_shapes(template: Template, layout: &LayoutSpec) -> Vec<ElementShape> {
    match template {
        Template::StraightRoad => straight(layout, None),
        Template::MarkingFreeGap => straight(layout, Some((layout.gap_start_m, layout.gap_end_m))),
        Template::Intersection => intersection(layout),
        Template::Loop => ring_loop(layout),
    }
}

/// Ground-truth path as (position, heading) at arc length `s`.
pub fn path_pose(template: Template, layout: &LayoutSpec, s: f64) -> (Vec2, f64) {
    let a = layout.wobble_amplitude_m;
    let k = 2.0 * std::f64::consts::PI / layout.wobble_period_m;
    match template {
        Template::Loop => {
            let r = layout.loop_radius_m - 0.5 * layout.lane_width_m + a * (k * s).sin();
            let t = s / (layout.loop_radius_m - 0.5 * layout.lane_width_m);
            let dr = a * k * (k * s).cos();
            // Tangent of the polar curve r(t) with dt/ds fixed.
            let heading = t + std::f64::consts::FRAC_PI_2 - (dr * (layout.loop_radius_m - 0.5 * layout.lane_width_m) / r).atan();
            (Vec2::new(r * t.cos(), r * t.sin()), heading)
        }
        _ => {
            let x = layout.start_m + s;
            let y = -0.5 * layout.lane_width_m + a * (k * s).sin();
            let heading = (a * k * (k * s).cos()).atan();
            (Vec2::new(x, y), heading)
        }
    }
}
