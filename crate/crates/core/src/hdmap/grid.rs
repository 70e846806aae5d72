//! Uniform-grid index for exact nearest-neighbour queries on static 2D points.

use crate::types::Vec2;

const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone, Copy)]
struct Item {
    p: Vec2,
    /// Caller-supplied index, also the tie-breaker between equidistant points.
    key: u32,
}

/// Result of a nearest-neighbour query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub key: u32,
    pub dist2: f64,
}

#[derive(Debug, Clone)]
pub struct GridIndex2 {
    origin: Vec2,
    cell: f64,
    nx: i64,
    ny: i64,
    /// CSR offsets, `nx * ny + 1` entries.
    start: Vec<u32>,
    items: Vec<Item>,
}

impl GridIndex2 {
    /// `cell` is a hint; it grows when the bounding box would need too many cells.
    pub fn build(points: impl IntoIterator<Item = (Vec2, u32)>, cell: f64) -> Self {
        let pts: Vec<Item> = points.into_iter().map(|(p, key)| Item { p, key }).collect();
        let mut cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        if pts.is_empty() {
            return Self {
                origin: Vec2::zeros(),
                cell,
                nx: 0,
                ny: 0,
                start: vec![0],
                items: pts,
            };
        }
        let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
        for it in &pts {
            lo = lo.inf(&it.p);
            hi = hi.sup(&it.p);
        }
        let dims = |cell: f64| {
            (
                ((hi.x - lo.x) / cell).floor() as i64 + 1,
                ((hi.y - lo.y) / cell).floor() as i64 + 1,
            )
        };
        let (mut nx, mut ny) = dims(cell);
        while (nx as usize).saturating_mul(ny as usize) > MAX_CELLS {
            cell *= 2.0;
            (nx, ny) = dims(cell);
        }
        let mut grid = Self {
            origin: lo,
            cell,
            nx,
            ny,
            start: vec![0; (nx * ny) as usize + 1],
            items: Vec::new(),
        };
        let cells: Vec<usize> = pts
            .iter()
            .map(|it| {
                let (cx, cy) = grid.cell_of(&it.p);
                (cy.clamp(0, ny - 1) * nx + cx.clamp(0, nx - 1)) as usize
            })
            .collect();
        for &c in &cells {
            grid.start[c + 1] += 1;
        }
        for i in 0..grid.start.len() - 1 {
            grid.start[i + 1] += grid.start[i];
        }
        let mut fill = grid.start.clone();
        let mut items = vec![Item { p: Vec2::zeros(), key: 0 }; pts.len()];
        for (it, &c) in pts.iter().zip(&cells) {
            items[fill[c] as usize] = *it;
            fill[c] += 1;
        }
        grid.items = items;
        grid
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn point(&self, key: u32) -> Option<Vec2> {
        self.items.iter().find(|it| it.key == key).map(|it| it.p)
    }

    fn cell_of(&self, p: &Vec2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.cell).floor() as i64,
            ((p.y - self.origin.y) / self.cell).floor() as i64,
        )
    }

    fn scan_cell(&self, cx: i64, cy: i64, q: &Vec2, best: &mut Option<Nearest>, bound: &mut f64) {
        if cx < 0 || cy < 0 || cx >= self.nx || cy >= self.ny {
            return;
        }
        let c = (cy * self.nx + cx) as usize;
        for it in &self.items[self.start[c] as usize..self.start[c + 1] as usize] {
            let d2 = (it.p - q).norm_squared();
            let better = match best {
                None => d2 <= *bound,
                Some(b) => d2 < b.dist2 || (d2 == b.dist2 && it.key < b.key),
            };
            if better {
                *best = Some(Nearest { key: it.key, dist2: d2 });
                *bound = d2;
            }
        }
    }

    /// Nearest stored point with squared distance `<= max_dist2`; ties go to the lowest key.
    pub fn nearest_within(&self, q: &Vec2, max_dist2: f64) -> Option<Nearest> {
        if self.items.is_empty() || !(q.x.is_finite() && q.y.is_finite()) {
            return None;
        }
        let (cx, cy) = self.cell_of(q);
        // Distance from q to the nearest edge of its own cell.
        let fx = q.x - self.origin.x - cx as f64 * self.cell;
        let fy = q.y - self.origin.y - cy as f64 * self.cell;
        let edge = fx.min(self.cell - fx).min(fy).min(self.cell - fy).max(0.0);
        let mut best = None;
        let mut bound = max_dist2;
        let mut r: i64 = 0;
        loop {
            if r > 0 {
                let lb = (r - 1) as f64 * self.cell + edge;
                if lb * lb > bound {
                    break;
                }
            }
            if r == 0 {
                self.scan_cell(cx, cy, q, &mut best, &mut bound);
            } else {
                for x in cx - r..=cx + r {
                    self.scan_cell(x, cy - r, q, &mut best, &mut bound);
                    self.scan_cell(x, cy + r, q, &mut best, &mut bound);
                }
                for y in cy - r + 1..cy + r {
                    self.scan_cell(cx - r, y, q, &mut best, &mut bound);
                    self.scan_cell(cx + r, y, q, &mut best, &mut bound);
                }
            }
            if cx - r <= 0 && cy - r <= 0 && cx + r >= self.nx - 1 && cy + r >= self.ny - 1 {
                break;
            }
            r += 1;
        }
        best
    }

    pub fn nearest(&self, q: &Vec2) -> Option<Nearest> {
        self.nearest_within(q, f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[(Vec2, u32)], q: &Vec2, max2: f64) -> Option<Nearest> {
        let mut best: Option<Nearest> = None;
        for (p, k) in points {
            let d2 = (p - q).norm_squared();
            if d2 > max2 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => d2 < b.dist2 || (d2 == b.dist2 && *k < b.key),
            };
            if better {
                best = Some(Nearest { key: *k, dist2: d2 });
            }
        }
        best
    }

    #[test]
    fn empty_index() {
        let g = GridIndex2::build(std::iter::empty(), 0.5);
        assert!(g.nearest(&Vec2::zeros()).is_none());
    }

    #[test]
    fn ties_break_on_key() {
        let pts = vec![(Vec2::new(1.0, 0.0), 5), (Vec2::new(-1.0, 0.0), 2), (Vec2::new(0.0, 1.0), 9)];
        let g = GridIndex2::build(pts, 0.3);
        assert_eq!(g.nearest(&Vec2::zeros()).unwrap().key, 2);
    }

    #[test]
    fn far_query_outside_bounds() {
        let pts = vec![(Vec2::new(0.0, 0.0), 0), (Vec2::new(3.0, 0.0), 1)];
        let g = GridIndex2::build(pts, 0.5);
        assert_eq!(g.nearest(&Vec2::new(100.0, -40.0)).unwrap().key, 1);
        assert!(g.nearest_within(&Vec2::new(100.0, -40.0), 4.0).is_none());
    }

    #[test]
    fn huge_extent_coarsens_cells() {
        let pts = vec![(Vec2::new(-1e5, 0.0), 0), (Vec2::new(1e5, 1e5), 1)];
        let g = GridIndex2::build(pts, 0.1);
        assert!(g.cell > 0.1);
        assert_eq!(g.nearest(&Vec2::new(9e4, 9e4)).unwrap().key, 1);
    }

    proptest! {
        #[test]
        fn matches_linear_scan(raw in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 1..300),
                               queries in prop::collection::vec((-25.0..25.0f64, -25.0..25.0f64), 1..30),
                               max_d in 0.1..10.0f64,
                               cell in 0.05..3.0f64) {
            // Quantize so exact ties occur.
            let pts: Vec<(Vec2, u32)> = raw.iter().enumerate()
                .map(|(i, (x, y))| (Vec2::new((x * 2.0).round() / 2.0, (y * 2.0).round() / 2.0), i as u32))
                .collect();
            let g = GridIndex2::build(pts.clone(), cell);
            for (x, y) in queries {
                let q = Vec2::new(x, y);
                prop_assert_eq!(g.nearest(&q), brute(&pts, &q, f64::INFINITY));
                prop_assert_eq!(g.nearest_within(&q, max_d * max_d), brute(&pts, &q, max_d * max_d));
            }
        }
    }
}
