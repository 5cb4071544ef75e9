//! Planar geometry shared by every stage: points, segment queries and a
//! uniform bucket grid for exact nearest-neighbor lookups.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn distance_sq(self, other: Point) -> f64 {
        let d = self - other;
        d.dot(d)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len_sq = ab.dot(ab);
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Distance from `p` to the infinite line through `a` and `b`.
pub fn point_line_distance(p: Point, a: Point, b: Point) -> f64 {
    match (b - a).normalized() {
        Some(dir) => dir.cross(p - a).abs(),
        None => p.distance(a),
    }
}

/// True when the open segments `[a, b]` and `[c, d]` cross at a single
/// interior point. Touching endpoints and collinear overlaps do not count.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Total length of an ordered vertex list (open).
pub fn path_length(vertices: &[Point]) -> f64 {
    vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Uniform bucket grid over a point set.
///
/// Queries are exact: rings of cells are scanned outward until no unvisited
/// cell can hold a closer point. Ties are broken toward the lower index.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    origin: Point,
    cell: f64,
    cols: usize,
    rows: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl SpatialGrid {
    /// Builds a grid sized for roughly `per_cell` points per bucket.
    pub fn new(points: &[Point], per_cell: f64) -> Self {
        let (mut min, mut max) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        if points.is_empty() {
            min = Point::default();
            max = Point::default();
        }
        let w = (max.x - min.x).max(1e-9);
        let h = (max.y - min.y).max(1e-9);
        let n = points.len().max(1) as f64;
        let mut cell = (w * h * per_cell / n).sqrt();
        if !(cell > 0.0) {
            cell = 1.0;
        }
        // Degenerate (collinear) sets would otherwise get a huge cell count.
        cell = cell.max(w.max(h) * per_cell.max(1.0) / n);
        let cols = ((w / cell).floor() as usize + 1).max(1);
        let rows = ((h / cell).floor() as usize + 1).max(1);

        let mut counts = vec![0u32; cols * rows + 1];
        let key = |p: &Point| -> usize {
            let cx = (((p.x - min.x) / cell) as usize).min(cols - 1);
            let cy = (((p.y - min.y) / cell) as usize).min(rows - 1);
            cy * cols + cx
        };
        for p in points {
            counts[key(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        // Insertion in index order keeps each bucket sorted by index.
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        Self {
            origin: min,
            cell,
            cols,
            rows,
            starts: counts,
            items,
        }
    }

    /// Cell containing `p`, clamped into the grid.
    fn cell_of(&self, p: Point) -> (isize, isize) {
        let cx = ((p.x - self.origin.x) / self.cell).floor();
        let cy = ((p.y - self.origin.y) / self.cell).floor();
        (
            cx.clamp(0.0, (self.cols - 1) as f64) as isize,
            cy.clamp(0.0, (self.rows - 1) as f64) as isize,
        )
    }

    fn bucket(&self, cx: isize, cy: isize) -> &[u32] {
        if cx < 0 || cy < 0 || cx as usize >= self.cols || cy as usize >= self.rows {
            return &[];
        }
        let k = cy as usize * self.cols + cx as usize;
        &self.items[self.starts[k] as usize..self.starts[k + 1] as usize]
    }

    /// Lower bound on the distance from `q` to any point in ring `r` or
    /// beyond around the cell `(cx, cy)`; zero while `q` is outside the
    /// cells already scanned.
    fn ring_lower_bound(&self, q: Point, cx: isize, cy: isize, r: isize) -> f64 {
        if r == 0 {
            return 0.0;
        }
        let x0 = self.origin.x + (cx - r + 1) as f64 * self.cell;
        let x1 = self.origin.x + (cx + r) as f64 * self.cell;
        let y0 = self.origin.y + (cy - r + 1) as f64 * self.cell;
        let y1 = self.origin.y + (cy + r) as f64 * self.cell;
        (q.x - x0).min(x1 - q.x).min(q.y - y0).min(y1 - q.y).max(0.0)
    }

    fn max_ring(&self, cx: isize, cy: isize) -> isize {
        let dx = cx.abs().max((self.cols as isize - 1 - cx).abs());
        let dy = cy.abs().max((self.rows as isize - 1 - cy).abs());
        dx.max(dy)
    }

    fn for_ring(&self, cx: isize, cy: isize, r: isize, mut f: impl FnMut(u32)) {
        if r == 0 {
            self.bucket(cx, cy).iter().for_each(|&i| f(i));
            return;
        }
        let (cols, rows) = (self.cols as isize, self.rows as isize);
        let xs = (cx - r).max(0)..=(cx + r).min(cols - 1);
        for y in [cy - r, cy + r] {
            if (0..rows).contains(&y) {
                xs.clone().for_each(|x| self.bucket(x, y).iter().for_each(|&i| f(i)));
            }
        }
        let ys = (cy - r + 1).max(0)..=(cy + r - 1).min(rows - 1);
        for x in [cx - r, cx + r] {
            if (0..cols).contains(&x) {
                ys.clone().for_each(|y| self.bucket(x, y).iter().for_each(|&i| f(i)));
            }
        }
    }

    /// Index of the point nearest to `q` (ties → lowest index).
    pub fn nearest(&self, points: &[Point], q: Point) -> Option<usize> {
        if self.items.is_empty() {
            return None;
        }
        let (cx, cy) = self.cell_of(q);
        let mut best = (f64::INFINITY, u32::MAX);
        let last = self.max_ring(cx, cy);
        for r in 0..=last {
            if best.1 != u32::MAX && self.ring_lower_bound(q, cx, cy, r).powi(2) > best.0 {
                break;
            }
            self.for_ring(cx, cy, r, |i| {
                let d = points[i as usize].distance_sq(q);
                if d < best.0 || (d == best.0 && i < best.1) {
                    best = (d, i);
                }
            });
        }
        Some(best.1 as usize)
    }

    /// The `k` points nearest to `q`, sorted by (distance, index), skipping
    /// `exclude`.
    pub fn k_nearest(&self, points: &[Point], q: Point, k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut found: Vec<(f64, u32)> = Vec::with_capacity(k + 8);
        if k == 0 {
            return Vec::new();
        }
        let (cx, cy) = self.cell_of(q);
        let last = self.max_ring(cx, cy);
        for r in 0..=last {
            if found.len() >= k {
                let kth = found[k - 1].0;
                if self.ring_lower_bound(q, cx, cy, r).powi(2) > kth {
                    break;
                }
            }
            self.for_ring(cx, cy, r, |i| {
                if Some(i as usize) != exclude {
                    found.push((points[i as usize].distance_sq(q), i));
                }
            });
            found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            found.truncate(k);
        }
        found.into_iter().map(|(_, i)| i as usize).collect()
    }
}
