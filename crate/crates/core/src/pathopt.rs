//! Polyline simplification and curvature-bounded cubic Bézier smoothing.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{path_length, point_line_distance, point_segment_distance, Point};

/// Largest uniform handle scale tried before giving up on the bound.
pub const MAX_HANDLE_SCALE: f64 = 64.0;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("polyline needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive vertices {0} and {1} coincide")]
    RepeatedVertex(usize, usize),
    #[error("closed polyline must end at its first vertex")]
    OpenClosedPolyline,
    #[error("degenerate handle")]
    DegenerateHandle,
    #[error("segments do not share a join point")]
    NotJoined,
    #[error("curvature bound unattainable within s <= {max_scale}: join {join} still has curvature {curvature}")]
    Unattainable {
        join: usize,
        curvature: f64,
        max_scale: f64,
    },
    #[error("invalid path parameters: {0}")]
    InvalidParams(String),
    #[error("malformed path file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Ordered vertex chain. A closed polyline repeats its first vertex at the
/// end.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<Point>,
    pub closed: bool,
}

impl Polyline {
    pub fn open(vertices: Vec<Point>) -> Result<Self, PathError> {
        let line = Self { vertices, closed: false };
        line.validate()?;
        Ok(line)
    }

    /// Closes the chain by re-appending the first vertex if needed.
    pub fn closed(mut vertices: Vec<Point>) -> Result<Self, PathError> {
        if let (Some(&first), Some(&last)) = (vertices.first(), vertices.last()) {
            if vertices.len() > 1 && first != last {
                vertices.push(first);
            }
        }
        let line = Self { vertices, closed: true };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<(), PathError> {
        if self.vertices.len() < 2 {
            return Err(PathError::TooFewVertices(self.vertices.len()));
        }
        if let Some(i) = self.vertices.windows(2).position(|w| w[0] == w[1]) {
            return Err(PathError::RepeatedVertex(i, i + 1));
        }
        if self.closed && (self.vertices.len() < 3 || self.vertices[0] != self.vertices[self.vertices.len() - 1]) {
            return Err(PathError::OpenClosedPolyline);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Vertex count without the repeated closing vertex.
    pub fn distinct_len(&self) -> usize {
        if self.closed {
            self.vertices.len().saturating_sub(1)
        } else {
            self.vertices.len()
        }
    }

    pub fn length(&self) -> f64 {
        path_length(&self.vertices)
    }

    /// Distance from `p` to the nearest edge.
    pub fn distance_to(&self, p: Point) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => p.distance(self.vertices[0]),
            _ => self
                .vertices
                .windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathOptParams {
    pub d_eps: f64,
    pub kappa_eps: f64,
    pub s_tolerance: f64,
}

impl Default for PathOptParams {
    fn default() -> Self {
        Self {
            d_eps: 0.5,
            kappa_eps: 2.0,
            s_tolerance: 1e-3,
        }
    }
}

impl PathOptParams {
    pub fn validate(&self) -> Result<(), PathError> {
        if !(self.d_eps > 0.0 && self.kappa_eps > 0.0 && self.s_tolerance > 0.0) {
            return Err(PathError::InvalidParams(format!(
                "d_eps, kappa_eps and s_tolerance must be positive (got {}, {}, {})",
                self.d_eps, self.kappa_eps, self.s_tolerance
            )));
        }
        Ok(())
    }
}

/// Keeps the endpoints of `chain` and every vertex needed to stay within
/// `d_eps` of the original.
fn rdp_chain(chain: &[Point], d_eps: f64) -> Vec<Point> {
    let n = chain.len();
    if n <= 2 {
        return chain.to_vec();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (a, b) = (chain[lo], chain[hi]);
        let mut far = (0.0, lo);
        for (i, &p) in chain.iter().enumerate().take(hi).skip(lo + 1) {
            let d = point_segment_distance(p, a, b);
            if d > far.0 {
                far = (d, i);
            }
        }
        if far.0 > d_eps {
            keep[far.1] = true;
            stack.push((lo, far.1));
            stack.push((far.1, hi));
        }
    }
    chain
        .iter()
        .zip(keep)
        .filter_map(|(&p, k)| k.then_some(p))
        .collect()
}

fn convex_hull_indices(points: &[Point]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
            .then(a.cmp(&b))
    });
    if idx.len() < 3 {
        return idx;
    }
    let turn = |o: usize, a: usize, b: usize| (points[a] - points[o]).cross(points[b] - points[o]);
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in [idx.clone(), idx.iter().rev().copied().collect()] {
        let floor = hull.len();
        for i in pass {
            while hull.len() >= floor + 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0.0 {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

/// The mutually farthest vertex pair (ties → lexicographically smallest).
fn farthest_pair(points: &[Point]) -> (usize, usize) {
    let mut hull = convex_hull_indices(points);
    hull.sort_unstable();
    let mut best = (-1.0, 0, 0);
    for (k, &i) in hull.iter().enumerate() {
        for &j in &hull[k + 1..] {
            let d = points[i].distance_sq(points[j]);
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    (best.1, best.2)
}

/// Ramer-Douglas-Peucker simplification. Every dropped vertex stays within
/// `d_eps` of the result. Closed chains are first cut at their two mutually
/// farthest vertices and the output starts at the first of them.
pub fn rdp_simplify(line: &Polyline, d_eps: f64) -> Polyline {
    if !line.closed {
        return Polyline {
            vertices: rdp_chain(&line.vertices, d_eps),
            closed: false,
        };
    }
    let ring = &line.vertices[..line.vertices.len() - 1];
    let m = ring.len();
    if m < 3 {
        return line.clone();
    }
    let (i, j) = farthest_pair(ring);
    let first: Vec<Point> = (i..=j).map(|k| ring[k]).collect();
    let second: Vec<Point> = (j..=i + m).map(|k| ring[k % m]).collect();
    let mut vertices = rdp_chain(&first, d_eps);
    vertices.extend(rdp_chain(&second, d_eps).into_iter().skip(1));
    Polyline { vertices, closed: true }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezier {
    pub p0: Point,
    pub p1: Point,
    pub p2: Point,
    pub p3: Point,
}

impl CubicBezier {
    pub const fn new(p0: Point, p1: Point, p2: Point, p3: Point) -> Self {
        Self { p0, p1, p2, p3 }
    }

    pub fn point(&self, t: f64) -> Point {
        let u = 1.0 - t;
        self.p0 * (u * u * u) + self.p1 * (3.0 * u * u * t) + self.p2 * (3.0 * u * t * t) + self.p3 * (t * t * t)
    }

    pub fn derivative(&self, t: f64) -> Point {
        let u = 1.0 - t;
        (self.p1 - self.p0) * (3.0 * u * u) + (self.p2 - self.p1) * (6.0 * u * t) + (self.p3 - self.p2) * (3.0 * t * t)
    }

    pub fn second_derivative(&self, t: f64) -> Point {
        let u = 1.0 - t;
        (self.p2 - self.p1 * 2.0 + self.p0) * (6.0 * u) + (self.p3 - self.p2 * 2.0 + self.p1) * (6.0 * t)
    }

    /// Curvature at parameter `t`; zero where the derivative vanishes.
    pub fn curvature(&self, t: f64) -> f64 {
        let d1 = self.derivative(t);
        let speed = d1.norm();
        if speed == 0.0 {
            return 0.0;
        }
        d1.cross(self.second_derivative(t)).abs() / speed.powi(3)
    }

    /// De Casteljau split at `t`.
    pub fn split(&self, t: f64) -> (CubicBezier, CubicBezier) {
        let a = self.p0.lerp(self.p1, t);
        let b = self.p1.lerp(self.p2, t);
        let c = self.p2.lerp(self.p3, t);
        let ab = a.lerp(b, t);
        let bc = b.lerp(c, t);
        let mid = ab.lerp(bc, t);
        (
            CubicBezier::new(self.p0, a, ab, mid),
            CubicBezier::new(mid, bc, c, self.p3),
        )
    }

    pub fn is_degenerate(&self) -> bool {
        self.p0 == self.p1 && self.p1 == self.p2 && self.p2 == self.p3
    }

    fn control_length(&self) -> f64 {
        self.p0.distance(self.p1) + self.p1.distance(self.p2) + self.p2.distance(self.p3)
    }

    /// Flattens into `(t, cumulative length)` pairs by adaptive subdivision.
    fn arc_table(&self, tol: f64) -> Vec<(f64, f64)> {
        fn recurse(c: &CubicBezier, t0: f64, t1: f64, tol: f64, depth: u32, out: &mut Vec<(f64, f64)>) {
            let chord = c.p0.distance(c.p3);
            if depth >= 18 || c.control_length() - chord <= tol {
                let s = out.last().map_or(0.0, |l| l.1) + chord;
                out.push((t1, s));
                return;
            }
            let (a, b) = c.split(0.5);
            let tm = 0.5 * (t0 + t1);
            recurse(&a, t0, tm, tol * 0.5, depth + 1, out);
            recurse(&b, tm, t1, tol * 0.5, depth + 1, out);
        }
        let mut out = vec![(0.0, 0.0)];
        recurse(self, 0.0, 1.0, tol, 0, &mut out);
        out
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_table(1e-9 * (1.0 + self.control_length())).last().map_or(0.0, |l| l.1)
    }
}

/// Curvature at the end of `seg_a` from its last three control points.
/// `seg_b` must start where `seg_a` ends.
pub fn join_curvature(seg_a: &CubicBezier, seg_b: &CubicBezier) -> Result<f64, PathError> {
    if seg_a.p3.distance(seg_b.p0) > 1e-9 * (1.0 + seg_a.p3.norm()) {
        return Err(PathError::NotJoined);
    }
    end_curvature(seg_a)
}

fn end_curvature(seg: &CubicBezier) -> Result<f64, PathError> {
    let d = seg.p2.distance(seg.p3);
    if d == 0.0 {
        return Err(PathError::DegenerateHandle);
    }
    let c = point_line_distance(seg.p1, seg.p2, seg.p3);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * c / (3.0 * d * d))
}

/// Chain of cubic segments. `join_curvatures[i]` belongs to the end of
/// segment `i`; a closed path has one join per segment, an open one has
/// one fewer.
#[derive(Debug, Clone, PartialEq)]
pub struct SplinePath {
    pub segments: Vec<CubicBezier>,
    pub closed: bool,
    pub join_curvatures: Vec<f64>,
}

impl SplinePath {
    pub fn new(segments: Vec<CubicBezier>, closed: bool) -> Result<Self, PathError> {
        let mut path = Self {
            segments,
            closed,
            join_curvatures: Vec::new(),
        };
        path.join_curvatures = path.compute_join_curvatures()?;
        Ok(path)
    }

    /// A single stipple drawn as a zero-length segment.
    pub fn dot(p: Point) -> Self {
        Self {
            segments: vec![CubicBezier::new(p, p, p, p)],
            closed: false,
            join_curvatures: Vec::new(),
        }
    }

    pub fn join_count(&self) -> usize {
        match (self.closed, self.segments.len()) {
            (_, 0) => 0,
            (true, n) => n,
            (false, n) => n - 1,
        }
    }

    fn compute_join_curvatures(&self) -> Result<Vec<f64>, PathError> {
        let n = self.segments.len();
        (0..self.join_count())
            .map(|i| join_curvature(&self.segments[i], &self.segments[(i + 1) % n]))
            .collect()
    }

    pub fn max_join_curvature(&self) -> f64 {
        self.join_curvatures.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest curvature sampled strictly inside the segments.
    pub fn max_interior_curvature(&self, samples_per_segment: usize) -> f64 {
        let k = samples_per_segment.max(1);
        self.segments
            .iter()
            .filter(|s| !s.is_degenerate())
            .flat_map(|s| (1..=k).map(move |j| s.curvature(j as f64 / (k + 1) as f64)))
            .fold(0.0, f64::max)
    }

    /// Interpolated vertices (segment starts plus the final end).
    pub fn vertices(&self) -> Vec<Point> {
        let mut v: Vec<Point> = self.segments.iter().map(|s| s.p0).collect();
        if let Some(last) = self.segments.last() {
            v.push(last.p3);
        }
        v
    }

    /// Handles at every join are collinear and point away from each other.
    pub fn is_g1(&self, angle_tol: f64) -> bool {
        let n = self.segments.len();
        (0..self.join_count()).all(|i| {
            let a = &self.segments[i];
            let b = &self.segments[(i + 1) % n];
            let (Some(into), Some(out)) = ((a.p2 - a.p3).normalized(), (b.p1 - b.p0).normalized()) else {
                return false;
            };
            let angle = into.cross(out).atan2(into.dot(out)).abs();
            (std::f64::consts::PI - angle).abs() <= angle_tol && a.p3 == b.p0
        })
    }

    /// Every handle scaled by `s` about its anchor vertex.
    pub fn with_handle_scale(&self, s: f64) -> Result<SplinePath, PathError> {
        let segments = self
            .segments
            .iter()
            .map(|c| CubicBezier::new(c.p0, c.p0 + (c.p1 - c.p0) * s, c.p3 + (c.p2 - c.p3) * s, c.p3))
            .collect();
        SplinePath::new(segments, self.closed)
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(CubicBezier::arc_length).sum()
    }

    /// Text dump: header line, then `p0x p0y p1x p1y p2x p2y p3x p3y` per
    /// segment.
    pub fn to_text(&self) -> String {
        let mut s = format!("# path v1 segments={} closed={}\n", self.segments.len(), self.closed);
        for c in &self.segments {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {}",
                c.p0.x, c.p0.y, c.p1.x, c.p1.y, c.p2.x, c.p2.y, c.p3.x, c.p3.y
            );
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self, PathError> {
        let mut closed = None;
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |reason: String| PathError::Parse { line: i + 1, reason };
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for field in header.split_whitespace() {
                    if let Some(v) = field.strip_prefix("closed=") {
                        closed = Some(v.parse::<bool>().map_err(|_| err(format!("field closed: `{v}`")))?);
                    }
                }
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err("field control point: not a number".into()))?;
            if nums.len() != 8 {
                return Err(err(format!("field control point: expected 8 numbers, got {}", nums.len())));
            }
            let p = |k: usize| Point::new(nums[2 * k], nums[2 * k + 1]);
            segments.push(CubicBezier::new(p(0), p(1), p(2), p(3)));
        }
        let closed = closed.ok_or(PathError::Parse {
            line: 1,
            reason: "field closed: missing from header".into(),
        })?;
        if segments.len() == 1 && segments[0].is_degenerate() {
            return Ok(SplinePath::dot(segments[0].p0));
        }
        SplinePath::new(segments, closed)
    }
}

fn unit_or(v: Point, fallback: Point) -> Point {
    v.normalized().unwrap_or(fallback)
}

/// Catmull-Rom interpolation with chord-length parameterization: one
/// cubic per edge, handles a third of the adjacent chord along the vertex
/// tangent.
pub fn fit_spline(line: &Polyline) -> Result<SplinePath, PathError> {
    line.validate()?;
    let verts = &line.vertices;
    let ring = if line.closed { &verts[..verts.len() - 1] } else { &verts[..] };
    let m = ring.len();
    let tangent = |i: usize| -> Point {
        let cur = ring[i];
        let prev = if i > 0 {
            Some(ring[i - 1])
        } else if line.closed {
            Some(ring[m - 1])
        } else {
            None
        };
        let next = if i + 1 < m {
            Some(ring[i + 1])
        } else if line.closed {
            Some(ring[0])
        } else {
            None
        };
        match (prev, next) {
            (None, Some(n)) => unit_or(n - cur, Point::new(1.0, 0.0)),
            (Some(p), None) => unit_or(cur - p, Point::new(1.0, 0.0)),
            (Some(p), Some(n)) => {
                let span = cur.distance(p) + n.distance(cur);
                // A hairpin (p == n) keeps the incoming direction.
                unit_or((n - p) * (1.0 / span), unit_or(cur - p, Point::new(1.0, 0.0)))
            }
            (None, None) => Point::new(1.0, 0.0),
        }
    };
    let tangents: Vec<Point> = (0..m).map(tangent).collect();
    let edges = if line.closed { m } else { m - 1 };
    let segments = (0..edges)
        .map(|i| {
            let j = (i + 1) % m;
            let (a, b) = (ring[i], ring[j]);
            let h = a.distance(b) / 3.0;
            CubicBezier::new(a, a + tangents[i] * h, b - tangents[j] * h, b)
        })
        .collect();
    SplinePath::new(segments, line.closed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureFit {
    pub path: SplinePath,
    /// Uniform handle scale applied (1 when already within bound).
    pub scale: f64,
}

/// Smallest uniform handle scale `s ≥ 1` that brings every join curvature
/// under `kappa_eps`, found by bisection.
pub fn enforce_curvature(path: &SplinePath, params: &PathOptParams) -> Result<CurvatureFit, PathError> {
    params.validate()?;
    let bound = params.kappa_eps;
    if path.max_join_curvature() <= bound {
        return Ok(CurvatureFit {
            path: path.clone(),
            scale: 1.0,
        });
    }
    let within = |s: f64| -> Result<(bool, SplinePath), PathError> {
        let scaled = path.with_handle_scale(s)?;
        Ok((scaled.max_join_curvature() <= bound, scaled))
    };
    let mut lo = 1.0;
    let mut hi = 2.0;
    let mut best = loop {
        let (ok, scaled) = within(hi)?;
        if ok {
            break scaled;
        }
        if hi >= MAX_HANDLE_SCALE {
            let (join, curvature) = scaled
                .join_curvatures
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, &k)| if k > acc.1 { (i, k) } else { acc });
            return Err(PathError::Unattainable {
                join,
                curvature,
                max_scale: MAX_HANDLE_SCALE,
            });
        }
        lo = hi;
        hi = (hi * 2.0).min(MAX_HANDLE_SCALE);
    };
    let ratio = 1.0 + params.s_tolerance;
    loop {
        while hi / lo > ratio {
            let mid = (lo * hi).sqrt();
            match within(mid)? {
                (true, scaled) => {
                    hi = mid;
                    best = scaled;
                }
                (false, _) => lo = mid,
            }
        }
        // The bound need not be monotone in s; insist that one tolerance
        // step below the answer really fails.
        let below = hi / ratio;
        if below <= 1.0 {
            break;
        }
        match within(below)? {
            (true, scaled) => {
                hi = below;
                best = scaled;
                lo = lo.min(hi / ratio).max(1.0);
            }
            (false, _) => break,
        }
    }
    Ok(CurvatureFit { path: best, scale: hi })
}

/// Arc-length uniform samples: every segment is cut into the fewest equal
/// arc-length pieces no longer than `spacing`. Segment endpoints are always
/// included; a dot yields a single vertex.
pub fn sample_path(path: &SplinePath, spacing: f64) -> Polyline {
    let spacing = if spacing > 0.0 { spacing } else { 1.0 };
    let mut out: Vec<Point> = Vec::new();
    for seg in &path.segments {
        if out.is_empty() {
            out.push(seg.p0);
        }
        if seg.is_degenerate() {
            continue;
        }
        let table = seg.arc_table(1e-4 * spacing);
        let total = table.last().map_or(0.0, |l| l.1);
        let pieces = ((total / spacing) - 1e-9).ceil().max(1.0) as usize;
        let mut k = 1;
        for j in 1..pieces {
            let target = total * j as f64 / pieces as f64;
            while k + 1 < table.len() && table[k].1 < target {
                k += 1;
            }
            let (t0, s0) = table[k - 1];
            let (t1, s1) = table[k];
            let t = if s1 > s0 { t0 + (t1 - t0) * (target - s0) / (s1 - s0) } else { t1 };
            out.push(seg.point(t));
        }
        out.push(seg.p3);
    }
    out.dedup();
    if path.closed && out.len() > 1 {
        let first = out[0];
        *out.last_mut().expect("non-empty") = first;
    }
    Polyline {
        vertices: out,
        closed: path.closed,
    }
}

/// Simplify, fit and bound curvature in one go.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedPath {
    pub simplified: Polyline,
    pub fit: CurvatureFit,
}

pub fn optimize_path(line: &Polyline, params: &PathOptParams) -> Result<OptimizedPath, PathError> {
    params.validate()?;
    line.validate()?;
    let simplified = rdp_simplify(line, params.d_eps);
    let spline = fit_spline(&simplified)?;
    let fit = enforce_curvature(&spline, params)?;
    Ok(OptimizedPath { simplified, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn rdp_collinear() {
        let line = Polyline::open(pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)])).unwrap();
        assert_eq!(rdp_simplify(&line, 0.5).vertices, pts(&[(0.0, 0.0), (4.0, 0.0)]));
    }

    #[test]
    fn rdp_keeps_spike() {
        let line = Polyline::open(pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (3.0, 0.0), (4.0, 0.0)])).unwrap();
        let out = rdp_simplify(&line, 0.5);
        assert!(out.vertices.contains(&Point::new(2.0, 1.0)));
    }

    #[test]
    fn rdp_closed_square_stays_closed() {
        let line = Polyline::closed(pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)])).unwrap();
        let out = rdp_simplify(&line, 0.1);
        assert!(out.closed);
        assert_eq!(out.distinct_len(), 4);
        assert_eq!(out.vertices.first(), out.vertices.last());
    }

    #[test]
    fn rdp_closed_collinear_loop() {
        let line = Polyline::closed(pts(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0), (2.0, 0.0)])).unwrap();
        let out = rdp_simplify(&line, 0.5);
        assert_eq!(out.distinct_len(), 2);
    }

    proptest! {
        #[test]
        fn rdp_bound_holds(raw in prop::collection::vec((0.0..50.0f64, 0.0..50.0f64), 3..60), eps in 0.05..5.0f64, closed in any::<bool>()) {
            let mut v = pts(&raw);
            v.dedup();
            prop_assume!(v.len() >= 3 && v[0] != v[v.len() - 1]);
            let line = if closed { Polyline::closed(v).unwrap() } else { Polyline::open(v).unwrap() };
            let out = rdp_simplify(&line, eps);
            for &p in &line.vertices {
                prop_assert!(out.distance_to(p) <= eps + 1e-12);
            }
            prop_assert_eq!(out.closed, line.closed);
        }
    }

    #[test]
    fn two_vertex_spline_is_straight() {
        let line = Polyline::open(pts(&[(0.0, 0.0), (3.0, 0.0)])).unwrap();
        let s = fit_spline(&line).unwrap();
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].p1, Point::new(1.0, 0.0));
        assert_eq!(s.segments[0].p2, Point::new(2.0, 0.0));
    }

    #[test]
    fn collinear_spline_has_zero_curvature() {
        let line = Polyline::open(pts(&[(0.0, 0.0), (1.0, 1.0), (3.0, 3.0), (4.0, 4.0)])).unwrap();
        let s = fit_spline(&line).unwrap();
        assert!(s.join_curvatures.iter().all(|&k| k == 0.0));
        for seg in &s.segments {
            for p in [seg.p1, seg.p2] {
                assert!((p.x - p.y).abs() < 1e-12);
            }
        }
        assert!(s.max_interior_curvature(8) < 1e-9);
    }

    #[test]
    fn square_spline_symmetric() {
        let line = Polyline::closed(pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        let s = fit_spline(&line).unwrap();
        assert_eq!(s.join_curvatures.len(), 4);
        for k in &s.join_curvatures {
            assert!((k - s.join_curvatures[0]).abs() < 1e-12);
        }
        assert!(s.is_g1(1e-6));
    }

    #[test]
    fn fit_rejects_single_vertex() {
        let line = Polyline {
            vertices: pts(&[(1.0, 1.0)]),
            closed: false,
        };
        assert_eq!(fit_spline(&line), Err(PathError::TooFewVertices(1)));
    }

    #[test]
    fn join_curvature_reference() {
        let a = CubicBezier::new(Point::new(2.0, 1.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 0.0));
        let b = CubicBezier::new(Point::new(0.0, 0.0), Point::new(-1.0, 0.0), Point::new(-2.0, 0.0), Point::new(-3.0, 0.0));
        assert!((join_curvature(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let straight = CubicBezier::new(Point::new(3.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 0.0));
        assert_eq!(join_curvature(&straight, &b).unwrap(), 0.0);
        let flat = CubicBezier::new(Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 0.0), Point::new(0.0, 0.0));
        assert_eq!(join_curvature(&flat, &b), Err(PathError::DegenerateHandle));
        assert!(join_curvature(&a, &straight).is_err());
    }

    #[test]
    fn join_curvature_matches_analytic_endpoint() {
        let a = CubicBezier::new(Point::new(0.0, 0.0), Point::new(1.0, 2.0), Point::new(3.0, 1.5), Point::new(4.0, 0.0));
        let b = CubicBezier::new(a.p3, Point::new(5.0, -1.0), Point::new(6.0, 0.0), Point::new(7.0, 0.0));
        assert!((join_curvature(&a, &b).unwrap() - a.curvature(1.0)).abs() < 1e-12);
    }

    #[test]
    fn doubling_handle_quarters_curvature() {
        // p1 kept fixed: c constant while d doubles.
        let a = CubicBezier::new(Point::new(0.0, 1.0), Point::new(1.0, 1.0), Point::new(2.0, 0.0), Point::new(3.0, 0.0));
        let b = CubicBezier::new(Point::new(0.0, 1.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(3.0, 0.0));
        let next = CubicBezier::new(Point::new(3.0, 0.0), Point::new(4.0, 0.0), Point::new(5.0, 0.0), Point::new(6.0, 0.0));
        let ka = join_curvature(&a, &next).unwrap();
        let kb = join_curvature(&b, &next).unwrap();
        assert!((kb - ka / 4.0).abs() < 1e-15);
    }

    /// Zigzag whose joins all have parallel end tangents, so c is unchanged
    /// by uniform handle scaling and κ ∝ 1/s².
    fn parallel_tangent_path(k: f64) -> SplinePath {
        // Segment with horizontal end tangents: c = h, d = 1 → κ = 2h/3.
        let h = 1.5 * k;
        let a = CubicBezier::new(Point::new(0.0, h), Point::new(1.0, h), Point::new(2.0, 0.0), Point::new(3.0, 0.0));
        let b = CubicBezier::new(Point::new(3.0, 0.0), Point::new(4.0, 0.0), Point::new(5.0, 0.0), Point::new(6.0, 0.0));
        SplinePath::new(vec![a, b], false).unwrap()
    }

    #[test]
    fn enforce_scale_for_four_times_bound() {
        let params = PathOptParams {
            kappa_eps: 0.5,
            s_tolerance: 1e-6,
            ..PathOptParams::default()
        };
        let path = parallel_tangent_path(4.0 * params.kappa_eps);
        assert!((path.max_join_curvature() - 2.0).abs() < 1e-12);
        let fit = enforce_curvature(&path, &params).unwrap();
        assert!((fit.scale - 2.0).abs() < 1e-5, "{}", fit.scale);
        assert!(fit.path.max_join_curvature() <= params.kappa_eps + 1e-6);
        assert_eq!(fit.path.vertices(), path.vertices());
        assert!(fit.path.is_g1(1e-6) == path.is_g1(1e-6));
    }

    #[test]
    fn enforce_noop_cases() {
        let params = PathOptParams::default();
        let line = Polyline::open(pts(&[(0.0, 0.0), (1.0, 0.0), (5.0, 0.0)])).unwrap();
        let s = fit_spline(&line).unwrap();
        for kappa in [1e-6, 2.0, 100.0] {
            let fit = enforce_curvature(&s, &PathOptParams { kappa_eps: kappa, ..params.clone() }).unwrap();
            assert_eq!(fit.scale, 1.0);
            assert_eq!(fit.path, s);
        }
    }

    #[test]
    fn enforce_unattainable() {
        let params = PathOptParams {
            kappa_eps: 1e-9,
            ..PathOptParams::default()
        };
        let path = parallel_tangent_path(1.0);
        assert!(matches!(enforce_curvature(&path, &params), Err(PathError::Unattainable { join: 0, .. })));
    }

    #[test]
    fn sample_straight_line() {
        let line = Polyline::open(pts(&[(0.0, 0.0), (10.0, 0.0)])).unwrap();
        let s = fit_spline(&line).unwrap();
        let out = sample_path(&s, 1.0);
        assert_eq!(out.vertices.len(), 11);
        for (i, p) in out.vertices.iter().enumerate() {
            assert!((p.x - i as f64).abs() < 1e-6 && p.y.abs() < 1e-12);
        }
    }

    #[test]
    fn sample_closed_path_wraps() {
        let line = Polyline::closed(pts(&[(0.0, 0.0), (4.0, 0.0), (4.0, 3.0)])).unwrap();
        let out = sample_path(&fit_spline(&line).unwrap(), 0.7);
        assert_eq!(out.vertices.first(), out.vertices.last());
        for w in out.vertices.windows(2) {
            assert!(w[0].distance(w[1]) <= 0.7 * 1.05);
        }
    }

    #[test]
    fn text_round_trip() {
        let line = Polyline::closed(pts(&[(0.0, 0.0), (4.0, 0.1), (4.0, 3.0), (1.0, 2.0)])).unwrap();
        let s = fit_spline(&line).unwrap();
        assert_eq!(SplinePath::parse_text(&s.to_text()).unwrap(), s);
        let dot = SplinePath::dot(Point::new(1.0, 2.0));
        assert_eq!(SplinePath::parse_text(&dot.to_text()).unwrap(), dot);
        assert!(matches!(SplinePath::parse_text("# path v1\n1 2 3\n"), Err(PathError::Parse { line: 2, .. })));
    }
}
