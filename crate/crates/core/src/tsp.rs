//! Closed-tour construction and improvement over a stipple set.
//!
//! Nearest-neighbor construction followed by 2-opt and Or-opt local search
//! driven by k-nearest candidate lists and don't-look bits. Small instances
//! finish with an exhaustive 2-opt sweep so their local optima are free of
//! crossing edges.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, SpatialGrid};
use crate::pathopt::Polyline;

/// Instances up to this size get a full O(N²) 2-opt sweep after the
/// neighbor-list search converges.
pub const EXHAUSTIVE_TWO_OPT_LIMIT: usize = 1500;

const GAIN_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TspError {
    #[error("degenerate instance: {0} points")]
    Degenerate(usize),
    #[error("k = {k} must be smaller than the point count {n}")]
    TooManyNeighbors { k: usize, n: usize },
    #[error("invalid tsp parameters: {0}")]
    InvalidParams(String),
    #[error("tour is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("malformed tour file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TspParams {
    pub neighbor_k: usize,
    /// Wall-clock seconds; `inf` means run to a local optimum.
    pub time_budget: f64,
    pub or_opt_segments: usize,
    pub rng_seed: u64,
}

impl Default for TspParams {
    fn default() -> Self {
        Self {
            neighbor_k: 10,
            time_budget: 60.0,
            or_opt_segments: 3,
            rng_seed: 0,
        }
    }
}

impl TspParams {
    pub fn validate(&self) -> Result<(), TspError> {
        if self.neighbor_k < 2 {
            return Err(TspError::InvalidParams(format!("neighbor_k = {} < 2", self.neighbor_k)));
        }
        if !(self.time_budget > 0.0) {
            return Err(TspError::InvalidParams(format!(
                "time_budget = {} must be positive",
                self.time_budget
            )));
        }
        Ok(())
    }

    fn deadline(&self, start: Instant) -> Option<Instant> {
        if self.time_budget.is_finite() {
            Duration::try_from_secs_f64(self.time_budget)
                .ok()
                .and_then(|d| start.checked_add(d))
        } else {
            None
        }
    }
}

/// A closed visiting order; the last city connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    pub order: Vec<usize>,
    pub length: f64,
}

impl Tour {
    pub fn from_order(order: Vec<usize>, points: &[Point]) -> Result<Self, TspError> {
        if !is_permutation(&order, points.len()) {
            return Err(TspError::NotAPermutation(points.len()));
        }
        let length = tour_length(&order, points);
        Ok(Self { order, length })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// One index per line after a header comment.
    pub fn to_text(&self) -> String {
        let mut s = format!("# tour v1 n={} length={}\n", self.order.len(), self.length);
        for i in &self.order {
            let _ = writeln!(s, "{i}");
        }
        s
    }

    pub fn parse_text(text: &str, points: &[Point]) -> Result<Self, TspError> {
        let mut order = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let idx: usize = line.parse().map_err(|_| TspError::Parse {
                line: i + 1,
                reason: format!("field index: `{line}` is not an index"),
            })?;
            order.push(idx);
        }
        Self::from_order(order, points)
    }
}

pub fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// Closed Euclidean length.
pub fn tour_length(order: &[usize], points: &[Point]) -> f64 {
    let n = order.len();
    if n < 2 {
        return 0.0;
    }
    (0..n)
        .map(|i| points[order[i]].distance(points[order[(i + 1) % n]]))
        .sum()
}

/// Exact k nearest neighbors of every point, ties broken by index.
pub fn build_neighbors(points: &[Point], k: usize) -> Result<Vec<Vec<usize>>, TspError> {
    let n = points.len();
    if n < 2 {
        return Err(TspError::Degenerate(n));
    }
    if k >= n {
        return Err(TspError::TooManyNeighbors { k, n });
    }
    let grid = SpatialGrid::new(points, 2.0);
    Ok((0..n).map(|i| grid.k_nearest(points, points[i], k, Some(i))).collect())
}

/// Bucket grid supporting deletion, for the nearest-neighbor construction.
struct RemainingGrid {
    origin: Point,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
    slot: Vec<u32>,
}

impl RemainingGrid {
    fn new(points: &[Point]) -> Self {
        let minx = points.iter().map(|p| p.x).fold(f64::MAX, f64::min);
        let miny = points.iter().map(|p| p.y).fold(f64::MAX, f64::min);
        let maxx = points.iter().map(|p| p.x).fold(f64::MIN, f64::max);
        let maxy = points.iter().map(|p| p.y).fold(f64::MIN, f64::max);
        let (w, h) = ((maxx - minx).max(1e-9), (maxy - miny).max(1e-9));
        let cell = ((w * h * 2.0 / points.len() as f64).sqrt()).max(w.max(h) / 2048.0);
        let cols = (w / cell) as usize + 1;
        let rows = (h / cell) as usize + 1;
        let mut grid = Self {
            origin: Point::new(minx, miny),
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
            slot: vec![0; points.len()],
        };
        for (i, p) in points.iter().enumerate() {
            let b = grid.key(*p);
            grid.slot[i] = grid.buckets[b].len() as u32;
            grid.buckets[b].push(i as u32);
        }
        grid
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        (
            (((p.x - self.origin.x) / self.cell) as usize).min(self.cols - 1),
            (((p.y - self.origin.y) / self.cell) as usize).min(self.rows - 1),
        )
    }

    fn key(&self, p: Point) -> usize {
        let (cx, cy) = self.cell_of(p);
        cy * self.cols + cx
    }

    fn remove(&mut self, i: usize, p: Point) {
        let b = self.key(p);
        let s = self.slot[i] as usize;
        self.buckets[b].swap_remove(s);
        if let Some(&moved) = self.buckets[b].get(s) {
            self.slot[moved as usize] = s as u32;
        }
    }

    fn nearest(&self, points: &[Point], q: Point) -> Option<usize> {
        let (cx, cy) = self.cell_of(q);
        let (cx, cy) = (cx as isize, cy as isize);
        let max_r = (self.cols.max(self.rows)) as isize;
        let mut best = (f64::INFINITY, u32::MAX);
        for r in 0..=max_r {
            if best.1 != u32::MAX {
                let bound = (r - 1).max(0) as f64 * self.cell;
                if bound * bound > best.0 {
                    break;
                }
            }
            let mut visit = |x: isize, y: isize| {
                if x < 0 || y < 0 || x as usize >= self.cols || y as usize >= self.rows {
                    return;
                }
                for &i in &self.buckets[y as usize * self.cols + x as usize] {
                    let d = points[i as usize].distance_sq(q);
                    if d < best.0 || (d == best.0 && i < best.1) {
                        best = (d, i);
                    }
                }
            };
            if r == 0 {
                visit(cx, cy);
                continue;
            }
            for x in (cx - r)..=(cx + r) {
                visit(x, cy - r);
                visit(x, cy + r);
            }
            for y in (cy - r + 1)..=(cy + r - 1) {
                visit(cx - r, y);
                visit(cx + r, y);
            }
        }
        (best.1 != u32::MAX).then_some(best.1 as usize)
    }
}

/// Greedy nearest-neighbor chain from a seeded random start city.
pub fn construct_tour(points: &[Point], seed: u64) -> Result<Tour, TspError> {
    let n = points.len();
    if n < 3 {
        return Err(TspError::Degenerate(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..n);
    construct_tour_from(points, start)
}

/// Nearest-neighbor chain from a fixed start city.
pub fn construct_tour_from(points: &[Point], start: usize) -> Result<Tour, TspError> {
    let n = points.len();
    if n < 3 {
        return Err(TspError::Degenerate(n));
    }
    let mut grid = RemainingGrid::new(points);
    let mut order = Vec::with_capacity(n);
    let mut current = start;
    grid.remove(current, points[current]);
    order.push(current);
    while order.len() < n {
        let next = grid
            .nearest(points, points[current])
            .expect("cities remain while the order is incomplete");
        grid.remove(next, points[next]);
        order.push(next);
        current = next;
    }
    Tour::from_order(order, points)
}

struct LocalSearch<'a> {
    points: &'a [Point],
    order: Vec<usize>,
    pos: Vec<usize>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
}

impl<'a> LocalSearch<'a> {
    fn new(points: &'a [Point], order: Vec<usize>) -> Self {
        let n = order.len();
        let mut pos = vec![0; n];
        for (i, &c) in order.iter().enumerate() {
            pos[c] = i;
        }
        Self {
            points,
            queue: order.iter().copied().collect(),
            queued: vec![true; n],
            order,
            pos,
        }
    }

    fn n(&self) -> usize {
        self.order.len()
    }

    fn d(&self, a: usize, b: usize) -> f64 {
        self.points[a].distance(self.points[b])
    }

    fn succ(&self, c: usize) -> usize {
        self.order[(self.pos[c] + 1) % self.n()]
    }

    fn pred(&self, c: usize) -> usize {
        self.order[(self.pos[c] + self.n() - 1) % self.n()]
    }

    fn push(&mut self, c: usize) {
        if !self.queued[c] {
            self.queued[c] = true;
            self.queue.push_back(c);
        }
    }

    /// Reverses `len` tour slots starting at position `start`, cyclically.
    fn reverse_positions(&mut self, start: usize, len: usize) {
        let n = self.n();
        for k in 0..len / 2 {
            let i = (start + k) % n;
            let j = (start + len - 1 - k) % n;
            self.order.swap(i, j);
            self.pos[self.order[i]] = i;
            self.pos[self.order[j]] = j;
        }
    }

    /// Replaces edges (t1,t2), (t3,t4) with (t1,t3), (t2,t4), where
    /// t2 = succ(t1) and t4 = succ(t3). Reverses whichever side is shorter.
    fn two_opt_move(&mut self, t1: usize, t2: usize, t3: usize, t4: usize) {
        let n = self.n();
        let inner = (self.pos[t3] + n - self.pos[t2]) % n + 1;
        if inner <= n - inner {
            self.reverse_positions(self.pos[t2], inner);
        } else {
            self.reverse_positions(self.pos[t4], n - inner);
        }
        for c in [t1, t2, t3, t4] {
            self.push(c);
        }
    }

    fn try_two_opt(&mut self, a: usize, neighbors: &[usize]) -> bool {
        for forward in [true, false] {
            let b = if forward { self.succ(a) } else { self.pred(a) };
            let dab = self.d(a, b);
            for &c in neighbors {
                let dac = self.d(a, c);
                if dab - dac <= GAIN_EPS {
                    break;
                }
                let d = if forward { self.succ(c) } else { self.pred(c) };
                if c == b || d == a {
                    continue;
                }
                let delta = dac + self.d(b, d) - dab - self.d(c, d);
                if delta < -GAIN_EPS {
                    if forward {
                        self.two_opt_move(a, b, c, d);
                    } else {
                        self.two_opt_move(b, a, d, c);
                    }
                    return true;
                }
            }
        }
        false
    }

    fn in_segment(&self, c: usize, s1: usize, m: usize) -> bool {
        (self.pos[c] + self.n() - self.pos[s1]) % self.n() < m
    }

    /// Moves the segment of `m` cities starting at `s1` between `x` and
    /// `y = succ(x)`, reversed when `reversed` (x s2..s1 y).
    fn or_move(&mut self, s1: usize, m: usize, x: usize, y: usize, reversed: bool) {
        let n = self.n();
        let s2 = self.order[(self.pos[s1] + m - 1) % n];
        let next = self.succ(s2);
        let p = self.pred(s1);
        let start = self.pos[s1];
        let b_len = (self.pos[x] + n - self.pos[next]) % n + 1;
        let c_len = n - m - b_len;
        let seg_start = if b_len <= c_len {
            self.reverse_positions(start, m + b_len);
            self.reverse_positions(start, b_len);
            (start + b_len) % n
        } else {
            let py = self.pos[y];
            self.reverse_positions(py, c_len + m);
            self.reverse_positions((py + m) % n, c_len);
            py
        };
        if !reversed {
            self.reverse_positions(seg_start, m);
        }
        for c in [p, next, s1, s2, x, y] {
            self.push(c);
        }
    }

    fn try_or_opt(&mut self, a: usize, neighbors: &[Vec<usize>], max_seg: usize) -> bool {
        let n = self.n();
        for m in 1..=max_seg {
            if n < m + 3 {
                break;
            }
            for back in [false, true] {
                if back && m == 1 {
                    continue;
                }
                let s1 = if back { self.order[(self.pos[a] + n - (m - 1)) % n] } else { a };
                let s2 = self.order[(self.pos[s1] + m - 1) % n];
                let p = self.pred(s1);
                let next = self.succ(s2);
                let gain = self.d(p, s1) + self.d(s2, next) - self.d(p, next);
                if gain <= GAIN_EPS {
                    continue;
                }
                let mut best: Option<(f64, usize, usize, bool)> = None;
                for &end in &[s1, s2] {
                    for &c in &neighbors[end] {
                        if self.d(end, c) >= gain {
                            break;
                        }
                        if self.in_segment(c, s1, m) {
                            continue;
                        }
                        for (x, y) in [(c, self.succ(c)), (self.pred(c), c)] {
                            if self.in_segment(x, s1, m) || self.in_segment(y, s1, m) {
                                continue;
                            }
                            let base = self.d(x, y);
                            let keep = self.d(x, s1) + self.d(s2, y) - base;
                            let flip = self.d(x, s2) + self.d(s1, y) - base;
                            let (cost, reversed) = if keep <= flip { (keep, false) } else { (flip, true) };
                            if gain - cost > GAIN_EPS && best.is_none_or(|b| cost < b.0) {
                                best = Some((cost, x, y, reversed));
                            }
                        }
                    }
                }
                if let Some((_, x, y, reversed)) = best {
                    self.or_move(s1, m, x, y, reversed);
                    return true;
                }
            }
        }
        false
    }

    /// First-improvement 2-opt over all edge pairs. Returns true if a move
    /// was applied.
    fn exhaustive_two_opt(&mut self, deadline: Option<Instant>) -> bool {
        let n = self.n();
        for i in 0..n {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return false;
            }
            let a = self.order[i];
            let b = self.order[(i + 1) % n];
            let dab = self.d(a, b);
            for j in (i + 2)..n {
                let c = self.order[j];
                let d = self.order[(j + 1) % n];
                if d == a {
                    continue;
                }
                let delta = self.d(a, c) + self.d(b, d) - dab - self.d(c, d);
                if delta < -GAIN_EPS {
                    self.two_opt_move(a, b, c, d);
                    return true;
                }
            }
        }
        false
    }
}

/// 2-opt and Or-opt local search. Only strictly improving moves are taken,
/// so the result is never longer than the input.
pub fn improve_tour(tour: &Tour, points: &[Point], params: &TspParams) -> Result<Tour, TspError> {
    params.validate()?;
    let n = points.len();
    if !is_permutation(&tour.order, n) {
        return Err(TspError::NotAPermutation(n));
    }
    if n < 4 {
        return Tour::from_order(tour.order.clone(), points);
    }
    let started = Instant::now();
    let deadline = params.deadline(started);
    let k = params.neighbor_k.min(n - 1);
    let neighbors = build_neighbors(points, k)?;
    let mut ls = LocalSearch::new(points, tour.order.clone());

    'search: loop {
        let mut pops = 0u32;
        while let Some(a) = ls.queue.pop_front() {
            ls.queued[a] = false;
            pops = pops.wrapping_add(1);
            if pops % 64 == 0 && deadline.is_some_and(|d| Instant::now() >= d) {
                break 'search;
            }
            let improved = ls.try_two_opt(a, &neighbors[a])
                || ls.try_or_opt(a, &neighbors, params.or_opt_segments);
            if improved {
                ls.push(a);
            }
        }
        if n > EXHAUSTIVE_TWO_OPT_LIMIT || !ls.exhaustive_two_opt(deadline) {
            break;
        }
    }

    let improved = Tour::from_order(ls.order, points)?;
    // Float noise on zero-gain moves must not make the result longer.
    if improved.length > tour.length {
        return Tour::from_order(tour.order.clone(), points);
    }
    Ok(improved)
}

/// Construction plus improvement. Instances of one or two points come back
/// in index order.
pub fn solve(points: &[Point], params: &TspParams) -> Result<Tour, TspError> {
    params.validate()?;
    match points.len() {
        0..=2 => Tour::from_order((0..points.len()).collect(), points),
        _ => {
            let start = construct_tour(points, params.rng_seed)?;
            improve_tour(&start, points, params)
        }
    }
}

/// Closed polyline through the tour with the first city re-appended.
pub fn tour_to_polyline(tour: &Tour, points: &[Point]) -> Polyline {
    let mut vertices: Vec<Point> = tour.order.iter().map(|&i| points[i]).collect();
    if let Some(&first) = vertices.first() {
        vertices.push(first);
    }
    Polyline {
        vertices,
        closed: true,
    }
}

/// TSPLIB `EUC_2D` instance text.
pub fn to_tsplib(name: &str, points: &[Point]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME: {name}");
    let _ = writeln!(s, "TYPE: TSP");
    let _ = writeln!(s, "DIMENSION: {}", points.len());
    let _ = writeln!(s, "EDGE_WEIGHT_TYPE: EUC_2D");
    let _ = writeln!(s, "NODE_COORD_SECTION");
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{} {} {}", i + 1, p.x, p.y);
    }
    s.push_str("EOF\n");
    s
}

/// Reads the node coordinates of a TSPLIB `EUC_2D` instance.
pub fn parse_tsplib(text: &str) -> Result<Vec<Point>, TspError> {
    let mut in_coords = false;
    let mut dimension = None;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |reason: String| TspError::Parse { line: i + 1, reason };
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err("expected `index x y`".into()));
            }
            let x = fields[1].parse().map_err(|_| err("x is not a number".into()))?;
            let y = fields[2].parse().map_err(|_| err("y is not a number".into()))?;
            points.push(Point::new(x, y));
            continue;
        }
        if line.starts_with("NODE_COORD_SECTION") {
            in_coords = true;
        } else if let Some((key, value)) = line.split_once(':') {
            match key.trim() {
                "TYPE" if value.trim() != "TSP" => return Err(err(format!("unsupported TYPE {}", value.trim()))),
                "EDGE_WEIGHT_TYPE" if value.trim() != "EUC_2D" => {
                    return Err(err(format!("unsupported EDGE_WEIGHT_TYPE {}", value.trim())))
                }
                "DIMENSION" => {
                    dimension = Some(value.trim().parse::<usize>().map_err(|_| err("bad DIMENSION".into()))?)
                }
                _ => {}
            }
        }
    }
    if let Some(d) = dimension {
        if d != points.len() {
            return Err(TspError::Parse {
                line: 0,
                reason: format!("DIMENSION {d} but {} coordinates", points.len()),
            });
        }
    }
    Ok(points)
}
