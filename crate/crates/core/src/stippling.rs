//! Density-driven point placement.
//!
//! Both methods work on the discretized Voronoi diagram: every pixel center
//! belongs to its nearest stipple and cells accumulate ink-weighted moments
//! over their pixels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, SpatialGrid};
use crate::imaging::DensityField;

/// Stipples closer than this are merged into their midpoint.
pub const MIN_SEPARATION: f64 = 0.5;

/// Relaxation stops once the mean point displacement drops below this (px).
pub const CONVERGED_DISPLACEMENT: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum StippleError {
    #[error("empty point set")]
    EmptyPointSet,
    #[error("no ink mass")]
    NoInkMass,
    #[error("invalid stipple parameters: {0}")]
    InvalidParams(String),
    #[error("malformed stipple csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StippleMethod {
    Lbg,
    Voronoi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StippleParams {
    pub target_count: usize,
    pub method: StippleMethod,
    pub max_iterations: usize,
    pub split_upper: f64,
    pub merge_lower: f64,
    pub rng_seed: u64,
}

impl Default for StippleParams {
    fn default() -> Self {
        Self {
            target_count: 2000,
            method: StippleMethod::Lbg,
            max_iterations: 50,
            split_upper: 1.5,
            merge_lower: 0.5,
            rng_seed: 0,
        }
    }
}

impl StippleParams {
    pub fn validate(&self) -> Result<(), StippleError> {
        if !(self.merge_lower > 0.0 && self.merge_lower < self.split_upper) {
            return Err(StippleError::InvalidParams(format!(
                "need 0 < merge_lower ({}) < split_upper ({})",
                self.merge_lower, self.split_upper
            )));
        }
        if !self.split_upper.is_finite() {
            return Err(StippleError::InvalidParams("split_upper must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StippleSet {
    pub points: Vec<Point>,
    pub channel_index: usize,
    pub seed: u64,
}

impl StippleSet {
    pub fn new(points: Vec<Point>, channel_index: usize, seed: u64) -> Self {
        Self {
            points,
            channel_index,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x,y` per line after a header; full float precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y\n");
        for p in &self.points {
            s.push_str(&format!("{},{}\n", p.x, p.y));
        }
        s
    }

    pub fn parse_csv(text: &str, channel_index: usize, seed: u64) -> Result<Self, StippleError> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line == "x,y") {
                continue;
            }
            let err = |reason: &str| StippleError::Csv {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (x, y) = line.split_once(',').ok_or_else(|| err("expected two fields `x,y`"))?;
            let x: f64 = x.trim().parse().map_err(|_| err("field x is not a number"))?;
            let y: f64 = y.trim().parse().map_err(|_| err("field y is not a number"))?;
            if !(x.is_finite() && y.is_finite()) {
                return Err(err("non-finite coordinate"));
            }
            points.push(Point::new(x, y));
        }
        Ok(Self::new(points, channel_index, seed))
    }
}

fn pixel_center(i: usize, width: usize) -> Point {
    Point::new((i % width) as f64 + 0.5, (i / width) as f64 + 0.5)
}

/// Nearest-stipple label for every pixel center (row-major).
pub fn voronoi_assign(points: &[Point], field: &DensityField) -> Result<Vec<u32>, StippleError> {
    if points.is_empty() {
        return Err(StippleError::EmptyPointSet);
    }
    let grid = SpatialGrid::new(points, 2.0);
    let width = field.width;
    let mut labels = vec![0u32; width * field.height];
    labels.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, label) in row.iter_mut().enumerate() {
            let q = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            *label = grid.nearest(points, q).unwrap_or(0) as u32;
        }
    });
    Ok(labels)
}

/// Ink-weighted first and second moments of one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellMoments {
    pub weight: f64,
    pub sx: f64,
    pub sy: f64,
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
}

impl CellMoments {
    fn add(&mut self, p: Point, w: f64) {
        self.weight += w;
        self.sx += w * p.x;
        self.sy += w * p.y;
        self.sxx += w * p.x * p.x;
        self.sxy += w * p.x * p.y;
        self.syy += w * p.y * p.y;
    }

    pub fn centroid(&self) -> Option<Point> {
        (self.weight > 0.0).then(|| Point::new(self.sx / self.weight, self.sy / self.weight))
    }

    /// Principal axis direction and its variance.
    pub fn principal_axis(&self) -> Option<(Point, f64)> {
        let c = self.centroid()?;
        let a = (self.sxx / self.weight - c.x * c.x).max(0.0);
        let b = self.sxy / self.weight - c.x * c.y;
        let d = (self.syy / self.weight - c.y * c.y).max(0.0);
        let half_gap = (((a - d) * 0.5).powi(2) + b * b).sqrt();
        let lambda = (a + d) * 0.5 + half_gap;
        let axis = if b.abs() > 1e-12 {
            Point::new(lambda - d, b).normalized()?
        } else if a >= d {
            Point::new(1.0, 0.0)
        } else {
            Point::new(0.0, 1.0)
        };
        Some((axis, lambda))
    }
}

pub fn cell_moments(points: &[Point], field: &DensityField, labels: &[u32]) -> Vec<CellMoments> {
    let width = field.width;
    let n = points.len();
    labels
        .par_chunks(width * 16)
        .enumerate()
        .fold(
            || vec![CellMoments::default(); n],
            |mut acc, (chunk, ls)| {
                let base = chunk * width * 16;
                for (j, &l) in ls.iter().enumerate() {
                    let w = field.values[base + j];
                    if w > 0.0 {
                        acc[l as usize].add(pixel_center(base + j, width), w);
                    }
                }
                acc
            },
        )
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![CellMoments::default(); n], |mut acc, part| {
            for (a, p) in acc.iter_mut().zip(part) {
                a.weight += p.weight;
                a.sx += p.sx;
                a.sy += p.sy;
                a.sxx += p.sxx;
                a.sxy += p.sxy;
                a.syy += p.syy;
            }
            acc
        })
}

/// Weighted quantization energy Σ w·‖px − owner(px)‖².
pub fn quantization_energy(points: &[Point], field: &DensityField) -> Result<f64, StippleError> {
    let labels = voronoi_assign(points, field)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &l)| field.values[i] * pixel_center(i, field.width).distance_sq(points[l as usize]))
        .sum())
}

/// One Lloyd step: every stipple moves to its cell's weighted centroid and
/// stipples with zero cell weight are dropped.
pub fn relax_step(set: &StippleSet, field: &DensityField) -> Result<StippleSet, StippleError> {
    let labels = voronoi_assign(&set.points, field)?;
    let moments = cell_moments(&set.points, field, &labels);
    let points = moments.iter().filter_map(CellMoments::centroid).collect();
    Ok(StippleSet::new(points, set.channel_index, set.seed))
}

fn field_centroid(field: &DensityField) -> Option<Point> {
    let mut m = CellMoments::default();
    for (i, &w) in field.values.iter().enumerate() {
        if w > 0.0 {
            m.add(pixel_center(i, field.width), w);
        }
    }
    m.centroid()
}

fn clamp_to_field(p: Point, field: &DensityField) -> Point {
    Point::new(
        p.x.clamp(0.5, field.width as f64 - 0.5),
        p.y.clamp(0.5, field.height as f64 - 0.5),
    )
}

/// Merges stipples closer than [`MIN_SEPARATION`] into their midpoint until
/// no such pair remains. Survivor order follows the lower index.
pub fn enforce_min_separation(points: Vec<Point>) -> Vec<Point> {
    let mut points = points;
    loop {
        if points.len() < 2 {
            return points;
        }
        let grid = SpatialGrid::new(&points, 2.0);
        let mut gone = vec![false; points.len()];
        let mut merged = false;
        for i in 0..points.len() {
            if gone[i] {
                continue;
            }
            let near = grid.k_nearest(&points, points[i], 1, Some(i));
            if let Some(&j) = near.first() {
                if !gone[j] && points[i].distance(points[j]) < MIN_SEPARATION {
                    points[i] = points[i].lerp(points[j], 0.5);
                    gone[j] = true;
                    merged = true;
                }
            }
        }
        if !merged {
            return points;
        }
        points = points
            .into_iter()
            .zip(gone)
            .filter_map(|(p, g)| (!g).then_some(p))
            .collect();
    }
}

/// Split/merge stippling grown from a single stipple at the field's
/// weighted centroid.
pub fn lbg_stipple(field: &DensityField, params: &StippleParams) -> Result<StippleSet, StippleError> {
    params.validate()?;
    let channel = field.channel_index;
    let total = field.total_ink();
    let Some(start) = field_centroid(field) else {
        return Ok(StippleSet::new(Vec::new(), channel, params.rng_seed));
    };
    if params.target_count == 0 {
        return Ok(StippleSet::new(Vec::new(), channel, params.rng_seed));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    // Unit ink per stipple when the target count is met.
    let ink_scale = params.target_count as f64 / total;
    let mut points = vec![start];

    for _ in 0..params.max_iterations {
        let labels = voronoi_assign(&points, field)?;
        let moments = cell_moments(&points, field, &labels);
        let mut next = Vec::with_capacity(points.len() * 2);
        let mut changed = false;
        for m in &moments {
            let ink = m.weight * ink_scale;
            if ink < params.merge_lower {
                changed = true;
                continue;
            }
            let Some(c) = m.centroid() else { continue };
            if ink > params.split_upper {
                let (mut axis, variance) = m.principal_axis().unwrap_or((Point::new(1.0, 0.0), 0.0));
                let (a, d) = (m.sxx / m.weight - c.x * c.x, m.syy / m.weight - c.y * c.y);
                if (a - d).abs() < 1e-9 * (a + d).max(1e-12) && (m.sxy / m.weight - c.x * c.y).abs() < 1e-12 {
                    // Isotropic cell: no preferred axis, pick one from the seed.
                    let theta = rng.random_range(0.0..std::f64::consts::PI);
                    axis = Point::new(theta.cos(), theta.sin());
                }
                // Half the principal radius (2σ), floored so the halves stay apart.
                let eps = variance.sqrt().max(MIN_SEPARATION * 0.6);
                next.push(clamp_to_field(c + axis * eps, field));
                next.push(clamp_to_field(c - axis * eps, field));
                changed = true;
            } else {
                next.push(c);
            }
        }
        points = enforce_min_separation(next);
        if points.is_empty() || !changed {
            break;
        }
    }
    Ok(StippleSet::new(points, channel, params.rng_seed))
}

/// Density-proportional rejection sampling followed by Lloyd relaxation.
pub fn voronoi_stipple(field: &DensityField, params: &StippleParams) -> Result<StippleSet, StippleError> {
    params.validate()?;
    if params.target_count == 0 {
        return Err(StippleError::InvalidParams("target_count must be at least 1".into()));
    }
    let peak = field.values.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(StippleError::NoInkMass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let (w, h) = (field.width as f64, field.height as f64);
    let mut points = Vec::with_capacity(params.target_count);
    while points.len() < params.target_count {
        let p = Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
        let d = field.density_at(p).unwrap_or(0.0);
        if rng.random::<f64>() * peak < d {
            points.push(p);
        }
    }
    let mut set = StippleSet::new(points, field.channel_index, params.rng_seed);
    for _ in 0..params.max_iterations {
        let next = relax_step(&set, field)?;
        let moved = if next.len() == set.len() {
            set.points
                .iter()
                .zip(&next.points)
                .map(|(a, b)| a.distance(*b))
                .sum::<f64>()
                / next.len().max(1) as f64
        } else {
            f64::INFINITY
        };
        set = next;
        if set.is_empty() || moved < CONVERGED_DISPLACEMENT {
            break;
        }
    }
    set.points = enforce_min_separation(set.points);
    Ok(set)
}

/// Dispatches on `params.method`. An all-zero field yields an empty set.
pub fn stipple(field: &DensityField, params: &StippleParams) -> Result<StippleSet, StippleError> {
    match params.method {
        StippleMethod::Lbg => lbg_stipple(field, params),
        StippleMethod::Voronoi => match voronoi_stipple(field, params) {
            Err(StippleError::NoInkMass) => Ok(StippleSet::new(Vec::new(), field.channel_index, params.rng_seed)),
            Err(StippleError::InvalidParams(_)) if params.target_count == 0 => {
                Ok(StippleSet::new(Vec::new(), field.channel_index, params.rng_seed))
            }
            other => other,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::BLACK;

    fn uniform(w: usize, h: usize, v: f64) -> DensityField {
        DensityField::new(w, h, vec![v; w * h], BLACK, 0).unwrap()
    }

    fn brute_labels(points: &[Point], w: usize, h: usize) -> Vec<u32> {
        (0..w * h)
            .map(|i| {
                let q = pixel_center(i, w);
                let mut best = (f64::INFINITY, 0u32);
                for (j, p) in points.iter().enumerate() {
                    let d = p.distance_sq(q);
                    if d < best.0 {
                        best = (d, j as u32);
                    }
                }
                best.1
            })
            .collect()
    }

    #[test]
    fn assign_single_point() {
        let f = uniform(8, 5, 1.0);
        let labels = voronoi_assign(&[Point::new(3.0, 3.0)], &f).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
        assert_eq!(voronoi_assign(&[], &f), Err(StippleError::EmptyPointSet));
    }

    #[test]
    fn assign_bisector() {
        let f = uniform(8, 4, 1.0);
        let labels = voronoi_assign(&[Point::new(0.0, 2.0), Point::new(8.0, 2.0)], &f).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            assert_eq!(l, if i % 8 < 4 { 0 } else { 1 });
        }
    }

    #[test]
    fn assign_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = uniform(64, 64, 1.0);
        for _ in 0..5 {
            let pts: Vec<Point> = (0..10)
                .map(|_| Point::new(rng.random_range(0.0..64.0), rng.random_range(0.0..64.0)))
                .collect();
            assert_eq!(voronoi_assign(&pts, &f).unwrap(), brute_labels(&pts, 64, 64));
        }
    }

    #[test]
    fn relax_single_point_to_center() {
        let f = uniform(10, 6, 0.7);
        let out = relax_step(&StippleSet::new(vec![Point::new(1.0, 1.0)], 0, 0), &f).unwrap();
        assert!(out.points[0].distance(Point::new(5.0, 3.0)) < 1e-12);
    }

    #[test]
    fn relax_keeps_symmetry() {
        let f = DensityField::from_fn(20, 10, |x, _| if x < 10.0 { 1.0 - x / 20.0 } else { x / 20.0 });
        let set = StippleSet::new(vec![Point::new(4.0, 5.0), Point::new(16.0, 5.0)], 0, 0);
        let out = relax_step(&set, &f).unwrap();
        let (a, b) = (out.points[0], out.points[1]);
        assert!((a.x + b.x - 20.0).abs() < 1e-9);
        assert!((a.y - b.y).abs() < 1e-9);
    }

    #[test]
    fn relax_drops_empty_cells() {
        let f = DensityField::from_fn(20, 4, |x, _| if x < 10.0 { 1.0 } else { 0.0 });
        let set = StippleSet::new(vec![Point::new(2.0, 2.0), Point::new(18.0, 2.0), Point::new(5.0, 2.0)], 0, 0);
        let out = relax_step(&set, &f).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.points[0].x < out.points[1].x);
    }

    #[test]
    fn relax_never_increases_energy() {
        let f = DensityField::from_fn(48, 48, |x, y| 0.2 + 0.8 * ((x * 0.1).sin() * (y * 0.13).cos()).abs());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut set = StippleSet::new(
            (0..40)
                .map(|_| Point::new(rng.random_range(0.0..48.0), rng.random_range(0.0..48.0)))
                .collect(),
            0,
            0,
        );
        let mut e = quantization_energy(&set.points, &f).unwrap();
        for _ in 0..10 {
            set = relax_step(&set, &f).unwrap();
            let e2 = quantization_energy(&set.points, &f).unwrap();
            assert!(e2 <= e * (1.0 + 1e-12), "{e2} > {e}");
            e = e2;
        }
    }

    #[test]
    fn relaxed_points_stay_in_their_cells() {
        let f = DensityField::from_fn(32, 32, |x, y| (x + y) / 64.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let set = StippleSet::new(
            (0..12)
                .map(|_| Point::new(rng.random_range(0.0..32.0), rng.random_range(0.0..32.0)))
                .collect(),
            0,
            0,
        );
        let labels = voronoi_assign(&set.points, &f).unwrap();
        let out = relax_step(&set, &f).unwrap();
        assert_eq!(out.len(), set.len());
        // The bounding box of a cell's pixel centers contains its hull.
        for (k, p) in out.points.iter().enumerate() {
            let cells: Vec<Point> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l as usize == k)
                .map(|(i, _)| pixel_center(i, 32))
                .collect();
            let minx = cells.iter().map(|c| c.x).fold(f64::MAX, f64::min);
            let maxx = cells.iter().map(|c| c.x).fold(f64::MIN, f64::max);
            let miny = cells.iter().map(|c| c.y).fold(f64::MAX, f64::min);
            let maxy = cells.iter().map(|c| c.y).fold(f64::MIN, f64::max);
            assert!(p.x >= minx - 1e-9 && p.x <= maxx + 1e-9 && p.y >= miny - 1e-9 && p.y <= maxy + 1e-9);
        }
    }

    #[test]
    fn lbg_white_field_is_empty() {
        let out = lbg_stipple(&uniform(16, 16, 0.0), &StippleParams::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn lbg_half_black_field() {
        let f = DensityField::from_fn(64, 64, |x, _| if x < 32.0 { 1.0 } else { 0.0 });
        let params = StippleParams {
            target_count: 300,
            ..StippleParams::default()
        };
        let out = lbg_stipple(&f, &params).unwrap();
        let left = out.points.iter().filter(|p| p.x < 32.0).count();
        assert!(left as f64 >= 0.95 * out.len() as f64);
    }

    #[test]
    fn params_validation() {
        let bad = StippleParams {
            merge_lower: 2.0,
            ..StippleParams::default()
        };
        assert!(matches!(lbg_stipple(&uniform(4, 4, 1.0), &bad), Err(StippleError::InvalidParams(_))));
    }

    #[test]
    fn voronoi_single_point_lands_on_centroid() {
        let params = StippleParams {
            target_count: 1,
            method: StippleMethod::Voronoi,
            max_iterations: 5,
            ..StippleParams::default()
        };
        let out = voronoi_stipple(&uniform(12, 8, 1.0), &params).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out.points[0].distance(Point::new(6.0, 4.0)) < 1e-9);
    }

    #[test]
    fn voronoi_gradient_density() {
        let f = DensityField::from_fn(64, 64, |x, _| x / 64.0);
        let params = StippleParams {
            target_count: 100,
            method: StippleMethod::Voronoi,
            max_iterations: 20,
            rng_seed: 3,
            ..StippleParams::default()
        };
        let out = voronoi_stipple(&f, &params).unwrap();
        let dark = out.points.iter().filter(|p| p.x >= 48.0).count();
        let light = out.points.iter().filter(|p| p.x < 16.0).count();
        assert!(dark > light, "dark {dark} light {light}");
        assert_eq!(out, voronoi_stipple(&f, &params).unwrap());
    }

    #[test]
    fn voronoi_no_ink_errors() {
        let params = StippleParams {
            method: StippleMethod::Voronoi,
            ..StippleParams::default()
        };
        assert_eq!(voronoi_stipple(&uniform(4, 4, 0.0), &params), Err(StippleError::NoInkMass));
        assert!(stipple(&uniform(4, 4, 0.0), &params).unwrap().is_empty());
    }

    #[test]
    fn separation_merges_close_pairs() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(0.2, 0.0), Point::new(5.0, 5.0)];
        let out = enforce_min_separation(pts);
        assert_eq!(out, vec![Point::new(0.1, 0.0), Point::new(5.0, 5.0)]);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let set = StippleSet::new(vec![Point::new(1.25, 3.0), Point::new(0.1, 7.333333333333333)], 2, 9);
        assert_eq!(StippleSet::parse_csv(&set.to_csv(), 2, 9).unwrap(), set);
        let err = StippleSet::parse_csv("x,y\n1,2\n3;4\n", 0, 0).unwrap_err();
        assert_eq!(
            err,
            StippleError::Csv {
                line: 3,
                reason: "expected two fields `x,y`".into()
            }
        );
    }
}
