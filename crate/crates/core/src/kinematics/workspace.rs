use std::fmt::Write as _;

use nalgebra::{DVector, Matrix3, Point3, Rotation3, Unit, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ik, IkParams, KinematicChain, KinematicsError, ToolPose};
use crate::geom::Point;

/// Drawing plane. The pen points against `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Point3<f64>,
    pub normal: Unit<Vector3<f64>>,
}

impl Plane {
    pub fn new(point: Point3<f64>, normal: Vector3<f64>) -> Result<Self, KinematicsError> {
        let normal = Unit::try_new(normal, 1e-12)
            .ok_or_else(|| KinematicsError::InvalidParams("plane normal must be non-zero".into()))?;
        Ok(Self { point, normal })
    }

    /// In-plane axes (u, v) with u × v = normal. u is the world x axis
    /// projected into the plane, or world y when x is nearly normal.
    pub fn axes(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal.into_inner();
        let project = |a: Vector3<f64>| (a - n * n.dot(&a)).try_normalize(1e-6);
        let u = project(Vector3::x())
            .or_else(|| project(Vector3::y()))
            .expect("some world axis is not normal to the plane");
        (u, n.cross(&u))
    }

    /// Pen-down orientation: tool x = u, tool y = -v, tool z = -normal.
    pub fn pen_orientation(&self) -> UnitQuaternion<f64> {
        let (u, v) = self.axes();
        let m = Matrix3::from_columns(&[u, -v, -self.normal.into_inner()]);
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        (p - self.point).dot(&self.normal)
    }
}

/// Regular 3D lattice `origin + step * (i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub origin: [f64; 3],
    pub step: f64,
    pub counts: [usize; 3],
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.step > 0.0 && self.step.is_finite()) || self.counts.contains(&0) {
            return Err(KinematicsError::InvalidParams(format!(
                "lattice needs a positive step and non-zero counts (step {}, counts {:?})",
                self.step, self.counts
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice point at flat index `idx` (x fastest, then y, then z).
    pub fn point(&self, idx: usize) -> Point3<f64> {
        let [nx, ny, _] = self.counts;
        let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
        Point3::new(
            self.origin[0] + self.step * i as f64,
            self.origin[1] + self.step * j as f64,
            self.origin[2] + self.step * k as f64,
        )
    }

    /// Square in-plane lattice of half-width `half_extent` around the plane
    /// point, one layer thick. Requires an axis-aligned plane normal.
    pub fn around_plane(plane: &Plane, half_extent: f64, step: f64) -> Result<Self, KinematicsError> {
        let n = plane.normal.into_inner();
        let Some(axis) = (0..3).find(|&a| (n[a].abs() - 1.0).abs() < 1e-12) else {
            return Err(KinematicsError::InvalidParams(
                "planar lattices need an axis-aligned plane normal".into(),
            ));
        };
        let cells = (half_extent / step).ceil() as usize;
        let mut origin = [0.0; 3];
        let mut counts = [1; 3];
        for a in 0..3 {
            if a == axis {
                origin[a] = plane.point[a];
            } else {
                origin[a] = plane.point[a] - cells as f64 * step;
                counts[a] = 2 * cells + 1;
            }
        }
        let lattice = Self { origin, step, counts };
        lattice.validate()?;
        Ok(lattice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityMap {
    pub lattice: LatticeSpec,
    pub orientation: UnitQuaternion<f64>,
    pub reachable: Vec<bool>,
}

impl ReachabilityMap {
    pub fn reachable_points(&self) -> Vec<Point3<f64>> {
        self.reachable
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| self.lattice.point(i))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.reachable.iter().filter(|&&r| r).count()
    }

    /// Points reachable in both maps (dual-arm mode).
    pub fn intersect(&self, other: &ReachabilityMap) -> Result<ReachabilityMap, KinematicsError> {
        if self.lattice != other.lattice {
            return Err(KinematicsError::LatticeMismatch);
        }
        Ok(ReachabilityMap {
            lattice: self.lattice,
            orientation: self.orientation,
            reachable: self.reachable.iter().zip(&other.reachable).map(|(&a, &b)| a && b).collect(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z\n");
        for p in self.reachable_points() {
            let _ = writeln!(out, "{},{},{}", p.x, p.y, p.z);
        }
        out
    }
}

/// Marks every lattice point where IK with the fixed `orientation` succeeds.
///
/// Rows along x are solved in parallel; within a row each point is seeded
/// from the previous point's solution when it had one, then from home and
/// from home turned toward the point.
pub fn reachability_map(
    chain: &KinematicChain,
    lattice: &LatticeSpec,
    orientation: &UnitQuaternion<f64>,
    params: &IkParams,
) -> Result<ReachabilityMap, KinematicsError> {
    lattice.validate()?;
    params.validate()?;
    let nx = lattice.counts[0];
    let shoulder = chain.shoulder();
    let bound = chain.reach_bound() + params.position_tol;
    let mut reachable = vec![false; lattice.len()];
    reachable.par_chunks_mut(nx).enumerate().try_for_each(|(row, out)| {
        let mut prev: Option<DVector<f64>> = None;
        for (i, slot) in out.iter_mut().enumerate() {
            let p = lattice.point(row * nx + i);
            if (p - shoulder).norm() > bound {
                prev = None;
                continue;
            }
            let target = ToolPose::new(p, *orientation);
            let mut solved = None;
            let aimed = chain.aimed_seeds(&p);
            for seed in prev.iter().chain(std::iter::once(&chain.home)).chain(&aimed) {
                if let Some(q) = ik(chain, &target, seed, params)?.solution() {
                    solved = Some(q.clone());
                    break;
                }
            }
            *slot = solved.is_some();
            prev = solved;
        }
        Ok::<_, KinematicsError>(())
    })?;
    Ok(ReachabilityMap {
        lattice: *lattice,
        orientation: *orientation,
        reachable,
    })
}

/// Axis-aligned drawing sub-rectangle and the base displacement that
/// centers the arm's canvas on it. Coordinates are canvas-local mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tile {
    pub center: Point,
    pub width: f64,
    pub height: f64,
    pub base_offset: Point,
}

impl Tile {
    pub fn contains(&self, p: Point) -> bool {
        (p.x - self.center.x).abs() <= self.width / 2.0 && (p.y - self.center.y).abs() <= self.height / 2.0
    }
}

/// Rectangle on the drawing plane. Canvas-local coordinates are mm along
/// the plane axes from `center`, y pointing along v.
#[derive(Debug, Clone, PartialEq)]
pub struct CanvasSpec {
    pub plane: Plane,
    pub center: Point3<f64>,
    pub width: f64,
    pub height: f64,
    pub tiles: Vec<Tile>,
}

impl CanvasSpec {
    pub fn new(plane: Plane, center: Point3<f64>, width: f64, height: f64) -> Result<Self, KinematicsError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(KinematicsError::InvalidParams(format!(
                "canvas needs positive width and height (got {width} × {height})"
            )));
        }
        Ok(Self {
            plane,
            center: center - plane.normal.into_inner() * plane.signed_distance(&center),
            width,
            height,
            tiles: Vec::new(),
        })
    }

    pub fn to_world(&self, local: Point) -> Point3<f64> {
        let (u, v) = self.plane.axes();
        self.center + u * local.x + v * local.y
    }

    pub fn pose_at(&self, local: Point) -> ToolPose {
        ToolPose::new(self.to_world(local), self.plane.pen_orientation())
    }

    /// Tiles of the drawing, or the canvas itself when untiled.
    pub fn effective_tiles(&self) -> Vec<Tile> {
        if self.tiles.is_empty() {
            vec![Tile {
                center: Point::default(),
                width: self.width,
                height: self.height,
                base_offset: Point::default(),
            }]
        } else {
            self.tiles.clone()
        }
    }

    pub fn corners(&self) -> [Point3<f64>; 4] {
        let (w, h) = (self.width / 2.0, self.height / 2.0);
        [(-w, -h), (w, -h), (w, h), (-w, h)].map(|(x, y)| self.to_world(Point::new(x, y)))
    }
}

struct Coverage {
    min: Point,
    step: f64,
    cols: usize,
    rows: usize,
    cells: Vec<bool>,
}

impl Coverage {
    fn new(points: &[Point], step: f64) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min = Point::new(min.x.min(p.x), min.y.min(p.y));
            max = Point::new(max.x.max(p.x), max.y.max(p.y));
        }
        let cols = ((max.x - min.x) / step).round() as usize + 1;
        let rows = ((max.y - min.y) / step).round() as usize + 1;
        let mut cells = vec![false; cols * rows];
        for p in points {
            let c = ((p.x - min.x) / step).round() as usize;
            let r = ((p.y - min.y) / step).round() as usize;
            cells[r * cols + c] = true;
        }
        Self {
            min,
            step,
            cols,
            rows,
            cells,
        }
    }

    /// Whether a reachable point lies within half a step (L∞) of `p`.
    fn covered(&self, p: Point) -> bool {
        let c = ((p.x - self.min.x) / self.step).round();
        let r = ((p.y - self.min.y) / self.step).round();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return false;
        }
        self.cells[r as usize * self.cols + c as usize]
    }

    fn rect_covered(&self, center: Point, w: f64, h: f64) -> bool {
        let nx = (w / self.step).ceil().max(1.0) as usize;
        let ny = (h / self.step).ceil().max(1.0) as usize;
        let at = |i: usize, j: usize| {
            Point::new(
                center.x - w / 2.0 + w * i as f64 / nx as f64,
                center.y - h / 2.0 + h * j as f64 / ny as f64,
            )
        };
        // Boundary first: it fails first for most oversized rectangles.
        let boundary = (0..=nx).all(|i| self.covered(at(i, 0)) && self.covered(at(i, ny)))
            && (0..=ny).all(|j| self.covered(at(0, j)) && self.covered(at(nx, j)));
        boundary && (1..nx).all(|i| (1..ny).all(|j| self.covered(at(i, j))))
    }

    /// Largest height (width = aspect × height) centered at `center`.
    fn max_height(&self, center: Point, aspect: f64, limit: f64) -> f64 {
        if !self.covered(center) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, limit);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.rect_covered(center, aspect * mid, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < self.step * 1e-3 {
                break;
            }
        }
        lo
    }
}

/// Largest rectangle of the given aspect (width / height) on `plane` whose
/// samples at lattice resolution all lie within half a step of a reachable
/// point. Only points within half a step of the plane are considered.
pub fn fit_canvas(
    reachable: &[Point3<f64>],
    step: f64,
    plane: &Plane,
    aspect: f64,
) -> Result<CanvasSpec, KinematicsError> {
    if !(step > 0.0 && aspect > 0.0 && aspect.is_finite()) {
        return Err(KinematicsError::InvalidParams(format!(
            "fit_canvas needs positive step and aspect (got {step}, {aspect})"
        )));
    }
    let (u, v) = plane.axes();
    let in_plane: Vec<Point> = reachable
        .iter()
        .filter(|p| plane.signed_distance(p).abs() <= step / 2.0 + 1e-9)
        .map(|p| {
            let d = p - plane.point;
            Point::new(d.dot(&u), d.dot(&v))
        })
        .collect();
    if in_plane.is_empty() {
        return Err(KinematicsError::CanvasInfeasible);
    }
    let cover = Coverage::new(&in_plane, step);
    let extent = (cover.cols.max(cover.rows) + 1) as f64 * step;
    let limit = extent / aspect.max(1.0);

    let n = in_plane.len() as f64;
    let centroid = in_plane.iter().fold(Point::default(), |a, &p| a + p * (1.0 / n));
    let mut candidates = vec![centroid];
    let stride = (in_plane.len() / 64).max(1);
    candidates.extend(in_plane.iter().step_by(stride).copied());

    let mut best = (0.0, centroid);
    for c in candidates {
        let h = cover.max_height(c, aspect, limit);
        if h > best.0 {
            best = (h, c);
        }
    }
    let mut delta = extent / 8.0;
    while delta >= step / 8.0 {
        let mut moved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let c = best.1 + Point::new(dx, dy) * delta;
            let h = cover.max_height(c, aspect, limit);
            if h > best.0 {
                best = (h, c);
                moved = true;
            }
        }
        if !moved {
            delta /= 2.0;
        }
    }
    let (height, c) = best;
    if height <= 0.0 {
        return Err(KinematicsError::CanvasInfeasible);
    }
    CanvasSpec::new(*plane, plane.point + u * c.x + v * c.y, aspect * height, height)
}

/// Splits a drawing of `width × height` mm, centered on the canvas, into a
/// grid of canvas-sized tiles.
pub fn tile_canvas(width: f64, height: f64, canvas: &CanvasSpec) -> Result<CanvasSpec, KinematicsError> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(KinematicsError::InvalidParams(format!(
            "drawing extent must be positive (got {width} × {height})"
        )));
    }
    let (cw, ch) = (canvas.width, canvas.height);
    if !(cw > 0.0 && ch > 0.0) {
        return Err(KinematicsError::InvalidParams("canvas rectangle is degenerate".into()));
    }
    // Tolerate rounding so an exact multiple does not gain a sliver tile.
    let nx = ((width / cw) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((height / ch) - 1e-9).ceil().max(1.0) as usize;
    let mut tiles = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = Point::new(
                (i as f64 + 0.5 - nx as f64 / 2.0) * cw,
                (ny as f64 / 2.0 - j as f64 - 0.5) * ch,
            );
            tiles.push(Tile {
                center: c,
                width: cw,
                height: ch,
                base_offset: c,
            });
        }
    }
    Ok(CanvasSpec {
        tiles,
        ..canvas.clone()
    })
}

/// Uniform image-to-canvas similarity: centered, aspect preserved and the
/// image y axis flipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageFrame {
    pub scale: f64,
    pub image_center: Point,
}

impl ImageFrame {
    pub fn fit(image_width: f64, image_height: f64, rect_width: f64, rect_height: f64) -> Self {
        Self {
            scale: (rect_width / image_width).min(rect_height / image_height),
            image_center: Point::new(image_width / 2.0, image_height / 2.0),
        }
    }

    pub fn to_canvas(&self, p: Point) -> Point {
        Point::new(
            (p.x - self.image_center.x) * self.scale,
            (self.image_center.y - p.y) * self.scale,
        )
    }
}

/// Maps image points onto the canvas rectangle with the pen against the
/// plane normal.
pub fn project_to_canvas(points: &[Point], image_size: (f64, f64), canvas: &CanvasSpec) -> Vec<ToolPose> {
    let frame = ImageFrame::fit(image_size.0, image_size.1, canvas.width, canvas.height);
    points.iter().map(|&p| canvas.pose_at(frame.to_canvas(p))).collect()
}

/// Parameter range of segment `a → b` inside the rectangle (Liang-Barsky).
fn clip_segment(a: Point, b: Point, min: Point, max: Point) -> Option<(f64, f64)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for (p, q) in [
        (-d.x, a.x - min.x),
        (d.x, max.x - a.x),
        (-d.y, a.y - min.y),
        (d.y, max.y - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 < t1).then_some((t0, t1))
}

/// Clips canvas-local strokes at tile boundaries. Returns, per tile, the
/// pieces falling inside it in tile-local coordinates.
pub fn clip_to_tiles(strokes: &[Vec<Point>], tiles: &[Tile]) -> Vec<Vec<Vec<Point>>> {
    tiles
        .iter()
        .map(|tile| {
            let half = Point::new(tile.width / 2.0, tile.height / 2.0);
            let (min, max) = (tile.center - half, tile.center + half);
            let mut pieces = Vec::new();
            for stroke in strokes {
                if stroke.len() == 1 && tile.contains(stroke[0]) {
                    pieces.push(vec![stroke[0] - tile.center]);
                    continue;
                }
                let mut cur: Vec<Point> = Vec::new();
                for w in stroke.windows(2) {
                    match clip_segment(w[0], w[1], min, max) {
                        Some((t0, t1)) => {
                            if cur.is_empty() {
                                cur.push(w[0].lerp(w[1], t0) - tile.center);
                            }
                            cur.push(w[0].lerp(w[1], t1) - tile.center);
                            if t1 < 1.0 {
                                pieces.push(std::mem::take(&mut cur));
                            }
                        }
                        None => {
                            if !cur.is_empty() {
                                pieces.push(std::mem::take(&mut cur));
                            }
                        }
                    }
                }
                if !cur.is_empty() {
                    pieces.push(cur);
                }
            }
            pieces.retain(|p: &Vec<Point>| !p.is_empty());
            pieces
        })
        .collect()
}
