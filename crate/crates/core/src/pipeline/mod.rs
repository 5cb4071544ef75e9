//! End-to-end orchestration: split → stipple → tour → optimize → plan →
//! render. Every stage is available on its own, reading the previous
//! stage's dump from the output directory, and [`run_pipeline`] produces
//! the same files in one pass.

mod config;
pub mod dumps;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{path_length, Point};
use crate::imaging::{load_image, split_cmyk, split_kmeans, DensityField, Palette, RasterImage};
use crate::kinematics::{
    clip_to_tiles, fit_canvas, pathwise_ik, reachability_map, tile_canvas, ImageFrame, JointTrajectory,
    KinematicChain, KinematicsError, LatticeSpec, Plane, ReachabilityMap, Stroke,
};
use crate::output::{
    emit_svg, encode_png, parse_key_values, render_preview, ChannelStats, Layer, OutputError, PlotterProgram,
    PreviewSpec, StatsReport, SvgLayout, TileDrawing, ToolPass,
};
use crate::pathopt::{optimize_path, sample_path, PathError, Polyline, SplinePath};
use crate::stippling::{stipple, StippleError, StippleSet};
use crate::tsp::{solve, tour_to_polyline, Tour, TspError};

pub use config::{ChannelOverride, ColorMode, DrawingConfig, PipelineConfig, RobotConfig, SeedStage, CHANNEL_SEED_STRIDE};
use dumps::{ChannelsHeader, Layout};

/// Default drawing width when neither the config nor a robot fixes it.
pub const DEFAULT_DRAWING_WIDTH_MM: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Split,
    Stipple,
    Tour,
    Optimize,
    Plan,
    Render,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Split => "split",
            Stage::Stipple => "stipple",
            Stage::Tour => "tour",
            Stage::Optimize => "optimize",
            Stage::Plan => "plan",
            Stage::Render => "render",
        })
    }
}

/// Whether a failure stems from the inputs (files, config, geometry) or
/// from a broken internal invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Internal,
}

#[derive(Debug, Error)]
#[error("{stage}{}: {message}", channel.map(|c| format!(" (channel {c})")).unwrap_or_default())]
pub struct PipelineError {
    pub stage: Stage,
    pub channel: Option<usize>,
    pub class: ErrorClass,
    pub message: String,
}

impl PipelineError {
    pub fn input(stage: Stage, channel: Option<usize>, message: impl fmt::Display) -> Self {
        Self {
            stage,
            channel,
            class: ErrorClass::Input,
            message: message.to_string(),
        }
    }

    pub fn internal(stage: Stage, channel: Option<usize>, message: impl fmt::Display) -> Self {
        Self {
            stage,
            channel,
            class: ErrorClass::Internal,
            message: message.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn stipple_err(ch: usize) -> impl Fn(StippleError) -> PipelineError {
    move |e| match e {
        StippleError::InvalidParams(_) | StippleError::Csv { .. } => PipelineError::input(Stage::Stipple, Some(ch), e),
        _ => PipelineError::internal(Stage::Stipple, Some(ch), e),
    }
}

fn tsp_err(ch: usize) -> impl Fn(TspError) -> PipelineError {
    move |e| match e {
        TspError::InvalidParams(_) | TspError::TooManyNeighbors { .. } | TspError::Parse { .. } => {
            PipelineError::input(Stage::Tour, Some(ch), e)
        }
        _ => PipelineError::internal(Stage::Tour, Some(ch), e),
    }
}

fn path_err(ch: usize) -> impl Fn(PathError) -> PipelineError {
    move |e| match e {
        PathError::DegenerateHandle | PathError::NotJoined | PathError::OpenClosedPolyline => {
            PipelineError::internal(Stage::Optimize, Some(ch), e)
        }
        _ => PipelineError::input(Stage::Optimize, Some(ch), e),
    }
}

fn kin_err(e: KinematicsError) -> PipelineError {
    match e {
        KinematicsError::JointCount { .. } | KinematicsError::OutOfLimits { .. } | KinematicsError::LatticeMismatch => {
            PipelineError::internal(Stage::Plan, None, e)
        }
        _ => PipelineError::input(Stage::Plan, None, e),
    }
}

fn out_err(stage: Stage) -> impl Fn(OutputError) -> PipelineError {
    move |e| match e {
        OutputError::SvgParse(_) | OutputError::ProgramParse { .. } | OutputError::StatsParse { .. } => {
            PipelineError::input(stage, None, e)
        }
        _ => PipelineError::internal(stage, None, e),
    }
}

/// Runs `f` for every channel on a pool of `cfg.workers` threads.
fn per_channel<T: Send>(
    cfg: &PipelineConfig,
    stage: Stage,
    n: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::internal(stage, None, e))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

/// Downscales and separates the image into quantized density fields.
pub fn separate(img: &RasterImage, cfg: &PipelineConfig) -> Result<(ChannelsHeader, Vec<DensityField>)> {
    let img = img.downscale_to(cfg.max_dimension);
    let (palette, mut fields) = match cfg.color {
        ColorMode::Cmyk => (Palette::cmyk(), split_cmyk(&img)),
        ColorMode::Kmeans { k } => {
            split_kmeans(&img, k, cfg.seed).map_err(|e| PipelineError::input(Stage::Split, None, e))?
        }
    };
    // The dumps hold 16 bits per sample; work from exactly what they store.
    fields.iter_mut().for_each(DensityField::quantize_u16);
    let header = ChannelsHeader {
        width: img.width(),
        height: img.height(),
        palette,
    };
    Ok((header, fields))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StippleOutput {
    pub set: StippleSet,
    pub seconds: f64,
}

pub fn stipple_fields(fields: &[DensityField], cfg: &PipelineConfig) -> Result<Vec<StippleOutput>> {
    let inks: Vec<f64> = fields.iter().map(DensityField::total_ink).collect();
    let total: f64 = inks.iter().sum();
    per_channel(cfg, Stage::Stipple, fields.len(), |c| {
        let share = if total > 0.0 { inks[c] / total } else { 0.0 };
        let params = cfg.stipple_params(c, share);
        let (set, seconds) = timed(|| stipple(&fields[c], &params));
        let mut set = set.map_err(stipple_err(c))?;
        set.channel_index = c;
        Ok(StippleOutput { set, seconds })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TourOutput {
    pub tour: Tour,
    pub seconds: f64,
}

pub fn solve_tours(points: &[Vec<Point>], cfg: &PipelineConfig) -> Result<Vec<TourOutput>> {
    per_channel(cfg, Stage::Tour, points.len(), |c| {
        let params = cfg.tsp_params(c);
        let (tour, seconds) = timed(|| solve(&points[c], &params));
        Ok(TourOutput {
            tour: tour.map_err(tsp_err(c))?,
            seconds,
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutput {
    pub path: Option<SplinePath>,
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub handle_scale: f64,
    pub seconds: f64,
}

/// Closed tour, or an open segment for two stipples.
fn tour_polyline(tour: &Tour, points: &[Point]) -> std::result::Result<Polyline, PathError> {
    if tour.len() == 2 {
        Polyline::open(tour.order.iter().map(|&i| points[i]).collect())
    } else {
        let line = tour_to_polyline(tour, points);
        line.validate()?;
        Ok(line)
    }
}

pub fn optimize_tours(points: &[Vec<Point>], tours: &[Tour], cfg: &PipelineConfig) -> Result<Vec<PathOutput>> {
    per_channel(cfg, Stage::Optimize, tours.len(), |c| {
        let (pts, tour) = (&points[c], &tours[c]);
        let start = Instant::now();
        let (path, before, after, scale) = match tour.len() {
            0 => (None, 0, 0, 1.0),
            1 => (Some(SplinePath::dot(pts[tour.order[0]])), 1, 1, 1.0),
            n => {
                let line = tour_polyline(tour, pts).map_err(path_err(c))?;
                let opt = optimize_path(&line, &cfg.pathopt_params(c)).map_err(path_err(c))?;
                (Some(opt.fit.path), n, opt.simplified.distinct_len(), opt.fit.scale)
            }
        };
        Ok(PathOutput {
            path,
            vertices_before: before,
            vertices_after: after,
            handle_scale: scale,
            seconds: start.elapsed().as_secs_f64(),
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub layout: Layout,
    pub program: PlotterProgram,
    pub trajectory: Option<JointTrajectory>,
    pub reachability: Option<ReachabilityMap>,
    /// Pen-down length per channel (mm).
    pub drawing_lengths: Vec<f64>,
    pub seconds: f64,
}

fn drawing_rect(cfg: &PipelineConfig, iw: f64, ih: f64, canvas: Option<(f64, f64)>) -> (f64, f64) {
    match (cfg.drawing.width_mm, cfg.drawing.height_mm) {
        (Some(w), Some(h)) => (w, h),
        (Some(w), None) => (w, w * ih / iw),
        (None, Some(h)) => (h * iw / ih, h),
        (None, None) => canvas.unwrap_or((DEFAULT_DRAWING_WIDTH_MM, DEFAULT_DRAWING_WIDTH_MM * ih / iw)),
    }
}

pub fn load_chain(robot: &RobotConfig) -> Result<KinematicChain> {
    match (&robot.preset, &robot.chain_file) {
        (Some(name), _) => KinematicChain::preset(name).map_err(kin_err),
        (None, Some(path)) => {
            let text = read_text(Stage::Plan, None, path)?;
            KinematicChain::from_toml(&text).map_err(kin_err)
        }
        (None, None) => Err(PipelineError::input(Stage::Plan, None, "robot: no chain configured")),
    }
}

/// Places the drawing, tiles it over the arm's canvas when a robot is
/// configured, and builds the plotter program and joint trajectory.
///
/// Without a robot the program holds drawing mm with the image's top-left
/// origin and y down. With one, each tile's strokes are in tile-local mm
/// on the fitted canvas and `BASE` moves the arm between tiles.
pub fn plan_drawing(
    paths: &[Option<SplinePath>],
    image_size: (usize, usize),
    cfg: &PipelineConfig,
) -> Result<PlanOutput> {
    let start = Instant::now();
    let (iw, ih) = (image_size.0 as f64, image_size.1 as f64);
    let robot = match &cfg.robot {
        Some(r) => {
            let chain = load_chain(r)?;
            let plane =
                Plane::new(Point3::from(r.plane_point), Vector3::from(r.plane_normal)).map_err(kin_err)?;
            let lattice = LatticeSpec::around_plane(&plane, r.half_extent, r.lattice_step).map_err(kin_err)?;
            let map =
                reachability_map(&chain, &lattice, &plane.pen_orientation(), &r.plan.ik).map_err(kin_err)?;
            let mut canvas =
                fit_canvas(&map.reachable_points(), r.lattice_step, &plane, r.tile_aspect).map_err(kin_err)?;
            let inset = 2.0 * r.canvas_margin_steps * r.lattice_step;
            if canvas.width <= inset || canvas.height <= inset {
                return Err(kin_err(KinematicsError::CanvasInfeasible));
            }
            canvas.width -= inset;
            canvas.height -= inset;
            Some((r, chain, map, canvas))
        }
        None => None,
    };
    let (w, h) = drawing_rect(cfg, iw, ih, robot.as_ref().map(|(_, _, _, c)| (c.width, c.height)));
    let frame = ImageFrame::fit(iw, ih, w, h);
    let spacing_px = cfg.drawing.sample_spacing_mm / frame.scale;
    let sampled: Vec<Vec<Point>> = paths
        .iter()
        .map(|p| p.as_ref().map(|p| sample_path(p, spacing_px).vertices).unwrap_or_default())
        .collect();
    let drawing_lengths = sampled.iter().map(|v| path_length(v) * frame.scale).collect();

    let (tiles, trajectory, reachability) = match robot {
        None => {
            let passes = sampled
                .iter()
                .enumerate()
                .map(|(c, v)| ToolPass {
                    tool: c,
                    strokes: if v.is_empty() {
                        Vec::new()
                    } else {
                        vec![v.iter().map(|&p| p * frame.scale).collect()]
                    },
                })
                .collect();
            let tiles = vec![TileDrawing {
                base_offset: Point::default(),
                passes,
            }];
            (tiles, None, None)
        }
        Some((r, chain, map, canvas)) => {
            let canvas = tile_canvas(w, h, &canvas).map_err(kin_err)?;
            let tiles = canvas.effective_tiles();
            let pieces: Vec<Vec<Vec<Vec<Point>>>> = sampled
                .iter()
                .map(|v| {
                    let local: Vec<Point> = v.iter().map(|&p| frame.to_canvas(p)).collect();
                    let strokes = if local.is_empty() { Vec::new() } else { vec![local] };
                    clip_to_tiles(&strokes, &tiles)
                })
                .collect();
            let mut drawings = Vec::with_capacity(tiles.len());
            let mut trajectory = JointTrajectory::default();
            for (t, tile) in tiles.iter().enumerate() {
                let passes: Vec<ToolPass> = pieces
                    .iter()
                    .enumerate()
                    .map(|(c, per_tile)| ToolPass {
                        tool: c,
                        strokes: per_tile[t].clone(),
                    })
                    .collect();
                let strokes: Vec<Stroke> = passes
                    .iter()
                    .flat_map(|pass| {
                        pass.strokes.iter().map(|s| Stroke {
                            poses: s.iter().map(|&p| canvas.pose_at(p)).collect(),
                            tool: pass.tool,
                        })
                    })
                    .collect();
                if !strokes.is_empty() {
                    let traj = pathwise_ik(&chain, &strokes, &chain.home, &r.plan).map_err(|e| {
                        let mut err = kin_err(e);
                        err.message = format!("tile {t}: {}", err.message);
                        err
                    })?;
                    trajectory.append(traj);
                }
                drawings.push(TileDrawing {
                    base_offset: tile.base_offset,
                    passes,
                });
            }
            (drawings, Some(trajectory), Some(map))
        }
    };
    let program = PlotterProgram::build(&tiles).map_err(out_err(Stage::Plan))?;
    Ok(PlanOutput {
        layout: Layout {
            view_width: iw,
            view_height: ih,
            scale: frame.scale,
            tiles: tiles.len(),
        },
        program,
        trajectory,
        reachability,
        drawing_lengths,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub svg: String,
    pub preview_png: Vec<u8>,
}

pub fn render_drawing(
    paths: &[Option<SplinePath>],
    palette: &Palette,
    layout: &Layout,
    cfg: &PipelineConfig,
) -> Result<Rendered> {
    let err = out_err(Stage::Render);
    let channels: Vec<Vec<SplinePath>> = paths.iter().map(|p| p.iter().cloned().collect()).collect();
    let svg = emit_svg(
        &channels,
        palette,
        &SvgLayout {
            view_width: layout.view_width,
            view_height: layout.view_height,
            width_mm: layout.width_mm(),
            height_mm: layout.height_mm(),
            stroke_width_mm: cfg.drawing.stroke_width_mm,
        },
    )
    .map_err(&err)?;
    let width_px = cfg.drawing.preview_width;
    let px_per_mm = width_px as f64 / layout.width_mm();
    let layers: Vec<Layer> = channels
        .iter()
        .zip(palette.colors())
        .map(|(p, &color)| Layer::from_paths(color, p, layout.view_width / width_px as f64))
        .collect();
    let preview = render_preview(
        &layers,
        &PreviewSpec {
            source_width: layout.view_width,
            source_height: layout.view_height,
            width_px,
            stroke_px: cfg.drawing.stroke_width_mm * px_per_mm,
        },
    )
    .map_err(&err)?;
    Ok(Rendered {
        svg,
        preview_png: encode_png(&preview).map_err(&err)?,
    })
}

fn stipple_fragment(out: &[StippleOutput]) -> String {
    let mut s = String::from("# stipple stats\n");
    for (i, o) in out.iter().enumerate() {
        s += &format!("channel.{i}.points = {}\nchannel.{i}.stipple_seconds = {}\n", o.set.len(), o.seconds);
    }
    s
}

fn tour_fragment(out: &[TourOutput]) -> String {
    let mut s = String::from("# tour stats\n");
    for (i, o) in out.iter().enumerate() {
        s += &format!(
            "channel.{i}.points = {}\nchannel.{i}.tour_length = {}\nchannel.{i}.tsp_seconds = {}\n",
            o.tour.len(),
            o.tour.length,
            o.seconds
        );
    }
    s
}

fn optimize_fragment(out: &[PathOutput]) -> String {
    let mut s = String::from("# optimize stats\n");
    for (i, o) in out.iter().enumerate() {
        let kappa = o.path.as_ref().map_or(0.0, SplinePath::max_join_curvature);
        s += &format!(
            "channel.{i}.vertices_before = {}\nchannel.{i}.vertices_after = {}\nchannel.{i}.max_join_curvature = {kappa}\nchannel.{i}.handle_scale = {}\nchannel.{i}.optimize_seconds = {}\n",
            o.vertices_before, o.vertices_after, o.handle_scale, o.seconds
        );
    }
    s
}

fn plan_fragment(out: &PlanOutput) -> String {
    let mut s = format!(
        "# plan stats\ncanvas_width_mm = {}\ncanvas_height_mm = {}\ntiles = {}\nplan_seconds = {}\n",
        out.layout.width_mm(),
        out.layout.height_mm(),
        out.layout.tiles,
        out.seconds
    );
    for (i, l) in out.drawing_lengths.iter().enumerate() {
        s += &format!("channel.{i}.drawing_length_mm = {l}\n");
    }
    s
}

/// Merges stage fragments into the report; absent values read as zero.
pub fn assemble_stats(palette: &Palette, fragments: &[String]) -> Result<StatsReport> {
    let mut kv = BTreeMap::new();
    for f in fragments {
        kv.extend(parse_key_values(f).map_err(out_err(Stage::Render))?);
    }
    let num = |key: &str| kv.get(key).and_then(|v| v.parse::<f64>().ok()).unwrap_or(0.0);
    let count = |key: &str| kv.get(key).and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let channels = palette
        .colors()
        .iter()
        .enumerate()
        .map(|(i, &color)| {
            let k = |name: &str| format!("channel.{i}.{name}");
            ChannelStats {
                color,
                points: count(&k("points")),
                tour_length: num(&k("tour_length")),
                vertices_before: count(&k("vertices_before")),
                vertices_after: count(&k("vertices_after")),
                max_join_curvature: num(&k("max_join_curvature")),
                handle_scale: num(&k("handle_scale")),
                drawing_length_mm: num(&k("drawing_length_mm")),
                stipple_seconds: num(&k("stipple_seconds")),
                tsp_seconds: num(&k("tsp_seconds")),
                optimize_seconds: num(&k("optimize_seconds")),
            }
        })
        .collect();
    Ok(StatsReport {
        canvas_width_mm: num("canvas_width_mm"),
        canvas_height_mm: num("canvas_height_mm"),
        tiles: count("tiles"),
        channels,
    })
}

fn read_text(stage: Stage, channel: Option<usize>, path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PipelineError::input(stage, channel, format!("{}: {e}", path.display())))
}

fn write_file(stage: Stage, path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| PipelineError::input(stage, None, format!("{}: {e}", path.display())))
}

fn ensure_dir(stage: Stage, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::input(stage, None, format!("{}: {e}", dir.display())))
}

fn read_header(stage: Stage, dir: &Path) -> Result<ChannelsHeader> {
    let path = dir.join(dumps::CHANNELS_FILE);
    ChannelsHeader::parse(&read_text(stage, None, &path)?)
        .map_err(|e| PipelineError::input(stage, None, format!("{}: {e}", path.display())))
}

fn read_stipples(stage: Stage, dir: &Path, n: usize) -> Result<Vec<Vec<Point>>> {
    (0..n)
        .map(|c| {
            let path = dumps::stipples_csv(dir, c);
            let set = StippleSet::parse_csv(&read_text(stage, Some(c), &path)?, c, 0)
                .map_err(|e| PipelineError::input(stage, Some(c), format!("{}: {e}", path.display())))?;
            Ok(set.points)
        })
        .collect()
}

fn read_paths(stage: Stage, dir: &Path, n: usize) -> Result<Vec<Option<SplinePath>>> {
    (0..n)
        .map(|c| {
            let path = dumps::path_txt(dir, c);
            dumps::parse_path_text(&read_text(stage, Some(c), &path)?)
                .map_err(|e| PipelineError::input(stage, Some(c), format!("{}: {e}", path.display())))
        })
        .collect()
}

fn write_fragment(stage: Stage, dir: &Path, text: &str) -> Result<()> {
    write_file(stage, &dumps::fragment_txt(dir, &stage.to_string()), text)
}

fn write_split(dir: &Path, header: &ChannelsHeader, fields: &[DensityField]) -> Result<()> {
    ensure_dir(Stage::Split, dir)?;
    write_file(Stage::Split, &dir.join(dumps::CHANNELS_FILE), header.to_text())?;
    for (c, f) in fields.iter().enumerate() {
        let png = dumps::encode_field_png(f).map_err(|e| PipelineError::internal(Stage::Split, Some(c), e))?;
        write_file(Stage::Split, &dumps::channel_png(dir, c), png)?;
    }
    Ok(())
}

fn write_stipples(dir: &Path, out: &[StippleOutput]) -> Result<()> {
    for (c, o) in out.iter().enumerate() {
        write_file(Stage::Stipple, &dumps::stipples_csv(dir, c), o.set.to_csv())?;
    }
    write_fragment(Stage::Stipple, dir, &stipple_fragment(out))
}

fn write_tours(dir: &Path, out: &[TourOutput]) -> Result<()> {
    for (c, o) in out.iter().enumerate() {
        write_file(Stage::Tour, &dumps::tour_txt(dir, c), o.tour.to_text())?;
    }
    write_fragment(Stage::Tour, dir, &tour_fragment(out))
}

fn write_paths(dir: &Path, out: &[PathOutput]) -> Result<()> {
    for (c, o) in out.iter().enumerate() {
        write_file(Stage::Optimize, &dumps::path_txt(dir, c), dumps::path_to_text(o.path.as_ref()))?;
    }
    write_fragment(Stage::Optimize, dir, &optimize_fragment(out))
}

fn write_plan(dir: &Path, out: &PlanOutput) -> Result<()> {
    write_file(Stage::Plan, &dir.join(dumps::LAYOUT_FILE), out.layout.to_text())?;
    write_file(Stage::Plan, &dir.join(dumps::PROGRAM_FILE), out.program.to_text())?;
    if let Some(t) = &out.trajectory {
        write_file(Stage::Plan, &dir.join(dumps::TRAJECTORY_FILE), t.to_csv())?;
    }
    if let Some(m) = &out.reachability {
        write_file(Stage::Plan, &dir.join(dumps::REACHABILITY_FILE), m.to_csv())?;
    }
    write_fragment(Stage::Plan, dir, &plan_fragment(out))
}

fn write_render(dir: &Path, r: &Rendered, stats: &StatsReport) -> Result<()> {
    write_file(Stage::Render, &dir.join(dumps::SVG_FILE), &r.svg)?;
    write_file(Stage::Render, &dir.join(dumps::PREVIEW_FILE), &r.preview_png)?;
    write_file(Stage::Render, &dir.join(dumps::STATS_FILE), stats.to_text())
}

fn check_config(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate().map_err(|e| PipelineError::input(Stage::Config, None, e))
}

fn read_input(cfg: &PipelineConfig) -> Result<RasterImage> {
    load_image(&cfg.input).map_err(|e| PipelineError::input(Stage::Split, None, e))
}

/// `split`: image → `channels.txt` and `channel_<i>.png`.
pub fn run_split(cfg: &PipelineConfig) -> Result<ChannelsHeader> {
    check_config(cfg)?;
    let (header, fields) = separate(&read_input(cfg)?, cfg)?;
    write_split(&cfg.out_dir, &header, &fields)?;
    Ok(header)
}

/// `stipple`: separations → `stipples_<i>.csv`.
pub fn run_stipple(cfg: &PipelineConfig) -> Result<Vec<StippleOutput>> {
    check_config(cfg)?;
    let dir = &cfg.out_dir;
    let header = read_header(Stage::Stipple, dir)?;
    let fields = (0..header.palette.len())
        .map(|c| {
            let path = dumps::channel_png(dir, c);
            let bytes = fs::read(&path)
                .map_err(|e| PipelineError::input(Stage::Stipple, Some(c), format!("{}: {e}", path.display())))?;
            dumps::decode_field_png(&bytes, header.palette.colors()[c], c)
                .map_err(|e| PipelineError::input(Stage::Stipple, Some(c), format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = stipple_fields(&fields, cfg)?;
    write_stipples(dir, &out)?;
    Ok(out)
}

/// `tour`: `stipples_<i>.csv` → `tour_<i>.txt`. Channels are the
/// consecutive stipple files present.
pub fn run_tour(cfg: &PipelineConfig) -> Result<Vec<TourOutput>> {
    check_config(cfg)?;
    let dir = &cfg.out_dir;
    let n = dumps::count_channels(dir, dumps::stipples_csv);
    if n == 0 {
        return Err(PipelineError::input(Stage::Tour, None, format!("no stipples_0.csv in {}", dir.display())));
    }
    let points = read_stipples(Stage::Tour, dir, n)?;
    let out = solve_tours(&points, cfg)?;
    write_tours(dir, &out)?;
    Ok(out)
}

/// `optimize`: stipples and tours → `path_<i>.txt`.
pub fn run_optimize(cfg: &PipelineConfig) -> Result<Vec<PathOutput>> {
    check_config(cfg)?;
    let dir = &cfg.out_dir;
    let n = dumps::count_channels(dir, dumps::tour_txt);
    if n == 0 {
        return Err(PipelineError::input(Stage::Optimize, None, format!("no tour_0.txt in {}", dir.display())));
    }
    let points = read_stipples(Stage::Optimize, dir, n)?;
    let tours = (0..n)
        .map(|c| {
            let path = dumps::tour_txt(dir, c);
            Tour::parse_text(&read_text(Stage::Optimize, Some(c), &path)?, &points[c])
                .map_err(|e| PipelineError::input(Stage::Optimize, Some(c), format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = optimize_tours(&points, &tours, cfg)?;
    write_paths(dir, &out)?;
    Ok(out)
}

/// `plan`: paths → `layout.txt`, `program.txt` and, with a robot,
/// `trajectory.csv` and `reachability.csv`.
pub fn run_plan(cfg: &PipelineConfig) -> Result<PlanOutput> {
    check_config(cfg)?;
    let dir = &cfg.out_dir;
    let header = read_header(Stage::Plan, dir)?;
    let paths = read_paths(Stage::Plan, dir, header.palette.len())?;
    let out = plan_drawing(&paths, (header.width, header.height), cfg)?;
    write_plan(dir, &out)?;
    Ok(out)
}

fn read_fragments(dir: &Path) -> Vec<String> {
    [Stage::Stipple, Stage::Tour, Stage::Optimize, Stage::Plan]
        .iter()
        .filter_map(|s| fs::read_to_string(dumps::fragment_txt(dir, &s.to_string())).ok())
        .collect()
}

/// `render`: paths and layout → `drawing.svg`, `preview.png`, `stats.txt`.
pub fn run_render(cfg: &PipelineConfig) -> Result<StatsReport> {
    check_config(cfg)?;
    let dir = &cfg.out_dir;
    let header = read_header(Stage::Render, dir)?;
    let paths = read_paths(Stage::Render, dir, header.palette.len())?;
    let layout_path = dir.join(dumps::LAYOUT_FILE);
    let layout = Layout::parse(&read_text(Stage::Render, None, &layout_path)?)
        .map_err(|e| PipelineError::input(Stage::Render, None, format!("{}: {e}", layout_path.display())))?;
    let rendered = render_drawing(&paths, &header.palette, &layout, cfg)?;
    let stats = assemble_stats(&header.palette, &read_fragments(dir))?;
    write_render(dir, &rendered, &stats)?;
    Ok(stats)
}

/// Files written by a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub svg: PathBuf,
    pub preview: PathBuf,
    pub program: PathBuf,
    pub stats: PathBuf,
    pub trajectory: Option<PathBuf>,
    pub report: StatsReport,
}

/// All stages in memory, writing every dump along the way.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Artifacts> {
    check_config(cfg)?;
    let dir = &cfg.out_dir;
    let (header, fields) = separate(&read_input(cfg)?, cfg)?;
    write_split(dir, &header, &fields)?;

    let stipples = stipple_fields(&fields, cfg)?;
    write_stipples(dir, &stipples)?;
    let points: Vec<Vec<Point>> = stipples.iter().map(|s| s.set.points.clone()).collect();

    let tours = solve_tours(&points, cfg)?;
    write_tours(dir, &tours)?;
    let tour_list: Vec<Tour> = tours.iter().map(|t| t.tour.clone()).collect();

    let optimized = optimize_tours(&points, &tour_list, cfg)?;
    write_paths(dir, &optimized)?;
    let paths: Vec<Option<SplinePath>> = optimized.iter().map(|o| o.path.clone()).collect();

    let plan = plan_drawing(&paths, (header.width, header.height), cfg)?;
    write_plan(dir, &plan)?;

    let rendered = render_drawing(&paths, &header.palette, &plan.layout, cfg)?;
    let fragments = [
        stipple_fragment(&stipples),
        tour_fragment(&tours),
        optimize_fragment(&optimized),
        plan_fragment(&plan),
    ];
    let report = assemble_stats(&header.palette, &fragments)?;
    write_render(dir, &rendered, &report)?;
    Ok(Artifacts {
        svg: dir.join(dumps::SVG_FILE),
        preview: dir.join(dumps::PREVIEW_FILE),
        program: dir.join(dumps::PROGRAM_FILE),
        stats: dir.join(dumps::STATS_FILE),
        trajectory: plan.trajectory.as_ref().map(|_| dir.join(dumps::TRAJECTORY_FILE)),
        report,
    })
}
