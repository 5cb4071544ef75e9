//! Artifacts: layered SVG, raster preview, plotter program and statistics.

mod preview;
mod program;
mod stats;
mod svg;

use thiserror::Error;

use crate::imaging::Rgb;

pub use preview::{encode_png, render_preview, Layer, PreviewSpec, MIN_PREVIEW_WIDTH};
pub use program::{Instruction, PlotterProgram, TileDrawing, ToolPass};
pub use stats::{parse_key_values, ChannelStats, StatsReport, StatsTotals};
pub use svg::{emit_svg, parse_svg, SvgGroup, SvgLayout};

#[derive(Debug, Error, PartialEq)]
pub enum OutputError {
    #[error("no channels to emit")]
    NoChannels,
    #[error("{channels} channels but {colors} palette colors")]
    PaletteMismatch { channels: usize, colors: usize },
    #[error("preview width {0} is below the minimum of 16 px")]
    PreviewTooSmall(usize),
    #[error("invalid output parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("image encoding failed: {0}")]
    Encode(String),
    #[error("malformed svg: {0}")]
    SvgParse(String),
    #[error("malformed program at line {line}: {reason}")]
    ProgramParse { line: usize, reason: String },
    #[error("malformed stats at line {line}: {reason}")]
    StatsParse { line: usize, reason: String },
}

/// `#rrggbb` for a color with components in `[0, 1]`.
pub fn hex_color(c: Rgb) -> String {
    let [r, g, b] = c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
    format!("#{r:02x}{g:02x}{b:02x}")
}
